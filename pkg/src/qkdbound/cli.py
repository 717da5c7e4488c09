"""Command-line front end.

Subcommands: threshold, rate-curve, repeater, simulate, gamma-check.
Every flag can also be given in a ``--config`` file of ``key=value`` lines
(``#`` starts a comment; keys use the flag name without dashes, ``v-min`` or
``v_min``).  Flags on the command line override the file.

Exit status: 0 success, 2 usage error, 1 computation or output error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attack import (
    Convention,
    LeakageModel,
    closed_form_gamma,
    mixing_weight_qv,
    separability_threshold,
    zero_key_threshold,
)
from .distributions import born_distribution
from .measurements import parse_setting
from .montecarlo import simulate_rounds
from .optimize import INFO_MEASURE, SettingsSpace, _threads, rate_curve
from .plot import emit_svg
from .quantum import ghz_projector, sep_isotropic
from .repeater import EXPONENTS, repeater_rate_curve, repeater_report, swapped_visibility

CURVE_COLUMNS = ["v", "rate_bits", "objective_bits", "p_question", "settings_descriptor", "gamma_feasible",
                 "convention"]
REPEATER_COLUMNS = ["n", "v_final", "rate_bits", "objective_bits", "settings_descriptor"]


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """Fixed nine-decimal rendering used in every CSV and JSON output."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{float(x):.9f}"


def _json_text(obj, indent: int = 2, level: int = 0) -> str:
    pad, inner = " " * (indent * level), " " * (indent * (level + 1))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {_json_text(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_json_text(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(inner + _json_text(v, indent, level + 1) for v in obj) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return "null" if not math.isfinite(obj) else fmt(obj)
    return json.dumps(str(obj))


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


# --- argument handling -----------------------------------------------------


def _add_common(p, *, v=False, L=True, model=True):
    p.add_argument("--config", help="key=value file with defaults for any flag")
    p.add_argument("--d", type=int, default=2, help="local dimension (default 2)")
    p.add_argument("--N", type=int, default=2, help="number of parties (default 2)")
    if v:
        p.add_argument("--v", type=float, required=False, help="visibility in [0, 1]")
    if L:
        p.add_argument("--L", type=str, default="0.1", help="leakage probability; comma-separated list for one curve per value (default 0.1)")
    if model:
        p.add_argument("--model", default="uniform", help="uniform | junk (default uniform)")
    p.add_argument("--convention", default="derived", help="derived | stated (default derived)")


def _add_settings(p):
    p.add_argument("--settings", default=None,
                   help="computational | xz | bloch (default: xz for qubits, computational otherwise)")
    p.add_argument("--setting", action="append", default=None,
                   help="explicit settings, parties separated by ';', e.g. 'zbasis;xz:0.3' (repeatable)")
    p.add_argument("--fixed", default=None,
                   help="settings of parties 1..N-1 for xz/bloch spaces, ';'-separated (default zbasis)")
    p.add_argument("--theta-step", type=float, default=math.pi / 60, help="grid step in theta (default pi/60)")
    p.add_argument("--phi-step", type=float, default=math.pi / 30, help="grid step in phi (default pi/30)")
    p.add_argument("--no-refine", action="store_true", help="skip golden-section refinement")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkdbound",
        description="Upper bounds on entanglement-based QKD key rates under convex-combination attacks "
                    "with classical leakage.  Defaults: model=uniform, convention=derived.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("threshold", help="separability and zero-key thresholds (JSON)")
    _add_common(p)
    p.add_argument("--out", help="JSON output path (default stdout)")

    p = sub.add_parser("rate-curve", help="key-rate bound versus visibility (CSV, optional SVG)")
    _add_common(p)
    p.add_argument("--v-min", type=float, default=0.0)
    p.add_argument("--v-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=51, help="number of grid points (default 51)")
    _add_settings(p)
    p.add_argument("--out", help="CSV output path (default stdout); several L values give one file each")
    p.add_argument("--svg", help="write an SVG plot of all series")

    p = sub.add_parser("repeater", help="maximum repeater count (JSON) and rate versus n (CSV)")
    p.add_argument("--config", help="key=value file with defaults for any flag")
    p.add_argument("--v", type=float, default=0.95, help="per-link visibility (default 0.95)")
    p.add_argument("--L", type=str, default="0.1", help="leakage probability (default 0.1)")
    p.add_argument("--exponent", default="doubled", help="doubled (v^2n) | links (v^(n+1))")
    p.add_argument("--n-max", type=int, default=None, help="largest n in the rate table (default n_max + 2)")
    _add_settings(p)
    p.add_argument("--out", help="JSON output path (default stdout)")
    p.add_argument("--csv", help="write the (n, rate) table here")
    p.add_argument("--svg", help="write an SVG plot of rate versus n")

    p = sub.add_parser("simulate", help="Monte Carlo simulation of the attack (JSON)")
    _add_common(p, v=True)
    p.add_argument("--gamma", default="0",
                   help="'closed' (clamped closed form), one value, or d^N comma-separated values")
    p.add_argument("--setting", default=None, help="per-party settings separated by ';' (default zbasis)")
    p.add_argument("--rounds", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON output path (default stdout)")

    p = sub.add_parser("gamma-check", help="closed-form mixing parameters and feasibility (JSON)")
    _add_common(p, v=True)
    p.add_argument("--setting", default=None, help="per-party settings separated by ';' (default zbasis)")
    p.add_argument("--out", help="JSON output path (default stdout)")
    return parser


def _read_config(path: str) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        cfg[key.strip().lstrip("-").replace("-", "_")] = value.strip()
    return cfg


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        cfg = _read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        for key in cfg:
            if key not in known or key in ("help", "config"):
                raise UsageError(f"unknown config key {key!r} for {args.command}")
        for key, value in cfg.items():
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                value = value.lower() in ("1", "true", "yes", "on")
            elif isinstance(action, argparse._AppendAction):
                value = [value]
            sub.set_defaults(**{key: value})
        args = parser.parse_args(argv)
    return args


def _leakages(text: str) -> list[float]:
    try:
        vals = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"cannot parse leakage {text!r}") from None
    if not vals or any(not 0 <= x <= 1 for x in vals):
        raise UsageError(f"leakage must lie in [0, 1], got {text!r}")
    return vals


def _model(kind: str, L: float) -> LeakageModel:
    kind = str(kind).lower()
    if kind not in ("uniform", "junk"):
        raise UsageError(f"model must be uniform or junk, got {kind!r}")
    return LeakageModel(kind, L)


def _convention(text: str) -> Convention:
    try:
        return Convention(str(text).lower())
    except ValueError:
        raise UsageError(f"convention must be derived or stated, got {text!r}") from None


def _check_dims(d: int, n: int) -> None:
    if d < 2 or n < 2:
        raise UsageError(f"need d >= 2 and N >= 2, got d={d}, N={n}")
    if d**n > 64:
        raise UsageError(f"d^N = {d**n} exceeds the supported size 64")


def _settings_space(args, d: int, n: int) -> SettingsSpace:
    if args.setting:
        cands = tuple(tuple(s.strip() for s in entry.split(";")) for entry in args.setting)
        for c in cands:
            if len(c) != n:
                raise UsageError(f"setting {';'.join(c)!r} lists {len(c)} parties, expected {n}")
            for s in c:
                parse_setting(s, d)
        return SettingsSpace("list", candidates=cands)
    kind = args.settings or ("xz" if d == 2 else "computational")
    if kind not in ("computational", "xz", "bloch"):
        raise UsageError(f"unknown settings space {kind!r}")
    if kind != "computational" and d != 2:
        raise UsageError(f"{kind} settings need qubits (d=2)")
    fixed = tuple(s.strip() for s in args.fixed.split(";")) if args.fixed else ()
    for s in fixed:
        parse_setting(s, d)
    if len(fixed) > n - 1:
        raise UsageError(f"--fixed lists {len(fixed)} settings for {n - 1} parties")
    if args.theta_step <= 0 or args.phi_step <= 0:
        raise UsageError("grid steps must be positive")
    return SettingsSpace(kind, args.theta_step, args.phi_step, not args.no_refine, fixed)


def _party_settings(text: str | None, d: int, n: int):
    if not text:
        return None
    parts = [s.strip() for s in text.split(";")]
    if len(parts) != n:
        raise UsageError(f"setting {text!r} lists {len(parts)} parties, expected {n}")
    return [parse_setting(s, d) for s in parts]


# --- subcommands -----------------------------------------------------------


def cmd_threshold(args) -> int:
    _check_dims(args.d, args.N)
    conv = _convention(args.convention)
    results = []
    for L in _leakages(args.L):
        model = _model(args.model, L)
        stated = zero_key_threshold(args.d, args.N, model, Convention.STATED)
        derived = zero_key_threshold(args.d, args.N, model, Convention.DERIVED)
        results.append({
            "d": args.d, "N": args.N, "L": L, "model": model.kind.value,
            "separability_threshold": separability_threshold(args.d, args.N),
            "zero_key_threshold": derived if conv is Convention.DERIVED else stated,
            "convention": conv.value,
            "zero_key_threshold_derived": derived,
            "zero_key_threshold_stated": stated,
            "conventions_agree": abs(stated - derived) <= 1e-12,
        })
    _write(_json_text(results[0] if len(results) == 1 else results) + "\n", args.out)
    return 0


def _curve_rows(bounds, conv: Convention):
    return [
        [fmt(b.v), fmt(b.rate), fmt(b.objective_value), fmt(b.p_question), b.settings_descriptor,
         "true" if b.gamma_feasible else "false", conv.value]
        for b in bounds
    ]


def _series_path(out: str | None, L: float, many: bool) -> str | None:
    if not many or out in (None, "-"):
        return out
    p = Path(out)
    return str(p.with_name(f"{p.stem}_L{L:g}{p.suffix}"))


def cmd_rate_curve(args) -> int:
    d, n = args.d, args.N
    _check_dims(d, n)
    conv = _convention(args.convention)
    if args.steps < 1:
        raise UsageError("--steps must be >= 1")
    if not 0 <= args.v_min <= args.v_max <= 1:
        raise UsageError("need 0 <= v-min <= v-max <= 1")
    space = _settings_space(args, d, n)
    grid = np.linspace(args.v_min, args.v_max, args.steps) if args.steps > 1 else np.array([args.v_max])
    leaks = _leakages(args.L)
    models = [_model(args.model, L) for L in leaks]
    threads = _threads()
    series = {}
    for L, model in zip(leaks, models):
        bounds = rate_curve(d, n, model, grid, space, threads)
        text = _csv_text(CURVE_COLUMNS, _curve_rows(bounds, conv))
        _write(text, _series_path(args.out, L, len(leaks) > 1))
        series[f"L={L:g}"] = [(b.v, b.rate) for b in bounds]
    if args.svg:
        emit_svg(series, "visibility v", "key rate bound (bits/round)", args.svg,
                 f"d={d}, N={n}, {args.model} leakage")
    return 0


def cmd_repeater(args) -> int:
    if args.v is None or not 0 <= args.v <= 1:
        raise UsageError("--v must lie in [0, 1]")
    if args.exponent not in EXPONENTS:
        raise UsageError(f"--exponent must be one of {EXPONENTS}")
    leaks = _leakages(args.L)
    if len(leaks) != 1:
        raise UsageError("repeater takes a single leakage value")
    L = leaks[0]
    report = repeater_report(args.v, L, args.exponent)
    report["info_measure"] = INFO_MEASURE
    if args.csv or args.svg:
        space = _settings_space(args, 2, 2)
        top = args.n_max
        if top is None:
            top = min(report["n_max_derived"], 200) + 2
        if top < 0:
            raise UsageError("--n-max must be >= 0")
        curve = repeater_rate_curve(args.v, L, range(top + 1), space, args.exponent)
        rows = [[str(k), fmt(swapped_visibility(args.v, k, args.exponent)), fmt(b.rate), fmt(b.objective_value),
                 b.settings_descriptor] for k, b in curve]
        if args.csv:
            _write(_csv_text(REPEATER_COLUMNS, rows), args.csv)
        if args.svg:
            emit_svg({f"v={args.v:g}": [(k, b.rate) for k, b in curve]}, "repeater nodes n",
                     "key rate bound (bits/round)", args.svg, f"uniform leakage L={L:g}")
    _write(_json_text(report) + "\n", args.out)
    return 0


def _closed_gamma(d, n, v, model, ms):
    p_ent = born_distribution(ghz_projector(d, n), ms)
    p_sep = born_distribution(sep_isotropic(d, n), ms)
    q_v = mixing_weight_qv(d, n, v)
    gamma, feasible = closed_form_gamma(p_ent, p_sep, q_v, model)
    return q_v, gamma, feasible, p_ent, p_sep


def _outcomes(d, n):
    return ["".join(map(str, np.unravel_index(i, (d,) * n))) for i in range(d**n)]


def _check_v(v, d, n):
    if v is None:
        raise UsageError("--v is required")
    if not separability_threshold(d, n) <= v <= 1:
        raise UsageError(f"--v must lie in [{separability_threshold(d, n):.9f}, 1] (below it the state is separable)")


def cmd_gamma_check(args) -> int:
    d, n = args.d, args.N
    _check_dims(d, n)
    _check_v(args.v, d, n)
    leaks = _leakages(args.L)
    if len(leaks) != 1:
        raise UsageError("gamma-check takes a single leakage value")
    model = _model(args.model, leaks[0])
    from .measurements import computational_basis

    ms = _party_settings(args.setting, d, n) or [computational_basis(d)] * n
    q_v, gamma, feasible, p_ent, p_sep = _closed_gamma(d, n, args.v, model, ms)
    out = {
        "d": d, "N": n, "v": args.v, "L": model.L, "model": model.kind.value,
        "settings": [m.label for m in ms],
        "q_v": q_v,
        "outcomes": _outcomes(d, n),
        "p_ent": p_ent.flat().tolist(),
        "p_sep": p_sep.flat().tolist(),
        "gamma": [float(g) if math.isfinite(g) else None for g in gamma.reshape(-1)],
        "feasible": feasible,
        "zero_key_threshold_derived": zero_key_threshold(d, n, model, Convention.DERIVED),
        "zero_key_threshold_stated": zero_key_threshold(d, n, model, Convention.STATED),
        "separability_threshold": separability_threshold(d, n),
    }
    _write(_json_text(out) + "\n", args.out)
    return 0


def cmd_simulate(args) -> int:
    d, n = args.d, args.N
    _check_dims(d, n)
    _check_v(args.v, d, n)
    if args.rounds < 1:
        raise UsageError("--rounds must be >= 1")
    if args.seed < 0:
        raise UsageError("--seed must be non-negative")
    leaks = _leakages(args.L)
    if len(leaks) != 1:
        raise UsageError("simulate takes a single leakage value")
    model = _model(args.model, leaks[0])
    from .measurements import computational_basis

    ms = _party_settings(args.setting, d, n) or [computational_basis(d)] * n
    if str(args.gamma).strip().lower() == "closed":
        _, g, _, _, _ = _closed_gamma(d, n, args.v, model, ms)
        gamma = np.clip(np.nan_to_num(g, posinf=1.0), 0.0, 1.0)
    else:
        try:
            vals = [float(x) for x in str(args.gamma).split(",")]
        except ValueError:
            raise UsageError(f"cannot parse --gamma {args.gamma!r}") from None
        if len(vals) not in (1, d**n) or any(not 0 <= g <= 1 for g in vals):
            raise UsageError(f"--gamma needs 1 or {d**n} values in [0, 1]")
        gamma = np.array(vals if len(vals) > 1 else vals * d**n)
    report = simulate_rounds(d, n, args.v, model, gamma, ms, args.rounds, args.seed)
    out = report.to_dict()
    out["gamma"] = gamma.reshape(-1).tolist()
    out["settings"] = [m.label for m in ms]
    _write(_json_text(out) + "\n", args.out)
    return 0


COMMANDS = {
    "threshold": cmd_threshold,
    "rate-curve": cmd_rate_curve,
    "repeater": cmd_repeater,
    "simulate": cmd_simulate,
    "gamma-check": cmd_gamma_check,
}


def run(argv=None) -> int:
    try:
        args = parse_args(sys.argv[1:] if argv is None else list(argv))
    except SystemExit as exc:  # argparse: --help, --version, or a usage error
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"qkdbound: error: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"qkdbound: error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # precondition violations reported by the library (bad settings text, env vars, ...)
        print(f"qkdbound: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ArithmeticError, RuntimeError) as exc:
        print(f"qkdbound: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
