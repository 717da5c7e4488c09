"""Exit criteria.  Each test prints one PASS/FAIL line (visible with ``-s`` or ``-v -rA``)."""

import math
import time

import numpy as np
import pytest

from qkdbound.attack import (
    Convention,
    LeakageModel,
    closed_form_gamma,
    mixing_weight_qv,
    separability_threshold,
    zero_key_threshold,
)
from qkdbound.measurements import computational_basis, xz_plane_measurement
from qkdbound.montecarlo import simulate_rounds
from qkdbound.optimize import SettingsSpace, maximize_over_settings, minimize_over_gamma, rate_curve
from qkdbound.repeater import max_repeaters, repeater_rate_curve, repeater_report, swapped_visibility

from conftest import ent_sep
from oracles import grid_min_gamma

U, J = LeakageModel.uniform, LeakageModel.junk
CONFIGS = [(2, 2), (3, 2), (2, 3)]
LEAKS = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30]


@pytest.fixture
def verdict(capsys):
    def _report(number, title, failures, started):
        status = "PASS" if not failures else "FAIL"
        with capsys.disabled():
            print(f"\n[{status}] criterion {number}: {title} ({time.perf_counter() - started:.1f}s)")
            for f in failures[:10]:
                print(f"    - {f}")
        assert not failures, failures

    return _report


def test_criterion_1_separability_anchors(verdict):
    t0 = time.perf_counter()
    fails = [
        f"{dn}: {separability_threshold(*dn)} != {want}"
        for dn, want in (((2, 2), 1 / 3), ((3, 2), 1 / 4), ((2, 3), 1 / 5))
        if abs(separability_threshold(*dn) - want) > 1e-12
    ]
    verdict(1, "separability thresholds 1/3, 1/4, 1/5", fails, t0)


def _flip_point(d, n, model, step=1e-4):
    ent, sep = ent_sep(d, n, [computational_basis(d)] * n)
    last_feasible = None
    for v in np.arange(separability_threshold(d, n), 1.0, step):
        if closed_form_gamma(ent, sep, mixing_weight_qv(d, n, v), model)[1]:
            last_feasible = v
        else:
            return last_feasible, v
    return last_feasible, None


def test_criterion_2_threshold_adjudication(verdict):
    t0 = time.perf_counter()
    fails = []
    for d, n in CONFIGS:
        k = d ** (n - 1)
        for L in LEAKS:
            lo, hi = _flip_point(d, n, U(L))
            t = zero_key_threshold(d, n, U(L), Convention.DERIVED)
            if hi is None or not (lo <= t + 1e-12 and t <= hi + 1e-12) or hi - lo > 1e-4 + 1e-12:
                fails.append(f"uniform {d},{n} L={L}: flip in [{lo}, {hi}], derived threshold {t}")
            stated = zero_key_threshold(d, n, U(L), Convention.STATED)
            if lo <= stated <= hi:
                fails.append(f"uniform {d},{n} L={L}: stated threshold {stated} also inside the flip bracket")

            junk_closed = 1 / (1 + k) + k * L / ((1 + k) * (L + 1 + k))
            for conv in Convention:
                tj = zero_key_threshold(d, n, J(L), conv)
                if abs(tj - junk_closed) > 1e-9:
                    fails.append(f"junk {d},{n} L={L} {conv.value}: {tj} != {junk_closed}")
            lo, hi = _flip_point(d, n, J(L))
            if hi is None or not (lo <= junk_closed + 1e-12 <= hi + 2e-12):
                fails.append(f"junk {d},{n} L={L}: flip in [{lo}, {hi}], threshold {junk_closed}")
    if abs(zero_key_threshold(2, 2, J(0.1)) - 0.3548387) > 1e-7:
        fails.append("junk (2,2) L=0.1 is not 0.3548387")
    two_qubit_junk = 1 / 3 + 2 * 0.1 / (3 * (0.1 + 3))
    if abs(zero_key_threshold(2, 2, J(0.1)) - two_qubit_junk) > 1e-9:
        fails.append("junk (2,2) L=0.1 disagrees with the two-qubit closed form")
    verdict(2, "gamma feasibility flips at the derived threshold; junk conventions agree", fails, t0)


def test_criterion_3_zero_rate_region(verdict):
    t0 = time.perf_counter()
    fails = []
    model = U(0.1)
    t = zero_key_threshold(2, 2, model)
    grid = np.concatenate([np.linspace(0.0, 0.35714, 40), [t - 1e-9]])
    for space in (SettingsSpace("xz"), SettingsSpace("computational")):
        for b in rate_curve(2, 2, model, grid, space):
            if b.rate > 1e-6:
                fails.append(f"{space.kind}: rate {b.rate} at v={b.v}")
    zz = SettingsSpace("list", candidates=(("zbasis", "zbasis"),))
    r = maximize_over_settings(2, 2, 0.38, model, zz).rate
    if not r > 1e-3:
        fails.append(f"rate at v=0.38 with Z x Z is {r}")
    verdict(3, f"zero rate for v <= 0.35714, positive ({r:.6f}) at v = 0.38", fails, t0)


def test_criterion_4_ideal_state_anchors(verdict):
    t0 = time.perf_counter()
    fails = []
    ideal = {(2, 2): 1.0, (3, 2): math.log2(3), (2, 3): 1.0}
    for (d, n), want in ideal.items():
        for L in (0.0, 0.1, 0.2, 0.3):
            got = maximize_over_settings(d, n, 1.0, U(L)).rate
            if abs(got - (1 - L) * want) > 1e-6:
                fails.append(f"({d},{n}) L={L}: {got} != {(1 - L) * want}")
    b = maximize_over_settings(2, 2, 1.0, U(0.0), SettingsSpace("bloch"))
    if abs(b.rate - 1.0) > 1e-6:
        fails.append(f"bloch grid (2,2): {b.rate}")
    verdict(4, "v=1 anchors 1, log2(3), 1 bit and (1-L) scaling", fails, t0)


def test_criterion_5_repeater_bound(verdict):
    t0 = time.perf_counter()
    fails = []
    if max_repeaters(0.95, 0.1, Convention.DERIVED) != 10:
        fails.append("derived n_max at v=0.95, L=0.1 is not 10")
    if max_repeaters(0.95, 0.1, Convention.STATED) != 8:
        fails.append("stated n_max at v=0.95, L=0.1 is not 8")
    rep = repeater_report(0.95, 0.1)
    if rep["conventions_agree"] or rep["n_max_derived"] != 10 or rep["n_max_stated"] != 8:
        fails.append(f"report does not expose the divergence: {rep}")
    for v in (0.9, 0.95, 0.98):
        for L in (0.0, 0.1, 0.2):
            for conv in Convention:
                t = zero_key_threshold(2, 2, U(L), conv)
                scan = max(n for n in range(0, 500) if n == 0 or swapped_visibility(v, n) > t)
                if scan != max_repeaters(v, L, conv):
                    fails.append(f"v={v} L={L} {conv.value}: scan {scan} vs {max_repeaters(v, L, conv)}")
    verdict(5, "n_max = 10 (derived) / 8 (stated); closed form matches direct scan", fails, t0)


def _nondecreasing(xs, tol=1e-6):
    return all(b >= a - tol for a, b in zip(xs, xs[1:]))


def test_criterion_6_figure_shapes(verdict):
    t0 = time.perf_counter()
    fails = []
    grid = np.linspace(0.0, 1.0, 50)
    figures = {(2, 2): SettingsSpace("xz"), (2, 3): SettingsSpace("xz"), (3, 2): SettingsSpace("computational")}
    for (d, n), space in figures.items():
        curves = {}
        for L in (0.1, 0.2, 0.3):
            curve = rate_curve(d, n, U(L), grid, space)
            rates = [b.rate for b in curve]
            curves[L] = rates
            if not _nondecreasing(rates):
                fails.append(f"({d},{n}) L={L}: not non-decreasing in v")
            t = zero_key_threshold(d, n, U(L))
            bad = [(v, r) for v, r in zip(grid, rates) if v <= t and r > 1e-6]
            if bad:
                fails.append(f"({d},{n}) L={L}: nonzero below threshold {t}: {bad[:3]}")
            if rates[-1] <= 0:
                fails.append(f"({d},{n}) L={L}: zero at v=1")
        for lo, hi in ((0.1, 0.2), (0.2, 0.3)):
            if any(b > a + 1e-6 for a, b in zip(curves[lo], curves[hi])):
                fails.append(f"({d},{n}): L={hi} curve rises above L={lo}")
    for v in (0.9, 0.95, 0.98):
        rates = [b.rate for _, b in repeater_rate_curve(v, 0.1, range(50), SettingsSpace("xz"))]
        if any(b > a + 1e-6 for a, b in zip(rates, rates[1:])):
            fails.append(f"repeater v={v}: rate increases with n")
        if rates[0] <= 0:
            fails.append(f"repeater v={v}: zero rate without repeaters")
    elapsed = time.perf_counter() - t0
    if elapsed > 300:
        fails.append(f"runtime {elapsed:.0f}s exceeds 5 min")
    verdict(6, "curve shapes: monotone in v, zero to threshold, ordered in L; repeater curves monotone in n", fails, t0)


def test_criterion_7_optimizer_oracle(verdict):
    t0 = time.perf_counter()
    fails = []
    rng = np.random.default_rng(7)
    for k in range(20):
        v, L = rng.uniform(1 / 3, 1.0), rng.uniform(0.01, 0.4)
        theta = 0.0 if k % 2 == 0 else rng.uniform(0, math.pi)
        ent, sep = ent_sep(2, 2, [computational_basis(2), xz_plane_measurement(theta)])
        q = mixing_weight_qv(2, 2, v)
        got = minimize_over_gamma(ent, sep, q, U(L)).objective
        want, _ = grid_min_gamma(ent, sep, q, U(L))
        if abs(got - want) > 1e-3:
            fails.append(f"v={v:.4f} L={L:.4f} theta={theta:.3f}: optimizer {got} vs grid {want}")
    verdict(7, "gamma minimiser matches exhaustive grid within 1e-3 bits (20 instances)", fails, t0)


def test_criterion_8_monte_carlo(verdict):
    t0 = time.perf_counter()
    fails = []
    rounds = 1_000_000
    cases = [
        (0.6, U(0.2), [0.1, 0.7, 0.7, 0.1]),
        (0.45, U(0.1), "closed"),
        (0.8, J(0.3), [0.5, 0.2, 0.9, 0.0]),
        (0.5, J(0.1), None),
    ]
    for i, (v, model, gamma) in enumerate(cases):
        if gamma == "closed":
            ent, sep = ent_sep(2, 2, [computational_basis(2)] * 2)
            gamma = np.minimum(closed_form_gamma(ent, sep, mixing_weight_qv(2, 2, v), model)[0], 1)
        r = simulate_rounds(2, 2, v, model, gamma, rounds=rounds, seed=100 + i)
        if r.max_table_deviation > 5e-3 or r.max_conditional_deviation > 5e-3:
            fails.append(f"case {i}: deviations {r.max_table_deviation}, {r.max_conditional_deviation}")
        if abs(r.class_masses - r.analytic.sum(axis=1)).max() > 5e-3:
            fails.append(f"case {i}: class masses off")
        target = model.L if model.kind.value == "uniform" else 3 * model.L * (1 - v) / 2
        sigma = math.sqrt(target * (1 - target) / rounds)
        if abs(r.leaked_fraction - target) > 3 * sigma:
            fails.append(f"case {i}: leaked fraction {r.leaked_fraction} vs {target} (3 sigma = {3 * sigma:.2e})")
        again = simulate_rounds(2, 2, v, model, gamma, rounds=rounds, seed=100 + i)
        if not np.array_equal(again.counts, r.counts):
            fails.append(f"case {i}: not deterministic under a fixed seed")
    elapsed = time.perf_counter() - t0
    if elapsed > 60:
        fails.append(f"runtime {elapsed:.0f}s exceeds 1 min")
    verdict(8, "Monte Carlo matches the Eve table; leaked fractions L and 3L(1-v)/2", fails, t0)
