"""Max-min key-rate bound: Eve minimises over mixing parameters, the honest
parties maximise over their measurement settings.

The objective for a fixed input tuple is

    J(gamma) = p(?) * TC(p(. | ?))

and the bound is ``max_settings min_gamma J / (N - 1)``.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .attack import (
    Convention,
    LeakageModel,
    closed_form_gamma,
    eve_joint_distribution,
    mixing_weight_qv,
    question_conditional,
    separability_threshold,
)
from .distributions import JointDistribution, born_distribution, total_correlation
from .measurements import (
    ProjectiveMeasurement,
    computational_basis,
    parse_setting,
    qubit_bloch_measurement,
    xz_plane_measurement,
)
from .quantum import ghz_projector, sep_isotropic

INFO_MEASURE = "total_correlation"
N_RANDOM_STARTS = 5
MAX_SWEEPS = 10_000
SWEEP_TOL = 1e-10


def weighted_objective(gamma, p_ent, p_sep, q_v: float, model: LeakageModel) -> float:
    """p(?) times the total correlation of p(a | ?); zero when p(?) = 0."""
    ejd = eve_joint_distribution(p_ent, p_sep, q_v, model, gamma)
    if ejd.class_masses()[2] <= 0:
        return 0.0
    p_q, cond = question_conditional(ejd)
    return p_q * total_correlation(cond)


class _Objective:
    """Fast evaluation of J over symmetry-reduced mixing parameters.

    Outcomes with equal (p_ent, p_sep) share one variable.
    """

    def __init__(self, ent: np.ndarray, sep: np.ndarray, q_v: float, model: LeakageModel):
        self.shape = ent.shape
        self.n = ent.ndim
        flat_ent, flat_sep = ent.reshape(-1), sep.reshape(-1)
        self.base = model.ent_question_weight(q_v) * flat_ent
        self.coef = q_v * model.L * flat_sep
        keys = np.round(np.stack([flat_ent, flat_sep], axis=1), 12)
        _, self.groups = np.unique(keys, axis=0, return_inverse=True)
        self.groups = self.groups.reshape(-1)
        self.n_vars = int(self.groups.max()) + 1
        # rows of `signs @ stack` give joint entries (+) and every single-party marginal (-)
        d, dim = self.shape[0], flat_ent.size
        idx = np.indices(self.shape).reshape(self.n, -1)
        marg = np.zeros((self.n * d, dim))
        for i in range(self.n):
            marg[i * d + idx[i], np.arange(dim)] = 1.0
        self.lift = np.vstack([np.eye(dim), marg])
        self.signs = np.concatenate([np.ones(dim), -np.ones(self.n * d)])
        self.evaluations = 0

    def expand(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.groups].reshape(self.shape)

    def reduce(self, gamma: np.ndarray) -> np.ndarray:
        g = np.asarray(gamma, dtype=float).reshape(-1)
        x = np.zeros(self.n_vars)
        np.maximum.at(x, self.groups, g)
        return x

    def __call__(self, x: np.ndarray) -> float:
        self.evaluations += 1
        m = self.base + self.coef * np.asarray(x)[self.groups]
        total = m.sum()
        if total <= 0:
            return 0.0
        # M * TC(m / M) = sum_i Hu(m_i) - Hu(m), Hu(y) = -sum y log2(y / M)
        y = self.lift @ m
        keep = y > 1e-14 * total
        y = y[keep]
        return max(float(self.signs[keep] @ (y * np.log2(y / total))), 0.0)


@dataclass
class GammaMinimum:
    gamma: np.ndarray
    objective: float
    converged: bool
    closed_form_feasible: bool
    starts: int = 0
    evaluations: int = 0


def _coordinate_descent(f: _Objective, x0: np.ndarray) -> tuple[np.ndarray, float, bool]:
    x = np.clip(np.asarray(x0, dtype=float), 0.0, 1.0)
    fx = f(x)
    for _ in range(MAX_SWEEPS):
        before = fx
        for i in range(f.n_vars):
            def line(t, i=i):
                trial = x.copy()
                trial[i] = t
                return f(trial)

            res = minimize_scalar(line, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-10})
            best_t, best_f = x[i], fx
            for t, val in ((res.x, res.fun), (0.0, line(0.0)), (1.0, line(1.0))):
                if val < best_f:
                    best_t, best_f = t, val
            x[i], fx = best_t, best_f
        if before - fx < SWEEP_TOL:
            return x, fx, True
    return x, fx, False


def minimize_over_gamma(p_ent, p_sep, q_v: float, model: LeakageModel, tolerance: float = 1e-10,
                        seed: int = 0) -> GammaMinimum:
    """Eve's best mixing parameters for one input tuple.

    Multi-start projected coordinate descent from gamma = 0, gamma = 1, the
    clamped closed form and a few seeded random points.  A feasible closed form
    gives J = 0, which is the global minimum, so the search stops there.
    """
    ent = p_ent.probs if isinstance(p_ent, JointDistribution) else np.asarray(p_ent, dtype=float)
    sep = p_sep.probs if isinstance(p_sep, JointDistribution) else np.asarray(p_sep, dtype=float)
    closed, feasible = closed_form_gamma(ent, sep, q_v, model)
    f = _Objective(ent, sep, q_v, model)

    if q_v == 0 or model.L == 0:
        # gamma has no effect on the "?" class
        gamma = np.zeros_like(ent)
        return GammaMinimum(gamma, f(f.reduce(gamma)), True, feasible, 0, f.evaluations)

    clamped = np.clip(np.nan_to_num(closed, posinf=1.0), 0.0, 1.0)
    if feasible:
        x = f.reduce(clamped)
        return GammaMinimum(f.expand(x), f(x), True, True, 1, f.evaluations)

    rng = np.random.default_rng(seed)
    starts = [np.zeros(f.n_vars), np.ones(f.n_vars), f.reduce(clamped)]
    starts += [rng.random(f.n_vars) for _ in range(N_RANDOM_STARTS)]
    best_x, best_f, all_converged = None, math.inf, True
    for x0 in starts:
        x, fx, ok = _coordinate_descent(f, x0)
        all_converged &= ok
        if fx < best_f - tolerance or best_x is None:
            best_x, best_f = x, fx
    if not all_converged:
        warnings.warn("gamma minimisation hit the sweep cap; returning best point found", RuntimeWarning)
    return GammaMinimum(f.expand(best_x), best_f, all_converged, False, len(starts), f.evaluations)


def gamma_upper_bound(p_ent, p_sep, q_v: float, model: LeakageModel) -> float:
    """Cheap upper bound on Eve's minimum: best of gamma = 0, 1 and the clamped closed form."""
    ent, sep = np.asarray(p_ent, dtype=float), np.asarray(p_sep, dtype=float)
    f = _Objective(ent, sep, q_v, model)
    closed, _ = closed_form_gamma(ent, sep, q_v, model)
    clamped = np.clip(np.nan_to_num(closed, posinf=1.0), 0.0, 1.0)
    return min(f(np.zeros(f.n_vars)), f(np.ones(f.n_vars)), f(f.reduce(clamped)))


# --- settings spaces -------------------------------------------------------


@dataclass(frozen=True)
class SettingsSpace:
    """Family of honest-party measurement settings to maximise over.

    kind:
      ``computational``  every party measures in the computational basis;
      ``xz``             parties 1..N-1 fixed (Z unless overridden), last party xz:theta, theta in [0, pi];
      ``bloch``          parties 1..N-1 fixed, last party bloch:theta,phi over the sphere;
      ``list``           explicit settings, one descriptor per party per entry.
    """

    kind: str = "computational"
    theta_step: float = math.pi / 60
    phi_step: float = math.pi / 30
    refine: bool = True
    fixed: tuple[str, ...] = ()
    candidates: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if self.kind not in ("computational", "xz", "bloch", "list"):
            raise ValueError(f"unknown settings space {self.kind!r}")
        if self.kind == "list" and not self.candidates:
            raise ValueError("empty settings space")

    @classmethod
    def default_for(cls, d: int, n: int) -> SettingsSpace:
        return cls("xz") if d == 2 else cls("computational")

    def describe(self) -> str:
        if self.kind == "list":
            return f"list[{len(self.candidates)}]"
        extra = f" fixed={'/'.join(self.fixed)}" if self.fixed else ""
        return self.kind + extra


def _fixed_parties(space: SettingsSpace, d: int, n: int) -> list[ProjectiveMeasurement]:
    given = [parse_setting(s, d) for s in space.fixed]
    if len(given) > n - 1:
        raise ValueError(f"{len(given)} fixed settings given for {n - 1} fixed parties")
    return given + [computational_basis(d)] * (n - 1 - len(given))


def _golden_max(f, lo: float, hi: float, tol: float = 1e-7) -> tuple[float, float]:
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, e = b - invphi * (b - a), a + invphi * (b - a)
    fc, fe = f(c), f(e)
    while b - a > tol:
        if fc > fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = f(e)
    return (c, fc) if fc > fe else (e, fe)


@dataclass
class KeyRateBound:
    rate: float
    v: float
    d: int
    n_parties: int
    model: LeakageModel
    settings: tuple[str, ...] = ()
    gamma_star: np.ndarray | None = None
    objective_value: float = 0.0
    p_question: float = 0.0
    gamma_feasible: bool = True
    converged: bool = True
    convention: str = Convention.DERIVED.value
    notes: dict = field(default_factory=dict)

    @property
    def settings_descriptor(self) -> str:
        return "|".join(self.settings) if self.settings else "none"


class _Evaluator:
    def __init__(self, d: int, n: int, v: float, model: LeakageModel):
        self.d, self.n, self.v, self.model = d, n, v, model
        self.rho_ent = ghz_projector(d, n)
        self.rho_sep = sep_isotropic(d, n)
        self.q_v = mixing_weight_qv(d, n, v)
        self.results: dict[tuple[str, ...], tuple[float, GammaMinimum]] = {}
        self.pruned: dict[tuple[str, ...], float] = {}
        self.best = -math.inf

    def __call__(self, ms: list[ProjectiveMeasurement]) -> float:
        key = tuple(m.label for m in ms)
        if key in self.results:
            return self.results[key][0]
        if key in self.pruned:
            return self.pruned[key]
        p_ent = born_distribution(self.rho_ent, ms).probs
        p_sep = born_distribution(self.rho_sep, ms).probs
        # any J(gamma) bounds Eve's minimum from above; skip settings that cannot win
        bound = gamma_upper_bound(p_ent, p_sep, self.q_v, self.model)
        if bound <= self.best:
            self.pruned[key] = bound
            return bound
        res = minimize_over_gamma(p_ent, p_sep, self.q_v, self.model)
        self.results[key] = (res.objective, res)
        self.best = max(self.best, res.objective)
        return res.objective


def maximize_over_settings(d: int, n: int, v: float, model: LeakageModel,
                           settings_space: SettingsSpace | None = None) -> KeyRateBound:
    space = settings_space or SettingsSpace.default_for(d, n)
    if v <= separability_threshold(d, n):
        return KeyRateBound(0.0, v, d, n, model, notes={"reason": "separable", "info_measure": INFO_MEASURE})
    ev = _Evaluator(d, n, v, model)

    if space.kind == "computational":
        ev([computational_basis(d)] * n)
    elif space.kind == "list":
        for cand in space.candidates:
            if len(cand) != n:
                raise ValueError(f"settings entry {cand} does not list {n} parties")
            ev([parse_setting(s, d) for s in cand])
    else:
        if d != 2:
            raise ValueError(f"{space.kind} settings space is qubit-only")
        fixed = _fixed_parties(space, d, n)
        thetas = np.linspace(0.0, math.pi, int(round(math.pi / space.theta_step)) + 1)
        if space.kind == "xz":
            def f_theta(t):
                return ev(fixed + [xz_plane_measurement(float(t))])

            vals = [f_theta(t) for t in thetas]
            if space.refine:
                i = int(np.argmax(vals))
                _golden_max(f_theta, thetas[max(i - 1, 0)], thetas[min(i + 1, len(thetas) - 1)])
        else:
            phis = np.arange(0.0, 2 * math.pi - 1e-12, space.phi_step)

            def f_bloch(t, p):
                return ev(fixed + [qubit_bloch_measurement(float(t), float(p))])

            vals = np.array([[f_bloch(t, p) for p in phis] for t in thetas])
            if space.refine:
                i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
                t_best, _ = _golden_max(lambda t: f_bloch(t, phis[j]),
                                        thetas[max(i - 1, 0)], thetas[min(i + 1, len(thetas) - 1)])
                _golden_max(lambda p: f_bloch(t_best, p), phis[j] - space.phi_step, phis[j] + space.phi_step)

    key, (obj, res) = max(ev.results.items(), key=lambda kv: kv[1][0])
    ejd = eve_joint_distribution(
        born_distribution(ev.rho_ent, [parse_setting(s, d) for s in key]).probs,
        born_distribution(ev.rho_sep, [parse_setting(s, d) for s in key]).probs,
        ev.q_v, model, res.gamma,
    )
    rate = max(obj, 0.0) / (n - 1)
    return KeyRateBound(
        rate=rate, v=v, d=d, n_parties=n, model=model, settings=key,
        gamma_star=res.gamma, objective_value=obj,
        p_question=float(ejd.class_masses()[2]), gamma_feasible=res.closed_form_feasible,
        converged=res.converged,
        notes={"q_v": ev.q_v, "settings_evaluated": len(ev.results),
               "settings_pruned": len(ev.pruned), "space": space.describe(),
               "info_measure": INFO_MEASURE},
    )


def _threads() -> int:
    raw = os.environ.get("QKDBOUND_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"QKDBOUND_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"QKDBOUND_THREADS must be a positive integer, got {raw!r}")
    return n


def _curve_point(args):
    return maximize_over_settings(*args)


def rate_curve(d: int, n: int, model: LeakageModel, v_grid, settings_space: SettingsSpace | None = None,
               threads: int | None = None) -> list[KeyRateBound]:
    """One bound per visibility; results do not depend on the thread count."""
    grid = [float(v) for v in v_grid]
    if any(not 0 <= v <= 1 for v in grid):
        raise ValueError("visibilities must lie in [0, 1]")
    jobs = [(d, n, v, model, settings_space) for v in grid]
    workers = threads or _threads()
    if workers == 1 or len(jobs) < 2:
        return [_curve_point(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_curve_point, jobs))
