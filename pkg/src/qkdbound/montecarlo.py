"""Round-by-round sampling of the flagged convex-combination attack.

Used to cross-check the tabulated Eve distribution and the objective.  Rounds
are generated in fixed-size chunks; chunk ``c`` draws from a Philox stream
whose counter starts at ``c * 2**128``, so every aggregate depends only on
(seed, rounds) and not on the order chunks are produced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attack import (
    CLASS_NAMES,
    LEAKED,
    QUESTION,
    SEP_FLAG,
    LeakageKind,
    LeakageModel,
    eve_joint_distribution,
    gamma_table,
    mixing_weight_qv,
    separability_threshold,
)
from .distributions import born_distribution, total_correlation
from .measurements import ProjectiveMeasurement, computational_basis, parse_setting
from .quantum import ghz_projector, sep_isotropic

CHUNK = 1 << 16


@dataclass
class SimulationReport:
    rounds: int
    seed: int
    d: int
    n_parties: int
    v: float
    model: LeakageModel
    counts: np.ndarray  # (3, d**N) counts per (class, outcome tuple)
    analytic: np.ndarray  # same layout, from the tabulated distribution
    leak_events: int = 0  # rounds with a leakage event, before any gamma relabelling

    @property
    def table(self) -> np.ndarray:
        return self.counts / self.rounds

    @property
    def class_masses(self) -> np.ndarray:
        return self.counts.sum(axis=1) / self.rounds

    @property
    def leaked_fraction(self) -> float:
        """Share of rounds in which an outcome leaked, whatever class Eve later filed it under.

        Gamma relabelling moves leaked separable rounds into '?', so this is
        generally larger than ``class_masses[LEAKED]``.
        """
        return self.leak_events / self.rounds

    @property
    def question_conditional(self) -> np.ndarray:
        q = self.counts[QUESTION]
        total = q.sum()
        return q / total if total else np.full(q.shape, np.nan)

    def analytic_conditional(self) -> np.ndarray:
        q = self.analytic[QUESTION]
        return q / q.sum()

    @property
    def max_table_deviation(self) -> float:
        return float(np.abs(self.table - self.analytic).max())

    @property
    def max_conditional_deviation(self) -> float:
        return float(np.abs(self.question_conditional - self.analytic_conditional()).max())

    def to_dict(self) -> dict:
        outcomes = ["".join(map(str, np.unravel_index(i, (self.d,) * self.n_parties)))
                    for i in range(self.d**self.n_parties)]
        return {
            "rounds": self.rounds,
            "seed": self.seed,
            "d": self.d,
            "N": self.n_parties,
            "v": self.v,
            "model": self.model.kind.value,
            "L": self.model.L,
            "outcomes": outcomes,
            "class_masses": dict(zip(CLASS_NAMES, self.class_masses.tolist())),
            "analytic_class_masses": dict(zip(CLASS_NAMES, self.analytic.sum(axis=1).tolist())),
            "leaked_fraction": self.leaked_fraction,
            "leaked_class_mass": float(self.class_masses[LEAKED]),
            "question_conditional": self.question_conditional.tolist(),
            "analytic_question_conditional": self.analytic_conditional().tolist(),
            "max_table_deviation": self.max_table_deviation,
            "max_conditional_deviation": self.max_conditional_deviation,
            "empirical_objective": empirical_objective(self) if self.counts[QUESTION].sum() else None,
            "counts": {name: self.counts[c].tolist() for c, name in enumerate(CLASS_NAMES)},
        }


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, chunk, 0]))


def _simulate_chunk(seed, chunk, size, q_v, cdf_sep, cdf_ent, gamma, model):
    rng = _chunk_rng(seed, chunk)
    u = rng.random((4, size))
    sep = u[0] < q_v
    outcome = np.where(sep, np.searchsorted(cdf_sep, u[1], side="right"),
                       np.searchsorted(cdf_ent, u[1], side="right"))
    outcome = np.minimum(outcome, len(cdf_sep) - 1)
    leak = u[2] < model.L
    if model.kind is LeakageKind.JUNK:
        leak &= sep
    relabel = u[3] < gamma[outcome]
    cls = np.full(size, QUESTION)
    cls[sep & ~leak] = SEP_FLAG
    cls[leak & ~(sep & relabel)] = LEAKED
    dim = len(cdf_sep)
    counts = np.bincount(cls * dim + outcome, minlength=3 * dim).reshape(3, dim)
    return counts, int(leak.sum())


def simulate_rounds(d: int, n: int, v: float, model: LeakageModel, gamma=None, settings=None,
                    rounds: int = 1_000_000, seed: int = 0) -> SimulationReport:
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if not separability_threshold(d, n) <= v <= 1:
        raise ValueError(f"v={v} must lie in [{separability_threshold(d, n):.6g}, 1]")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ms = [computational_basis(d)] * n if settings is None else [
        s if isinstance(s, ProjectiveMeasurement) else parse_setting(s, d) for s in settings
    ]
    q_v = mixing_weight_qv(d, n, v)
    p_ent = born_distribution(ghz_projector(d, n), ms).probs
    p_sep = born_distribution(sep_isotropic(d, n), ms).probs
    g = gamma_table(gamma, p_ent.shape)
    analytic = eve_joint_distribution(p_ent, p_sep, q_v, model, g).table.reshape(3, -1)
    g = g.reshape(-1)

    cdf_sep, cdf_ent = np.cumsum(p_sep.reshape(-1)), np.cumsum(p_ent.reshape(-1))
    cdf_sep[-1] = cdf_ent[-1] = 1.0
    counts = np.zeros((3, d**n), dtype=np.int64)
    leaks = 0
    for chunk, start in enumerate(range(0, rounds, CHUNK)):
        size = min(CHUNK, rounds - start)
        c, k = _simulate_chunk(seed, chunk, size, q_v, cdf_sep, cdf_ent, g, model)
        counts += c
        leaks += k
    return SimulationReport(rounds, seed, d, n, v, model, counts, analytic, leaks)


def empirical_objective(report: SimulationReport) -> float:
    """Plug-in estimate of p(?) * TC(p(. | ?)) from the counts; product flags contribute nothing."""
    q = report.counts[QUESTION]
    if q.sum() == 0:
        raise ValueError("no rounds landed in the '?' class")
    cond = (q / q.sum()).reshape((report.d,) * report.n_parties)
    return float(report.class_masses[QUESTION] * total_correlation(cond))
