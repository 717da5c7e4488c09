"""Convex-combination attack with classical leakage of measurement outcomes.

Eve sources the isotropic state as a flagged mixture

    rho_v = q_v * rho_sep + (1 - q_v) * |GHZ><GHZ|

and records one of three classes per round:

* ``SEP_FLAG``: a product-state flag (all product flags are merged; they carry no key),
* ``LEAKED``: the full outcome tuple leaked through the side channel,
* ``QUESTION``: the "?" flag, which is the only class that can carry key.

A fraction ``gamma[a]`` of leaked separable rounds with outcome ``a`` is
relabelled as "?" to flatten p(a | ?).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .distributions import JointDistribution

SEP_FLAG, LEAKED, QUESTION = 0, 1, 2
CLASS_NAMES = ("sep_flag", "leaked", "question")


class LeakageKind(str, Enum):
    UNIFORM = "uniform"
    JUNK = "junk"


class Convention(str, Enum):
    """Which uniform-leakage zero-key threshold to use.

    STATED is 1/(1+K) + KL/((1+K)(1-L)+L); DERIVED follows the
    feasibility bound on q_v through q_v = (1+K)(1-v)/K.  They coincide for
    junk-only leakage and for L = 0.
    """

    STATED = "stated"
    DERIVED = "derived"


class SeparableStateError(ValueError):
    """Raised when the visibility is at or below full separability."""


class DegenerateClassError(ArithmeticError):
    """The "?" class has zero probability."""


@dataclass(frozen=True)
class LeakageModel:
    kind: LeakageKind
    L: float

    def __post_init__(self):
        object.__setattr__(self, "kind", LeakageKind(self.kind))
        if not 0 <= self.L <= 1:
            raise ValueError(f"leakage probability must lie in [0, 1], got {self.L}")

    @classmethod
    def uniform(cls, L: float) -> LeakageModel:
        return cls(LeakageKind.UNIFORM, L)

    @classmethod
    def junk(cls, L: float) -> LeakageModel:
        return cls(LeakageKind.JUNK, L)

    def ent_question_weight(self, q_v: float) -> float:
        """Mass of entangled rounds landing in "?" (before any relabelling)."""
        if self.kind is LeakageKind.UNIFORM:
            return (1 - q_v) * (1 - self.L)
        return 1 - q_v


def separability_threshold(d: int, n: int) -> float:
    return 1.0 / (1.0 + d ** (n - 1))


def mixing_weight_qv(d: int, n: int, v: float) -> float:
    """Weight of the separable component in Eve's decomposition of rho_v."""
    k = d ** (n - 1)
    if v > 1 or v < separability_threshold(d, n) - 1e-15:
        raise SeparableStateError(
            f"v={v} is outside [{separability_threshold(d, n):.6g}, 1]; the state is fully separable"
        )
    return min(1.0, max(0.0, (1 + k) * (1 - v) / k))


def zero_key_threshold(d: int, n: int, model: LeakageModel, convention=Convention.DERIVED) -> float:
    """Visibility at or below which the attack drives the key rate to zero."""
    k = d ** (n - 1)
    L = model.L
    if model.kind is LeakageKind.JUNK:
        return (1 + L) / (1 + k + L)
    denom = (1 + k) * (1 - L) + L
    if Convention(convention) is Convention.STATED:
        return 1 / (1 + k) + k * L / denom
    return 1 / denom


@dataclass(frozen=True)
class EveJointDistribution:
    """p(a, e) for one input tuple; ``table[c]`` has shape (d,)*N for class c."""

    table: np.ndarray
    q_v: float
    model: LeakageModel

    @property
    def d(self) -> int:
        return self.table.shape[1]

    @property
    def n_parties(self) -> int:
        return self.table.ndim - 1

    def class_masses(self) -> np.ndarray:
        return self.table.reshape(3, -1).sum(axis=1)

    def outcome_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


def _as_table(p) -> np.ndarray:
    return p.probs if isinstance(p, JointDistribution) else np.asarray(p, dtype=float)


def gamma_table(gamma, shape) -> np.ndarray:
    """Mixing parameters as a (d,)*N table; accepts None, a scalar, a flat or a shaped array."""
    if gamma is None:
        return np.zeros(shape)
    g = np.asarray(gamma, dtype=float)
    if g.size == np.prod(shape) and g.shape != shape:
        g = g.reshape(shape)
    return np.broadcast_to(g, shape)


def eve_joint_distribution(p_ent, p_sep, q_v: float, model: LeakageModel, gamma=None) -> EveJointDistribution:
    ent, sep = _as_table(p_ent), _as_table(p_sep)
    if ent.shape != sep.shape:
        raise ValueError(f"p_ent shape {ent.shape} != p_sep shape {sep.shape}")
    if not 0 <= q_v <= 1:
        raise ValueError(f"q_v must lie in [0, 1], got {q_v}")
    g = gamma_table(gamma, ent.shape)
    if g.min() < 0 or g.max() > 1:
        raise ValueError("mixing parameters must lie in [0, 1]")
    L = model.L
    table = np.empty((3,) + ent.shape)
    table[SEP_FLAG] = q_v * (1 - L) * sep
    table[LEAKED] = q_v * L * (1 - g) * sep
    table[QUESTION] = q_v * L * g * sep + model.ent_question_weight(q_v) * ent
    if model.kind is LeakageKind.UNIFORM:
        table[LEAKED] += (1 - q_v) * L * ent
    return EveJointDistribution(table, q_v, model)


def question_conditional(ejd: EveJointDistribution) -> tuple[float, JointDistribution]:
    """Bayes rule: p(a | ?) = p(a, ?) / p(?)."""
    joint = ejd.table[QUESTION]
    p_q = float(joint.sum())
    if p_q <= 0:
        raise DegenerateClassError("p(?) = 0; the conditional is undefined")
    return p_q, JointDistribution(joint / p_q)


def closed_form_gamma(p_ent, p_sep, q_v: float, model: LeakageModel) -> tuple[np.ndarray, bool]:
    """Mixing parameters that make p(a | ?) flat, and whether they all lie in [0, 1].

    Entries may exceed 1; the flag reports it.  When q_v * L = 0 no relabelling
    is possible, and the result is feasible only if p_ent is already flat.
    """
    ent, sep = _as_table(p_ent), _as_table(p_sep)
    gap = ent.max() - ent
    if q_v * model.L == 0:
        flat = bool(np.all(gap <= 1e-12))
        return np.where(gap <= 1e-12, 0.0, np.inf), flat
    gamma = model.ent_question_weight(q_v) * gap / (q_v * model.L * sep)
    return gamma, bool(np.all(gamma <= 1 + 1e-12))
