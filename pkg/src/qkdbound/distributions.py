"""Born-rule outcome tables and classical information measures (bits)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measurements import ProjectiveMeasurement
from .quantum import QuantumState

ZERO_CUTOFF = 1e-14


@dataclass(frozen=True)
class JointDistribution:
    """p(a_1, ..., a_N | x) stored as an array of shape (d,) * N."""

    probs: np.ndarray
    inputs: tuple[int, ...] | None = None

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim < 2 or len(set(p.shape)) != 1:
            raise ValueError(f"expected a (d,)*N table, got shape {p.shape}")
        if p.min() < -1e-12:
            raise ValueError(f"negative probability {p.min():.3g}")
        if abs(p.sum() - 1) > 1e-9:
            raise ValueError(f"probabilities sum to {p.sum():.12g}")
        p = np.clip(p, 0.0, None)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def d(self) -> int:
        return self.probs.shape[0]

    @property
    def n_parties(self) -> int:
        return self.probs.ndim

    def flat(self) -> np.ndarray:
        return self.probs.reshape(-1)

    def marginal(self, parties) -> np.ndarray:
        keep = set(parties)
        drop = tuple(i for i in range(self.n_parties) if i not in keep)
        return self.probs.sum(axis=drop)


def born_distribution(state: QuantumState, measurements, inputs=None) -> JointDistribution:
    """Tr[(P_a1 x ... x P_aN) rho] for every outcome tuple."""
    ms: tuple[ProjectiveMeasurement, ...] = tuple(measurements)
    if len(ms) != state.n_parties or any(m.d != state.d for m in ms):
        raise ValueError(
            f"measurements ({len(ms)} parties, dims {[m.d for m in ms]}) do not match "
            f"state (N={state.n_parties}, d={state.d})"
        )
    d, n = state.d, state.n_parties
    # Tr(P rho) = sum_{i,j} P[i, j] rho[j, i], with P = kron of the local projectors
    letters = "abcdefghijklmnopqrstuvwxyz"
    outs, rows, cols = letters[:n], letters[n : 2 * n], letters[2 * n : 3 * n]
    spec = ",".join(f"{outs[k]}{rows[k]}{cols[k]}" for k in range(n))
    spec += f",{cols}{rows}->{outs}"
    ops = [np.stack(m.projectors) for m in ms]
    p = np.einsum(spec, *ops, state.matrix.reshape((d,) * (2 * n)), optimize=True)
    if np.max(np.abs(p.imag)) > 1e-10:
        raise ArithmeticError(f"Born probability has imaginary part {np.max(np.abs(p.imag)):.3g}")
    p = p.real.copy()
    p[np.abs(p) < 1e-15] = 0.0
    p = np.clip(p, 0.0, None)
    p /= p.sum()
    return JointDistribution(p, None if inputs is None else tuple(inputs))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    p = p[p > ZERO_CUTOFF]
    return float(-(p * np.log2(p)).sum())


def total_correlation(p) -> float:
    """sum_i H(A_i) - H(A_1 ... A_N); the mutual information for two parties."""
    table = p.probs if isinstance(p, JointDistribution) else np.asarray(p, dtype=float)
    n = table.ndim
    marginals = 0.0
    for i in range(n):
        marginals += shannon_entropy(table.sum(axis=tuple(j for j in range(n) if j != i)))
    return marginals - shannon_entropy(table)
