"""Dense complex linear algebra for isotropic states on d^N-dimensional spaces.

Composite basis index is row-major: a_1 * d^(N-1) + ... + a_N.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

TOL = 1e-9


def tensor_product(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product of one or more square matrices, left to right."""
    if not mats:
        raise ValueError("tensor_product needs at least one matrix")
    return reduce(np.kron, (np.asarray(m, dtype=complex) for m in mats))


@dataclass(frozen=True)
class QuantumState:
    """Density operator on N parties of local dimension d."""

    matrix: np.ndarray
    d: int
    n_parties: int

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        dim = self.d ** self.n_parties
        if self.d < 2 or self.n_parties < 2:
            raise ValueError(f"need d >= 2 and N >= 2, got d={self.d}, N={self.n_parties}")
        if m.shape != (dim, dim):
            raise ValueError(f"matrix shape {m.shape} does not match d^N = {dim}")
        if np.max(np.abs(m - m.conj().T)) > TOL:
            raise ValueError("state is not Hermitian")
        if abs(np.trace(m) - 1) > TOL:
            raise ValueError(f"trace {np.trace(m).real:.12g} != 1")
        if np.linalg.eigvalsh(m).min() < -TOL:
            raise ValueError("state is not positive semidefinite")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _check_dims(d: int, n: int) -> None:
    if int(d) != d or int(n) != n or d < 2 or n < 2:
        raise ValueError(f"need integers d >= 2 and N >= 2, got d={d}, N={n}")


def ghz_vector(d: int, n: int) -> np.ndarray:
    _check_dims(d, n)
    dim = d**n
    repunit = sum(d**k for k in range(n))
    psi = np.zeros(dim, dtype=complex)
    psi[np.arange(d) * repunit] = 1 / np.sqrt(d)
    return psi


def ghz_projector(d: int, n: int) -> QuantumState:
    psi = ghz_vector(d, n)
    return QuantumState(np.outer(psi, psi.conj()), d, n)


def isotropic_state(d: int, n: int, v: float) -> QuantumState:
    """v * |GHZ><GHZ| + (1 - v) * I / d^N."""
    if not 0 <= v <= 1:
        raise ValueError(f"visibility must lie in [0, 1], got {v}")
    ghz = ghz_projector(d, n).matrix
    dim = d**n
    return QuantumState(v * ghz + (1 - v) * np.eye(dim) / dim, d, n)


def sep_isotropic(d: int, n: int) -> QuantumState:
    """The isotropic state on the full-separability boundary, (|GHZ><GHZ| + I/d) / (1 + d^(N-1))."""
    ghz = ghz_projector(d, n).matrix
    k = d ** (n - 1)
    return QuantumState((ghz + np.eye(d**n) / d) / (1 + k), d, n)
