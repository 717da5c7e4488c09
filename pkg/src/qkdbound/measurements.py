"""Rank-1 projective measurements and their text descriptors.

Descriptors accepted by :func:`parse_setting`::

    zbasis
    bloch:<theta>,<phi>
    xz:<theta>
    unitary:<d*d complex entries, row-major, e.g. 1+0j,0+0j,...>

The columns of a unitary define the measurement basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

TOL = 1e-9


@dataclass(frozen=True)
class ProjectiveMeasurement:
    projectors: tuple[np.ndarray, ...]
    label: str = ""

    def __post_init__(self):
        ps = tuple(np.array(p, dtype=complex) for p in self.projectors)
        for p in ps:
            p.setflags(write=False)
        object.__setattr__(self, "projectors", ps)
        d = len(ps)
        if d < 2:
            raise ValueError("a measurement needs at least two outcomes")
        for i, p in enumerate(ps):
            if p.shape != (d, d):
                raise ValueError(f"projector {i} has shape {p.shape}, expected ({d}, {d})")
            if np.max(np.abs(p - p.conj().T)) > TOL or np.max(np.abs(p @ p - p)) > TOL:
                raise ValueError(f"outcome {i} is not an orthogonal projector")
            for j in range(i):
                if np.max(np.abs(p @ ps[j])) > TOL:
                    raise ValueError(f"outcomes {j} and {i} are not orthogonal")
        if np.max(np.abs(sum(ps) - np.eye(d))) > TOL:
            raise ValueError("outcomes do not sum to the identity")

    @property
    def d(self) -> int:
        return len(self.projectors)


@dataclass(frozen=True)
class MeasurementSet:
    """Measurements indexed by party, then by input."""

    parties: tuple[tuple[ProjectiveMeasurement, ...], ...]
    d: int = field(init=False)

    def __post_init__(self):
        parties = tuple(tuple(ms) for ms in self.parties)
        object.__setattr__(self, "parties", parties)
        if len(parties) < 2:
            raise ValueError("need at least two parties")
        dims = {m.d for ms in parties for m in ms}
        if any(not ms for ms in parties) or len(dims) != 1:
            raise ValueError("every party needs at least one measurement, all on the same local dimension")
        object.__setattr__(self, "d", dims.pop())

    @property
    def n_parties(self) -> int:
        return len(self.parties)

    def select(self, inputs: tuple[int, ...]) -> tuple[ProjectiveMeasurement, ...]:
        return tuple(ms[x] for ms, x in zip(self.parties, inputs, strict=True))


def from_basis(columns: np.ndarray, label: str = "") -> ProjectiveMeasurement:
    """Projectors onto the columns of a unitary matrix."""
    u = np.asarray(columns, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("basis must be a square matrix")
    if np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) > 1e-8:
        raise ValueError("basis matrix is not unitary")
    return ProjectiveMeasurement(tuple(np.outer(c, c.conj()) for c in u.T), label)


def qubit_bloch_measurement(theta: float, phi: float) -> ProjectiveMeasurement:
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    ph = complex(math.cos(phi), math.sin(phi))
    u = np.array([[c, -s * ph.conjugate()], [s * ph, c]], dtype=complex)
    return from_basis(u, f"bloch:{theta!r},{phi!r}")


def xz_plane_measurement(theta: float) -> ProjectiveMeasurement:
    m = qubit_bloch_measurement(theta, 0.0)
    return ProjectiveMeasurement(m.projectors, f"xz:{theta!r}")


def computational_basis(d: int) -> ProjectiveMeasurement:
    if int(d) != d or d < 2:
        raise ValueError(f"need d >= 2, got {d}")
    return ProjectiveMeasurement(tuple(np.diag(np.eye(d)[i]) for i in range(d)), "zbasis")


def parse_setting(text: str, d: int) -> ProjectiveMeasurement:
    """Build a measurement from a descriptor string (see module docstring)."""
    text = text.strip()
    kind, _, args = text.partition(":")
    kind = kind.lower()
    if kind == "zbasis" and not args:
        return computational_basis(d)
    if kind in ("bloch", "xz") and d != 2:
        raise ValueError(f"{kind} settings are qubit-only, got d={d}")
    if kind == "bloch":
        parts = args.split(",")
        if len(parts) != 2:
            raise ValueError(f"bloch setting needs theta,phi: {text!r}")
        return qubit_bloch_measurement(float(parts[0]), float(parts[1]))
    if kind == "xz":
        return xz_plane_measurement(float(args))
    if kind == "unitary":
        entries = [complex(e.strip().replace(" ", "")) for e in args.split(",")]
        if len(entries) != d * d:
            raise ValueError(f"unitary setting needs {d * d} entries, got {len(entries)}")
        m = from_basis(np.array(entries).reshape(d, d))
        return ProjectiveMeasurement(m.projectors, text)
    raise ValueError(f"unknown measurement setting {text!r}")
