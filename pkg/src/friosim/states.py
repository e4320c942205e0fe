"""Qubit pure/mixed states, symmetric ensembles, and Bloch-sphere mapping.

A symmetric ensemble is a family of N equiprobable pure states generated
from a fiducial state by powers of the diagonal unitary diag(1, w) with
w = exp(2*pi*i/N).  All angles are radians; CLI layers convert degrees at
the boundary.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MAX_STATES",
    "PureQubit",
    "QubitDensity",
    "SymmetricEnsemble",
    "BlochPoint",
    "fiducial_state",
    "symmetric_ensemble",
    "uniform_states",
    "to_density",
    "overlap",
    "bloch",
    "density_from_bloch",
]

# Public API keeps ensembles desk-scale; detector grids and oracle searches
# stay tractable below this.
MAX_STATES = 64

_NORM_TOL = 1e-12

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def _check_count(n: int) -> None:
    if not isinstance(n, (int, np.integer)):
        raise ValueError(f"state count must be an integer, got {n!r}")
    if n < 2:
        raise ValueError(f"need at least 2 states, got n={n}")
    if n > MAX_STATES:
        raise ValueError(f"n={n} exceeds the supported maximum of {MAX_STATES}")


@dataclass(frozen=True)
class PureQubit:
    """Normalized qubit state amp0|0> + amp1|1>.

    The global phase is fixed at construction so that amp0 is real and
    non-negative (amp1 real non-negative if amp0 vanishes), which makes
    equality testing and phase extraction deterministic.
    """

    amp0: complex
    amp1: complex

    def __post_init__(self):
        a0 = complex(self.amp0)
        a1 = complex(self.amp1)
        norm = abs(a0) ** 2 + abs(a1) ** 2
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"amplitudes not normalized: |amp0|^2+|amp1|^2 = {norm}")
        scale = 1.0 / math.sqrt(norm)
        ref = a0 if abs(a0) > _NORM_TOL else a1
        phase = cmath.exp(-1j * cmath.phase(ref))
        object.__setattr__(self, "amp0", a0 * scale * phase)
        object.__setattr__(self, "amp1", a1 * scale * phase)

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp0, self.amp1], dtype=complex)

    def isclose(self, other: "PureQubit", tol: float = 1e-12) -> bool:
        return (abs(self.amp0 - other.amp0) <= tol
                and abs(self.amp1 - other.amp1) <= tol)

    @staticmethod
    def from_vector(v: np.ndarray) -> "PureQubit":
        v = np.asarray(v, dtype=complex).reshape(2)
        return PureQubit(v[0], v[1])


@dataclass(frozen=True)
class QubitDensity:
    """2x2 Hermitian, unit-trace, positive-semidefinite matrix."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"density matrix must be 2x2, got shape {m.shape}")
        if np.abs(m - m.conj().T).max() > 1e-12:
            raise ValueError("density matrix is not Hermitian within 1e-12")
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-12:
            raise ValueError(f"density matrix trace is {tr}, expected 1")
        eigs = np.linalg.eigvalsh(m)
        if eigs.min() < -1e-10:
            raise ValueError(f"density matrix has negative eigenvalue {eigs.min()}")
        m.setflags(write=False)
        object.__setattr__(self, "m", m)

    def purity(self) -> float:
        return float(np.trace(self.m @ self.m).real)


@dataclass(frozen=True)
class BlochPoint:
    """Cartesian Bloch-sphere coordinates; radius <= 1 within tolerance."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if self.radius > 1.0 + 1e-10:
            raise ValueError(f"Bloch radius {self.radius} exceeds 1")

    @property
    def radius(self) -> float:
        return math.sqrt(self.x ** 2 + self.y ** 2 + self.z ** 2)


@dataclass(frozen=True)
class SymmetricEnsemble:
    """N equiprobable symmetric states on a common Bloch parallel.

    State j is diag(1, w)^j applied to the fiducial state, i.e. it carries
    the extra phase w^j = exp(2*pi*i*j/n) on the |1> amplitude.  Priors are
    uniform (1/n) by construction.
    """

    n: int
    theta: float
    phi: float
    states: tuple[PureQubit, ...] = field(init=False)

    def __post_init__(self):
        _check_count(self.n)
        _check_fiducial_angles(self.theta, self.phi)
        states = tuple(
            PureQubit(
                math.cos(self.theta),
                cmath.exp(1j * (self.phi + 2.0 * math.pi * j / self.n)) * math.sin(self.theta),
            )
            for j in range(self.n)
        )
        object.__setattr__(self, "states", states)

    @property
    def omega(self) -> complex:
        return cmath.exp(2j * math.pi / self.n)

    @property
    def prior(self) -> float:
        return 1.0 / self.n

    def state(self, j: int) -> PureQubit:
        if not 0 <= j < self.n:
            raise ValueError(f"state index {j} out of range [0, {self.n})")
        return self.states[j]


def _check_fiducial_angles(theta: float, phi: float) -> None:
    if not 0.0 <= theta <= math.pi / 4 + 1e-15:
        raise ValueError(f"theta={theta} outside [0, pi/4]")
    if not 0.0 <= phi < 2.0 * math.pi:
        raise ValueError(f"phi={phi} outside [0, 2*pi)")


def fiducial_state(theta: float, phi: float) -> PureQubit:
    """cos(theta)|0> + e^{i*phi} sin(theta)|1>, with theta in [0, pi/4]."""
    _check_fiducial_angles(theta, phi)
    return PureQubit(math.cos(theta), cmath.exp(1j * phi) * math.sin(theta))


def symmetric_ensemble(n: int, theta: float, phi: float = 0.0) -> SymmetricEnsemble:
    """Build the n-state symmetric ensemble with fiducial angles (theta, phi)."""
    return SymmetricEnsemble(n=n, theta=theta, phi=phi)


def uniform_states(n: int) -> list[PureQubit]:
    """Maximally distinguishable symmetric states (|0> + w^j |1>)/sqrt(2)."""
    _check_count(n)
    s = 1.0 / math.sqrt(2.0)
    return [
        PureQubit(s, s * cmath.exp(2j * math.pi * j / n))
        for j in range(n)
    ]


def to_density(s: PureQubit) -> QubitDensity:
    v = s.vector
    return QubitDensity(np.outer(v, v.conj()))


def overlap(a: PureQubit, b: PureQubit) -> complex:
    """Inner product <a|b>."""
    return complex(np.vdot(a.vector, b.vector))


def bloch(rho: QubitDensity) -> BlochPoint:
    """Pauli expectation values of a density matrix."""
    m = rho.m
    return BlochPoint(
        x=float(np.trace(m @ PAULI_X).real),
        y=float(np.trace(m @ PAULI_Y).real),
        z=float(np.trace(m @ PAULI_Z).real),
    )


def density_from_bloch(p: BlochPoint) -> QubitDensity:
    """Inverse of :func:`bloch`; valid for radius <= 1."""
    m = 0.5 * (np.eye(2, dtype=complex) + p.x * PAULI_X + p.y * PAULI_Y + p.z * PAULI_Z)
    return QubitDensity(m)
