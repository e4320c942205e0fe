"""Optimal probabilistic separation of symmetric qubit states.

The map sends every ensemble member on the theta parallel to the
corresponding member on a theta' parallel closer to the equator
(theta <= theta' <= pi/4), strips the fiducial phase, and succeeds with
the maximal probability (sin(theta)/sin(theta'))^2.  It is realized by a
unitary coupling to a two-level ancilla followed by a projective ancilla
measurement; projecting onto |v> succeeds, onto |h> fails and leaves the
system in |0> regardless of the input.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from .states import PureQubit, SymmetricEnsemble

__all__ = [
    "SeparationMap",
    "CouplingUnitary",
    "SeparationOutcome",
    "separation_map",
    "success_probability",
    "coupling_unitary",
    "separate",
]

# Ancilla computational basis ordering: |h> = (1,0), |v> = (0,1).
# Joint basis ordering: {|0,h>, |0,v>, |1,h>, |1,v>};  |v> is the
# "success" port of the polarization splitter.
ANCILLA_H = np.array([1.0, 0.0])
ANCILLA_V = np.array([0.0, 1.0])


def _check_angle_pair(theta_in: float, theta_out: float) -> None:
    if not 0.0 <= theta_in <= math.pi / 4 + 1e-15:
        raise ValueError(f"theta_in={theta_in} outside [0, pi/4]")
    if not theta_in <= theta_out <= math.pi / 4 + 1e-15:
        raise ValueError(
            f"theta_out={theta_out} outside [theta_in={theta_in}, pi/4]; "
            "separation cannot decrease distinguishability"
        )
    if theta_in == 0.0 and theta_out > 0.0:
        raise ValueError("theta_in=0 gives a single repeated input; separating it is meaningless")


@dataclass(frozen=True)
class SeparationMap:
    """Parameters of one separation theta -> theta'.

    xi = tan(theta) * cot(theta') is the ancilla-rotation overlap with the
    success port, tau = sqrt(1 - xi^2) the leakage into the failure port.
    phi is the fiducial phase the map strips.
    """

    theta_in: float
    theta_out: float
    phi: float
    xi: float = field(init=False)
    tau: float = field(init=False)

    def __post_init__(self):
        _check_angle_pair(self.theta_in, self.theta_out)
        if not 0.0 <= self.phi < 2.0 * math.pi:
            raise ValueError(f"phi={self.phi} outside [0, 2*pi)")
        if self.theta_out == self.theta_in:
            xi = 1.0
        else:
            xi = math.tan(self.theta_in) / math.tan(self.theta_out)
        tau = math.sqrt(max(1.0 - xi * xi, 0.0))
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "tau", tau)


def separation_map(theta_in: float, theta_out: float, phi: float = 0.0) -> SeparationMap:
    return SeparationMap(theta_in=theta_in, theta_out=theta_out, phi=phi)


@dataclass(frozen=True)
class CouplingUnitary:
    """4x4 system-ancilla unitary in the {|0,h>, |0,v>, |1,h>, |1,v>} basis."""

    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=complex)
        if u.shape != (4, 4):
            raise ValueError(f"coupling unitary must be 4x4, got {u.shape}")
        if np.abs(u.conj().T @ u - np.eye(4)).max() > 1e-12:
            raise ValueError("matrix is not unitary within 1e-12")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)


@dataclass(frozen=True)
class SeparationOutcome:
    success_state: PureQubit
    failure_state: PureQubit
    p_success: float
    p_failure: float

    def __post_init__(self):
        if abs(self.p_success + self.p_failure - 1.0) > 1e-12:
            raise ValueError("branch probabilities must sum to 1")


def success_probability(theta: float, theta_out: float) -> float:
    """Maximal success probability (sin(theta)/sin(theta'))^2; 1 at theta'=theta."""
    _check_angle_pair(theta, theta_out)
    if theta_out == theta:
        return 1.0
    r = math.sin(theta) / math.sin(theta_out)
    return r * r


def coupling_unitary(sep: SeparationMap) -> CouplingUnitary:
    """System-controlled ancilla rotation implementing the separation.

    On the |0> system block the ancilla is rotated by
    e^{i*phi} [[xi, tau], [-tau, xi]]; on the |1> block it is untouched.
    """
    u = np.zeros((4, 4), dtype=complex)
    ph = cmath.exp(1j * sep.phi)
    u[0, 0] = ph * sep.xi
    u[0, 1] = ph * sep.tau
    u[1, 0] = -ph * sep.tau
    u[1, 1] = ph * sep.xi
    u[2, 2] = 1.0
    u[3, 3] = 1.0
    return CouplingUnitary(u)


def separate(state_index: int, ensemble: SymmetricEnsemble, sep: SeparationMap) -> SeparationOutcome:
    """Apply the map to ensemble member `state_index`.

    Computed through the coupling unitary and projective ancilla
    measurement, not from the closed forms, so the closed forms can be
    asserted against it.  The ensemble must carry the angles the map was
    built for.
    """
    if not 0 <= state_index < ensemble.n:
        raise ValueError(f"state index {state_index} out of range [0, {ensemble.n})")
    if abs(ensemble.theta - sep.theta_in) > 1e-12:
        raise ValueError(
            f"map expects input angle {sep.theta_in}, ensemble has {ensemble.theta}"
        )
    if abs(ensemble.phi - sep.phi) > 1e-12:
        raise ValueError(f"map strips phase {sep.phi}, ensemble carries {ensemble.phi}")

    joint_in = np.kron(ensemble.state(state_index).vector, ANCILLA_V)
    joint_out = coupling_unitary(sep).u @ joint_in

    # ancilla |v> component -> success, |h> component -> failure
    amp_v = joint_out[1::2]
    amp_h = joint_out[0::2]
    p_success = float(np.vdot(amp_v, amp_v).real)
    p_failure = float(np.vdot(amp_h, amp_h).real)

    success_state = PureQubit.from_vector(amp_v / math.sqrt(p_success))
    # Failure output is |0> for every input (amp_h has no |1> component).
    if abs(amp_h[1]) > 1e-12:
        raise AssertionError("failure branch leaked outside |0>")
    failure_state = PureQubit(1.0, 0.0)
    return SeparationOutcome(
        success_state=success_state,
        failure_state=failure_state,
        p_success=p_success,
        p_failure=p_failure,
    )
