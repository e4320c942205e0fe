"""Gray-level calibration of the programmable modulator and its non-idealities.

The modulator implements the ancilla rotation for state separation as a
function of an 8-bit gray level.  Its calibration is summarized by three
curves: the projection probability P_v(gl) of the rotated ancilla onto the
success polarization, the phase shift phi(gl) imprinted on the controlled
path mode, and a depolarization fraction eps(gl).  The separation angle
reachable at a gray level follows from P_v via

    theta'(gl) = arctan( tan(theta) / sqrt(P_v(gl)) ).

The default table interpolates piecewise-linearly between seven measured
anchor gray levels; between anchors the interpolation choice is ours.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .separation import SeparationMap, coupling_unitary
from .states import QubitDensity, SymmetricEnsemble

__all__ = [
    "CalibrationTable",
    "NoiseModel",
    "theta_from_gray",
    "gray_from_theta",
    "depolarized_ancilla",
    "noisy_separation",
    "branch_state",
]

_DATA_FILE = Path(__file__).parent / "data" / "slm_calibration_default.csv"
_TABLE_HEADER = ["gl", "p_v", "phase_rad", "epsilon"]
_MAX_CROSSTALK = 0.05

_PAULI = (
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)

_default_table = None


@dataclass(frozen=True)
class CalibrationTable:
    """Measured modulator response at increasing gray levels.

    P_v must be non-increasing in gl (the calibration constrains the
    success-port intensity to decrease monotonically with gray level).
    Queries interpolate linearly between rows.
    """

    gl: np.ndarray
    p_v: np.ndarray
    phase: np.ndarray
    epsilon: np.ndarray

    def __post_init__(self):
        gl = np.asarray(self.gl, dtype=float)
        p_v = np.asarray(self.p_v, dtype=float)
        phase = np.asarray(self.phase, dtype=float)
        eps = np.asarray(self.epsilon, dtype=float)
        if not (gl.shape == p_v.shape == phase.shape == eps.shape) or gl.ndim != 1:
            raise ValueError("all calibration columns must be 1-d and equally long")
        if gl.size < 2:
            raise ValueError("calibration table needs at least two rows")
        if np.any(np.diff(gl) <= 0):
            raise ValueError("gray levels must be strictly increasing")
        if gl.min() < 0 or gl.max() > 255:
            raise ValueError("gray levels must lie in [0, 255]")
        if np.any(np.diff(p_v) > 1e-12):
            raise ValueError("P_v must be monotone non-increasing in gray level")
        if p_v.min() < 0 or p_v.max() > 1:
            raise ValueError("P_v values must lie in [0, 1]")
        if eps.min() < 0 or eps.max() > 1:
            raise ValueError("epsilon values must lie in [0, 1]")
        for a in (gl, p_v, phase, eps):
            a.setflags(write=False)
        object.__setattr__(self, "gl", gl)
        object.__setattr__(self, "p_v", p_v)
        object.__setattr__(self, "phase", phase)
        object.__setattr__(self, "epsilon", eps)

    def _check_range(self, gl: float) -> float:
        g = float(gl)
        if g < self.gl[0] or g > self.gl[-1]:
            raise ValueError(f"gray level {g} outside table range [{self.gl[0]}, {self.gl[-1]}]")
        return g

    def p_v_at(self, gl: float) -> float:
        return float(np.interp(self._check_range(gl), self.gl, self.p_v))

    def phase_at(self, gl: float) -> float:
        return float(np.interp(self._check_range(gl), self.gl, self.phase))

    def epsilon_at(self, gl: float) -> float:
        return float(np.interp(self._check_range(gl), self.gl, self.epsilon))

    @classmethod
    def from_csv(cls, path) -> "CalibrationTable":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != _TABLE_HEADER:
                raise ValueError(f"unexpected calibration CSV header {header}")
            rows = [[float(v) for v in row] for row in reader if row]
        data = np.array(rows)
        return cls(gl=data[:, 0], p_v=data[:, 1], phase=data[:, 2], epsilon=data[:, 3])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_TABLE_HEADER)
            for row in zip(self.gl, self.p_v, self.phase, self.epsilon):
                writer.writerow([format(v, ".17g") for v in row])

    @classmethod
    def default(cls) -> "CalibrationTable":
        """Packaged table anchored at the seven measured gray levels."""
        global _default_table
        if _default_table is None:
            _default_table = cls.from_csv(_DATA_FILE)
        return _default_table


def theta_from_gray(gl: float, theta: float, table: CalibrationTable) -> float:
    """Separation angle reachable at a gray level for input angle theta."""
    p_v = table.p_v_at(gl)
    if p_v <= 0.0:
        raise ValueError(
            f"P_v(gl={gl}) = 0: separation angle capped at pi/2, unreachable by this map"
        )
    return math.atan(math.tan(theta) / math.sqrt(p_v))


def gray_from_theta(theta_target: float, theta: float, table: CalibrationTable) -> float:
    """Gray level whose interpolated P_v realizes the target separation angle."""
    if theta_target < theta:
        raise ValueError(f"target angle {theta_target} below input angle {theta}")
    target_pv = (math.tan(theta) / math.tan(theta_target)) ** 2 if theta_target > theta else 1.0
    lo, hi = float(table.p_v.min()), float(table.p_v.max())
    if not lo - 1e-12 <= target_pv <= hi + 1e-12:
        raise ValueError(
            f"target angle {theta_target} needs P_v={target_pv:.4f}, outside table range [{lo:.4f}, {hi:.4f}]"
        )
    # p_v is non-increasing in gl; interpolate on the reversed axis
    return float(np.interp(target_pv, table.p_v[::-1], table.gl[::-1]))


def depolarized_ancilla(sep: SeparationMap, epsilon: float) -> np.ndarray:
    """Ancilla state after the imperfect controlled rotation on the |0> path.

    Convex mixture (1-eps)|p><p| + eps*I/2 of the ideally rotated ancilla
    |p> = tau|h> + xi|v> with the maximally mixed state.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon={epsilon} outside [0, 1]")
    p = np.array([sep.tau, sep.xi], dtype=complex)
    rho = (1.0 - epsilon) * np.outer(p, p.conj()) + epsilon * np.eye(2) / 2.0
    return rho


@dataclass(frozen=True)
class NoiseModel:
    """Aggregate of the modeled error sources.

    depolarization applies the table's eps(gl) to the ancilla on the
    controlled path; phase_resolution quantizes the preparable phases to
    its multiples (0 disables); ancilla_projection_error is the
    polarization-splitter crosstalk probability, applied downstream of the
    coupling when branches are sampled.
    """

    depolarization: bool = False
    table: CalibrationTable | None = None
    phase_resolution: float = 0.0
    ancilla_projection_error: float = 0.0

    def __post_init__(self):
        if self.phase_resolution < 0.0:
            raise ValueError("phase_resolution must be >= 0")
        if not 0.0 <= self.ancilla_projection_error <= _MAX_CROSSTALK:
            raise ValueError(f"crosstalk must lie in [0, {_MAX_CROSSTALK}]")

    @property
    def is_off(self) -> bool:
        return (
            not self.depolarization
            and self.phase_resolution == 0.0
            and self.ancilla_projection_error == 0.0
        )

    def resolved_table(self) -> CalibrationTable:
        return self.table if self.table is not None else CalibrationTable.default()


def _quantize_phase(phi: float, resolution: float) -> float:
    if resolution == 0.0:
        return phi
    return resolution * round(phi / resolution)


def noisy_separation(
    state_index: int,
    ensemble: SymmetricEnsemble,
    sep: SeparationMap,
    noise: NoiseModel,
    gl: float,
) -> np.ndarray:
    """Joint system-ancilla density after the coupling, before the splitter.

    The controlled operation rotates the ancilla coherently by the unitary
    part xi_u of the calibrated response and then depolarizes it with
    eps(gl); the path coherence rides on the identity-like Kraus branch.
    Because the calibrated separation angle is defined through the
    *measured* P_v = (1-eps)*xi_u^2 + eps/2, depolarization changes only
    the coherence (fringe visibility) of the success branch, never its
    diagonal.  With noise disabled this reduces exactly to the ideal
    coupling unitary.
    """
    if not 0 <= state_index < ensemble.n:
        raise ValueError(f"state index {state_index} out of range [0, {ensemble.n})")
    if abs(ensemble.theta - sep.theta_in) > 1e-12:
        raise ValueError("ensemble and map disagree on the input angle")

    if noise.depolarization:
        table = noise.resolved_table()
        p_v = table.p_v_at(gl)
        if abs(sep.xi ** 2 - p_v) > 1e-9:
            raise ValueError(
                f"map xi^2={sep.xi ** 2:.6f} does not match P_v(gl={gl})={p_v:.6f}; "
                "build the map from theta_from_gray for this gray level"
            )
        eps = table.epsilon_at(gl)
        if p_v <= eps / 2.0:
            raise ValueError(f"P_v(gl={gl})={p_v:.4f} below eps/2; no unitary rotation reproduces it")
        xi_u = math.sqrt((p_v - eps / 2.0) / (1.0 - eps)) if eps < 1.0 else 0.0
    else:
        eps = 0.0
        xi_u = sep.xi
    tau_u = math.sqrt(max(1.0 - xi_u ** 2, 0.0))

    # prepared state: fiducial phase + symmetric-phase step, quantized by the
    # display's phase resolution
    phase = _quantize_phase(
        ensemble.phi + 2.0 * math.pi * state_index / ensemble.n, noise.phase_resolution
    )
    alpha = np.array(
        [math.cos(ensemble.theta), np.exp(1j * phase) * math.sin(ensemble.theta)]
    )
    psi = np.kron(alpha, np.array([0.0, 1.0]))  # ancilla starts in |v>

    if eps == 0.0:
        sep_u = SeparationMap(theta_in=sep.theta_in, theta_out=sep.theta_out, phi=sep.phi)
        u = coupling_unitary(sep_u).u
        out = u @ psi
        joint = np.outer(out, out.conj())
    else:
        rot = np.array([[xi_u, tau_u], [-tau_u, xi_u]], dtype=complex)
        phase_factor = np.exp(1j * sep.phi)
        p0 = np.diag([1.0, 0.0]).astype(complex)
        p1 = np.diag([0.0, 1.0]).astype(complex)
        kraus = [np.kron(p0, math.sqrt(1.0 - 0.75 * eps) * rot) * phase_factor + np.kron(p1, np.eye(2))]
        kraus += [
            np.kron(p0, math.sqrt(eps / 4.0) * s @ rot) * phase_factor for s in _PAULI
        ]
        rho_in = np.outer(psi, psi.conj())
        joint = sum(k @ rho_in @ k.conj().T for k in kraus)
    joint = 0.5 * (joint + joint.conj().T)
    joint.setflags(write=False)
    return joint


def branch_state(joint: np.ndarray, branch: str) -> tuple[float, QubitDensity]:
    """Probability and conditional system state of one splitter port.

    branch "success" projects the ancilla onto |v>, "failure" onto |h>.
    """
    if branch == "success":
        idx = [1, 3]
    elif branch == "failure":
        idx = [0, 2]
    else:
        raise ValueError(f"branch must be success|failure, got {branch!r}")
    sub = joint[np.ix_(idx, idx)]
    p = float(np.trace(sub).real)
    if p <= 0.0:
        raise ValueError(f"branch {branch!r} has zero probability; no conditional state")
    return p, QubitDensity(sub / p)
