"""Path-mode optics model: Fourier-basis projective extension, detector
placement on the focal plane, interference-pattern synthesis, fringe
fitting, and density-matrix reconstruction.

Two path modes separated by Delta (each of width Lambda) interfere at the
focal plane of a lens; a qubit state rho produces the detection density

    I(x) = w * sinc^2(kappa*Lambda*x) * [tr(rho) + 2|rho01| cos(2*kappa*Delta*x + arg rho10)]

with kappa = pi/(lambda*f).  Pointlike detectors at the conjugate-basis
positions, read through the sinc^2 compensation factor, realize the
minimum-error POVM in the qubit subspace.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .states import QubitDensity

__all__ = [
    "GRID_SAMPLES",
    "PHASE_RELIABILITY_MIN_VISIBILITY",
    "OpticsConfig",
    "IntensityPattern",
    "FitResult",
    "fourier_basis",
    "detector_positions",
    "compensation_factor",
    "intensity_pattern",
    "camera_pattern",
    "fit_pattern",
    "phase_correction",
    "reconstruct_density",
    "detector_probabilities",
    "detector_readout",
    "dominant_fringe_frequency",
    "pattern_to_csv",
    "pattern_from_csv",
    "fit_record_json",
]

GRID_SAMPLES = 4096

# Below this fringe contrast the fitted phase is noise and is excluded
# from the phase-offset average.
PHASE_RELIABILITY_MIN_VISIBILITY = 0.02

# Fitted visibilities may exceed the pure-state bound slightly under
# measurement noise; reject anything beyond this as a broken input.
_VISIBILITY_HARD_MAX = 1.05

_SINC_ZERO_REL_TOL = 1e-3


@dataclass(frozen=True)
class OpticsConfig:
    """Geometry of the path-mode interferometer (all lengths in meters)."""

    wavelength: float = 687e-9
    focal_length: float = 0.30
    mode_separation: float = 288e-6
    mode_width: float = 144e-6
    pixel_pitch: float = 5.2e-6
    grid_halfwidth: float | None = None

    def __post_init__(self):
        for name in ("wavelength", "focal_length", "mode_separation", "mode_width", "pixel_pitch"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mode_width >= self.mode_separation:
            raise ValueError("mode width must be smaller than mode separation (non-overlapping modes)")
        if self.grid_halfwidth is None:
            # two envelope zeros on each side
            object.__setattr__(self, "grid_halfwidth", 2.0 * self.envelope_zero)
        elif self.grid_halfwidth <= 0:
            raise ValueError("grid_halfwidth must be positive")

    @property
    def kappa(self) -> float:
        return math.pi / (self.wavelength * self.focal_length)

    @property
    def fringe_period(self) -> float:
        return self.wavelength * self.focal_length / self.mode_separation

    @property
    def envelope_zero(self) -> float:
        """First zero of the sinc^2 envelope."""
        return self.wavelength * self.focal_length / self.mode_width

    def grid(self, samples: int = GRID_SAMPLES) -> np.ndarray:
        return np.linspace(-self.grid_halfwidth, self.grid_halfwidth, samples)

    def pixel_grid(self) -> np.ndarray:
        """Camera pixel centers covering the grid, symmetric about x = 0."""
        n_pix = int(math.floor(2.0 * self.grid_halfwidth / self.pixel_pitch))
        return (np.arange(n_pix) - (n_pix - 1) / 2.0) * self.pixel_pitch


@dataclass(frozen=True)
class IntensityPattern:
    """Sampled detection density over transverse position x (one branch)."""

    xs: np.ndarray
    values: np.ndarray
    state_index: int = 0
    branch: str = "success"

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if xs.ndim != 1 or xs.shape != values.shape:
            raise ValueError("xs and values must be 1-d arrays of equal length")
        if xs.size < 2:
            raise ValueError("pattern needs at least two samples")
        d = np.diff(xs)
        if d.min() <= 0:
            raise ValueError("xs must be strictly increasing")
        if (d.max() - d.min()) > 1e-9 * d.mean():
            raise ValueError("xs must have uniform pitch")
        if values.min() < -1e-12:
            raise ValueError(f"negative intensity {values.min()}")
        if self.branch not in ("success", "failure"):
            raise ValueError(f"branch must be success|failure, got {self.branch!r}")
        xs.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "values", values)

    @property
    def pitch(self) -> float:
        return float(self.xs[1] - self.xs[0])


@dataclass(frozen=True)
class FitResult:
    """Fringe-fit output: envelope amplitude, visibility, raw phase, SSE."""

    i_max: float
    visibility: float
    phase_raw: float
    residual: float
    phase_reliable: bool = True

    def __post_init__(self):
        if self.visibility < 0.0 or self.visibility > _VISIBILITY_HARD_MAX:
            raise ValueError(f"visibility {self.visibility} outside [0, {_VISIBILITY_HARD_MAX}]")


def fourier_basis(n: int) -> np.ndarray:
    """Rows are the conjugate-basis vectors mu_k, components w^{mk}/sqrt(n).

    The first two components of mu_k are sqrt(2/n) times the k-th
    maximally separated qubit state, which is what lets an n-dimensional
    projective measurement reproduce the minimum-error POVM on the qubit.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    m = np.arange(n)
    return np.exp(2j * math.pi * np.outer(m, m) / n) / math.sqrt(n)


def _detector_orders(n: int) -> np.ndarray:
    k = np.arange(n)
    return np.where(k <= n / 2, k, k - n)


def detector_positions(n: int, cfg: OpticsConfig) -> np.ndarray:
    """Transverse detector positions x_k = -lambda*f*m_k/(n*Delta).

    m_k = k for k <= n/2 and k - n otherwise, so the detectors straddle
    the optical axis.  Positions landing on an envelope zero are rejected
    at configuration time (the compensation factor diverges there).
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    m = _detector_orders(n)
    xs = -cfg.wavelength * cfg.focal_length * m / (n * cfg.mode_separation)
    compensation_factor(xs, cfg)  # raises near sinc zeros
    return xs


def _envelope(xs: np.ndarray, cfg: OpticsConfig) -> np.ndarray:
    # np.sinc(z) = sin(pi z)/(pi z), so sinc(kappa*Lambda*x) = np.sinc(Lambda*x/(lambda*f))
    return np.sinc(cfg.mode_width * np.asarray(xs) / (cfg.wavelength * cfg.focal_length)) ** 2


def compensation_factor(x, cfg: OpticsConfig):
    """Detection-efficiency compensation chi(x) = sinc^2(pi*Lambda*x/(lambda*f)).

    chi(0) = 1 and chi is symmetric in x.  Evaluation within a relative
    distance of 1e-3 of any envelope zero is rejected: dividing a
    detector reading by a vanishing chi is meaningless.
    """
    xs = np.asarray(x, dtype=float)
    u = cfg.mode_width * xs / (cfg.wavelength * cfg.focal_length)
    nearest = np.round(u)
    bad = (nearest != 0) & (np.abs(u - nearest) < _SINC_ZERO_REL_TOL)
    if np.any(bad):
        raise ValueError(
            "position(s) within 1e-3 relative distance of a sinc^2 zero: "
            f"{np.atleast_1d(xs)[np.atleast_1d(bad)]}"
        )
    out = np.sinc(u) ** 2
    return float(out) if np.isscalar(x) else out


def _intensity_values(rho: np.ndarray, xs: np.ndarray, cfg: OpticsConfig, weight: float) -> np.ndarray:
    off = rho[1, 0]
    total = float(np.real(rho[0, 0] + rho[1, 1]))
    fringe = total + 2.0 * abs(off) * np.cos(2.0 * cfg.kappa * cfg.mode_separation * xs + np.angle(off))
    return weight * _envelope(xs, cfg) * fringe


def intensity_pattern(
    rho: QubitDensity,
    cfg: OpticsConfig,
    branch_weight: float = 1.0,
    *,
    state_index: int = 0,
    branch: str = "success",
    samples: int = GRID_SAMPLES,
) -> IntensityPattern:
    """Noiseless focal-plane pattern of a path-mode state on the fine grid."""
    if not 0.0 <= branch_weight <= 1.0 + 1e-12:
        raise ValueError(f"branch_weight={branch_weight} outside [0, 1]")
    xs = cfg.grid(samples)
    values = _intensity_values(rho.m, xs, cfg, branch_weight)
    return IntensityPattern(xs=xs, values=values, state_index=state_index, branch=branch)


def camera_pattern(
    rho: QubitDensity,
    cfg: OpticsConfig,
    branch_weight: float = 1.0,
    *,
    state_index: int = 0,
    branch: str = "success",
    oversample: int = 4,
) -> IntensityPattern:
    """Pattern binned to camera pixels: per-pixel mean of the fine intensity."""
    centers = cfg.pixel_grid()
    sub = (np.arange(oversample) + 0.5) / oversample - 0.5
    fine = (centers[:, None] + sub[None, :] * cfg.pixel_pitch).ravel()
    vals = _intensity_values(rho.m, fine, cfg, branch_weight)
    binned = vals.reshape(centers.size, oversample).mean(axis=1)
    return IntensityPattern(xs=centers, values=binned, state_index=state_index, branch=branch)


def fit_pattern(pattern: IntensityPattern, cfg: OpticsConfig) -> FitResult:
    """Least-squares fringe fit of a measured pattern.

    The model sinc^2(kappa*Lambda*x) * (a + b cos(2*kappa*Delta*x)
    + c sin(2*kappa*Delta*x)) is linear in (a, b, c), so the fit is a
    convex linear least-squares problem with no initialization issues;
    visibility and phase follow as V = sqrt(b^2+c^2)/a, phi' = atan2(-c, b)
    reported in (-pi, pi].  Uniform weighting over the full grid.
    """
    xs, ys = pattern.xs, pattern.values
    if ys.max() <= 0.0:
        raise ValueError("degenerate pattern: no positive intensity to fit")
    span = xs[-1] - xs[0]
    if span < 3.0 * cfg.fringe_period:
        raise ValueError(
            f"pattern spans {span:.3e} m, need at least 3 fringe periods ({3 * cfg.fringe_period:.3e} m)"
        )
    env = _envelope(xs, cfg)
    arg = 2.0 * cfg.kappa * cfg.mode_separation * xs
    design = np.stack([env, env * np.cos(arg), env * np.sin(arg)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(design, ys, rcond=None)
    a, b, c = (float(v) for v in coef)
    if a <= 0.0:
        raise ValueError(f"degenerate fit: non-positive envelope amplitude {a}")
    visibility = math.hypot(b, c) / a
    phase = math.atan2(-c, b)
    if phase <= -math.pi:
        phase += 2.0 * math.pi
    residual = float(np.sum((design @ coef - ys) ** 2))
    return FitResult(
        i_max=a,
        visibility=visibility,
        phase_raw=phase,
        residual=residual,
        phase_reliable=visibility >= PHASE_RELIABILITY_MIN_VISIBILITY,
    )


def phase_correction(fits: list[FitResult], n: int) -> tuple[float, list[float]]:
    """Common phase offset and corrected per-state fringe phases.

    `fits` must be ordered by state index.  Each raw phase is first
    identified with the branch representative nearest its state's ideal
    value 2*pi*j/n (a blind wrap would jump branches for states sitting at
    the cut); the offset then centers the average of the reliable phases
    at pi*(n-1)/n, the average of the ideal set.  Fits whose visibility is
    below the reliability floor are excluded from the average but still
    receive the correction.
    """
    if len(fits) != n:
        raise ValueError(f"expected {n} fits, got {len(fits)}")
    adjusted = []
    deviations = []
    for j, f in enumerate(fits):
        ideal = 2.0 * math.pi * j / n
        dev = math.remainder(f.phase_raw - ideal, 2.0 * math.pi)
        adjusted.append(ideal + dev)
        if f.phase_reliable:
            deviations.append(dev)
    if not deviations:
        raise ValueError("no fit has a reliable phase; cannot determine the offset")
    phi_corr = -sum(deviations) / len(deviations)
    corrected = [a + phi_corr for a in adjusted]
    return phi_corr, corrected


def reconstruct_density(theta_target: float, fit: FitResult, phi_corr: float) -> QubitDensity:
    """Density matrix of a separated state from its fringe fit.

    Diagonal fixed by the target separation angle, off-diagonal
    e^{+-i*phi} V/2 with phi = phase_raw + phi_corr.  Small negativity
    (eigenvalue in (-0.02, 0), measurement noise) is projected back to the
    nearest positive matrix and renormalized; larger violations raise.
    """
    if not 0.0 <= theta_target <= math.pi / 4 + 1e-15:
        raise ValueError(f"theta_target={theta_target} outside [0, pi/4]")
    v = fit.visibility
    vmax = math.sin(2.0 * theta_target)
    if v > vmax + 0.05:
        raise ValueError(
            f"visibility {v:.4f} exceeds sin(2*theta')={vmax:.4f} by more than 0.05; "
            "pattern is inconsistent with the target separation angle"
        )
    phi = fit.phase_raw + phi_corr
    off = 0.5 * v * complex(math.cos(phi), math.sin(phi))
    m = np.array(
        [
            [math.cos(theta_target) ** 2, off.conjugate()],
            [off, math.sin(theta_target) ** 2],
        ],
        dtype=complex,
    )
    evals = np.linalg.eigvalsh(m)
    lo = float(evals.min())
    if lo < -0.02:
        raise ValueError(f"reconstructed matrix eigenvalue {lo:.4f} below -0.02; refusing to repair")
    if lo < 0.0:
        w, vecs = np.linalg.eigh(m)
        w = np.clip(w, 0.0, None)
        m = (vecs * w) @ vecs.conj().T
        m /= np.trace(m).real
        m = 0.5 * (m + m.conj().T)
    return QubitDensity(m)


def detector_probabilities(rho: QubitDensity, n: int, cfg: OpticsConfig) -> np.ndarray:
    """Outcome distribution of pointlike detectors with compensation.

    Evaluates the closed-form intensity at the exact detector positions,
    divides by the compensation factor and normalizes.  For any qubit
    state this reproduces the Born probabilities of the minimum-error
    POVM; the equality is asserted by tests, not assumed here.
    """
    xs = detector_positions(n, cfg)
    vals = _intensity_values(rho.m, xs, cfg, 1.0) / compensation_factor(xs, cfg)
    total = vals.sum()
    if total <= 0:
        raise ValueError("state produced no intensity at the detectors")
    return vals / total


def detector_readout(
    pattern: IntensityPattern,
    positions: np.ndarray,
    cfg: OpticsConfig,
    x_shift: float = 0.0,
) -> np.ndarray:
    """Compensated detector readings interpolated from a sampled pattern.

    `x_shift` moves the readout comb (positive shift reads at x_k + shift),
    which is how the fitted common phase offset corrects the detector
    placement on a measured axis.
    """
    where = np.asarray(positions, dtype=float) + x_shift
    if where.min() < pattern.xs[0] or where.max() > pattern.xs[-1]:
        raise ValueError("detector positions fall outside the sampled pattern")
    raw = np.interp(where, pattern.xs, pattern.values)
    return raw / compensation_factor(np.asarray(positions, dtype=float), cfg)


def dominant_fringe_frequency(pattern: IntensityPattern, cfg: OpticsConfig) -> float:
    """Spatial frequency (rad/m) of the strongest spectral line above the envelope band."""
    ys = pattern.values - pattern.values.mean()
    amp = np.abs(np.fft.rfft(ys))
    freq = np.fft.rfftfreq(pattern.xs.size, d=pattern.pitch)
    cutoff = 1.5 * cfg.mode_width / (cfg.wavelength * cfg.focal_length)
    amp[freq < cutoff] = 0.0
    if amp.max() == 0.0:
        raise ValueError("no spectral content above the envelope band")
    return 2.0 * math.pi * float(freq[int(np.argmax(amp))])


def pattern_to_csv(pattern: IntensityPattern, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_m", "intensity"])
        for x, v in zip(pattern.xs, pattern.values):
            writer.writerow([format(x, ".12g"), format(v, ".12g")])


def pattern_from_csv(path, state_index: int = 0, branch: str = "success") -> IntensityPattern:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x_m", "intensity"]:
            raise ValueError(f"unexpected pattern CSV header {header}")
        rows = [(float(x), float(v)) for x, v in reader]
    xs = np.array([r[0] for r in rows])
    values = np.array([r[1] for r in rows])
    return IntensityPattern(xs=xs, values=values, state_index=state_index, branch=branch)


def fit_record_json(fit: FitResult, rho: QubitDensity, phase_rad: float | None = None) -> dict:
    """JSON-ready record of a fit and its reconstructed density matrix."""
    m = rho.m
    return {
        "i_max": fit.i_max,
        "visibility": fit.visibility,
        "phase_rad": fit.phase_raw if phase_rad is None else phase_rad,
        "rho_re": [float(v) for v in m.real.ravel()],
        "rho_im": [float(v) for v in m.imag.ravel()],
    }
