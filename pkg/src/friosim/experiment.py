"""Shot-level emulation of the discrimination experiment and its estimators.

A run prepares each ensemble member many times, separates it (ideally or
through the calibrated noise model), samples the splitter branch, and in
montecarlo mode samples which detector fires from the compensated
intensity distribution; in optical mode it instead accumulates
shot-noise-perturbed camera patterns at both splitter ports for the
fitting pipeline.  Estimators mirror the measured-intensity formulas:
per-state success fractions from the two ports, a conditional
identification matrix from compensated detector readings, and the
error/inconclusive rates assembled from those averages.

Randomness comes from a counter-based generator (Philox) with one
substream per (schedule point, state, purpose), so results are
reproducible and independent of evaluation order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .imperfections import (
    CalibrationTable,
    NoiseModel,
    gray_from_theta,
    noisy_separation,
    theta_from_gray,
)
from .optics import (
    IntensityPattern,
    OpticsConfig,
    camera_pattern,
    compensation_factor,
    detector_positions,
    detector_probabilities,
    detector_readout,
    fit_pattern,
    phase_correction,
)
from .separation import separation_map, success_probability
from .states import QubitDensity, symmetric_ensemble
from .strategy import me_error_rate

__all__ = [
    "MODES",
    "PointModel",
    "point_model",
    "RunConfig",
    "TrialRecord",
    "TrialRecords",
    "EstimateSet",
    "SweepRow",
    "run",
    "estimate",
    "sweep",
    "sweep_rows_to_csv",
    "load_config",
]

MODES = ("analytic", "montecarlo", "optical")

_TAG_MC = 1
_TAG_OPTICAL = 2

_SUCCESS = "success"
_FAILURE = "failure"


def _substream(seed: int, *ids: int) -> np.random.Generator:
    """Independent Philox stream for a (tag, point, state, ...) tuple."""
    word = np.uint64(0)
    for i, v in enumerate(ids):
        if not 0 <= v < 2 ** 12:
            raise ValueError(f"substream id {v} out of range")
        word |= np.uint64(v) << np.uint64(12 * i)
    key = np.array([np.uint64(seed), word], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of one shot: prepared index, branch, detector (success only)."""

    prepared: int
    branch: str
    detector: int | None

    def __post_init__(self):
        if self.branch not in (_SUCCESS, _FAILURE):
            raise ValueError(f"branch must be success|failure, got {self.branch!r}")
        if (self.detector is None) == (self.branch == _SUCCESS):
            raise ValueError("detector must be present exactly for success branches")


class TrialRecords(Sequence):
    """Array-backed batch of trial records (indexable as TrialRecord)."""

    def __init__(self, prepared: np.ndarray, success: np.ndarray, detector: np.ndarray):
        self.prepared = np.asarray(prepared, dtype=np.int32)
        self.success = np.asarray(success, dtype=bool)
        self.detector = np.asarray(detector, dtype=np.int16)
        if not (self.prepared.shape == self.success.shape == self.detector.shape):
            raise ValueError("record arrays must have equal length")
        if np.any((self.detector >= 0) != self.success):
            raise ValueError("detector must be set exactly on success branches")

    def __len__(self) -> int:
        return self.prepared.size

    def __getitem__(self, i) -> TrialRecord:
        if isinstance(i, slice):
            return TrialRecords(self.prepared[i], self.success[i], self.detector[i])
        ok = bool(self.success[i])
        return TrialRecord(
            prepared=int(self.prepared[i]),
            branch=_SUCCESS if ok else _FAILURE,
            detector=int(self.detector[i]) if ok else None,
        )


@dataclass(frozen=True)
class RunConfig:
    """Full description of one emulated experiment.

    The separation schedule is a list of target angles in degrees
    (schedule_unit="degrees") or of gray levels (schedule_unit="gray");
    gray levels are resolved through the calibration table.  `peak_counts`
    sets the Poisson mean of the brightest camera pixel in optical mode,
    and `background_offset` models the constant camera background that the
    pipeline adds before sampling and subtracts afterwards.
    """

    n_states: int
    theta_deg: float
    separation_schedule: tuple[float, ...]
    shots_per_state: int = 100_000
    seed: int = 0
    noise: NoiseModel = field(default_factory=NoiseModel)
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    mode: str = "montecarlo"
    schedule_unit: str = "degrees"
    peak_counts: float = 10_000.0
    background_offset: float = 0.0

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError("need at least 2 states")
        if not 0.0 < self.theta_deg <= 45.0:
            raise ValueError(f"theta_deg={self.theta_deg} outside (0, 45]")
        if self.shots_per_state < 1:
            raise ValueError("shots_per_state must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.schedule_unit not in ("degrees", "gray"):
            raise ValueError(f"schedule_unit must be degrees|gray, got {self.schedule_unit!r}")
        schedule = tuple(float(v) for v in self.separation_schedule)
        if not schedule:
            raise ValueError("separation schedule is empty")
        object.__setattr__(self, "separation_schedule", schedule)
        if self.peak_counts < 1:
            raise ValueError("peak_counts must be >= 1")
        if self.background_offset < 0:
            raise ValueError("background_offset must be >= 0")
        for t in range(len(schedule)):
            self.resolve_point(t)  # validates angle range / table coverage

    @property
    def theta(self) -> float:
        return math.radians(self.theta_deg)

    def resolve_point(self, t: int) -> tuple[float, float | None, float]:
        """(theta_out, gray_level_or_None, slm_phase) for schedule entry t."""
        value = self.separation_schedule[t]
        theta = self.theta
        if self.schedule_unit == "gray":
            table = self.noise.resolved_table()
            gl = value
            theta_out = theta_from_gray(gl, theta, table)
            phi = table.phase_at(gl) % (2.0 * math.pi)
        elif self.noise.depolarization:
            table = self.noise.resolved_table()
            theta_out = math.radians(value)
            gl = gray_from_theta(theta_out, theta, table)
            phi = table.phase_at(gl) % (2.0 * math.pi)
        else:
            theta_out = math.radians(value)
            gl = None
            phi = 0.0
        if not theta - 1e-12 <= theta_out <= math.pi / 4 + 1e-9:
            raise ValueError(
                f"schedule entry {t} resolves to {math.degrees(theta_out):.3f} deg, "
                f"outside [{self.theta_deg}, 45]"
            )
        return theta_out, gl, phi

    def to_json_dict(self) -> dict:
        noise = {
            "depolarization": self.noise.depolarization,
            "calibration": None,
            "phase_resolution": self.noise.phase_resolution,
            "ancilla_projection_error": self.noise.ancilla_projection_error,
        }
        optics = {
            "wavelength": self.optics.wavelength,
            "focal_length": self.optics.focal_length,
            "mode_separation": self.optics.mode_separation,
            "mode_width": self.optics.mode_width,
            "pixel_pitch": self.optics.pixel_pitch,
            "grid_halfwidth": self.optics.grid_halfwidth,
        }
        return {
            "n_states": self.n_states,
            "theta_deg": self.theta_deg,
            "separation_schedule": list(self.separation_schedule),
            "schedule_unit": self.schedule_unit,
            "shots_per_state": self.shots_per_state,
            "seed": self.seed,
            "mode": self.mode,
            "noise": noise,
            "optics": optics,
            "peak_counts": self.peak_counts,
            "background_offset": self.background_offset,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "RunConfig":
        doc = dict(doc)
        noise_doc = dict(doc.pop("noise", {}))
        calib = noise_doc.pop("calibration", None)
        table = CalibrationTable.from_csv(calib) if calib else None
        noise = NoiseModel(table=table, **noise_doc)
        optics = OpticsConfig(**doc.pop("optics", {}))
        return cls(noise=noise, optics=optics, **doc)


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return RunConfig.from_json_dict(json.load(fh))


@dataclass(frozen=True)
class EstimateSet:
    """Estimated rates with per-state detail and standard errors.

    By construction p_e_hat = p_s_hat * (1 - p_c_beta_hat) and
    q_hat = 1 - p_s_hat, mirroring how the measured quantities are
    assembled from the two splitter ports.
    """

    p_s_hat: float
    p_c_beta_hat: float
    p_e_hat: float
    q_hat: float
    per_state_success: np.ndarray
    identification_matrix: np.ndarray
    stderr: dict

    def __post_init__(self):
        if abs(self.p_e_hat - self.p_s_hat * (1.0 - self.p_c_beta_hat)) > 1e-12:
            raise ValueError("p_e_hat must equal p_s_hat*(1 - p_c_beta_hat)")
        if abs(self.q_hat - (1.0 - self.p_s_hat)) > 1e-12:
            raise ValueError("q_hat must equal 1 - p_s_hat")


@dataclass(frozen=True)
class PointModel:
    """Per-state branch probabilities and conditional states at one
    schedule point, after all configured noise."""

    theta_out: float
    p_success: np.ndarray
    success_states: tuple[QubitDensity, ...]
    failure_states: tuple[QubitDensity, ...]
    detector_probs: np.ndarray


def point_model(config: RunConfig, t: int) -> PointModel:
    n = config.n_states
    theta = config.theta
    theta_out, gl, phi = config.resolve_point(t)
    crosstalk = config.noise.ancilla_projection_error
    ket0 = QubitDensity(np.diag([1.0, 0.0]).astype(complex))

    p_succ = np.zeros(n)
    rho_s: list[QubitDensity] = []
    rho_f: list[QubitDensity] = []
    det = np.zeros((n, n))

    if config.noise.is_off:
        p_s = success_probability(theta, theta_out)
        for j in range(n):
            out_j = _ideal_success_density(j, n, theta_out)
            p_succ[j] = p_s
            rho_s.append(out_j)
            rho_f.append(ket0)
            det[j] = detector_probabilities(out_j, n, config.optics)
    else:
        ens = symmetric_ensemble(n, theta, phi)
        sep = separation_map(theta, theta_out, phi)
        for j in range(n):
            joint = noisy_separation(j, ens, sep, config.noise, gl if gl is not None else 0.0)
            block_h = joint[np.ix_([0, 2], [0, 2])]
            block_v = joint[np.ix_([1, 3], [1, 3])]
            obs_v = (1.0 - crosstalk) * block_v + crosstalk * block_h
            obs_h = (1.0 - crosstalk) * block_h + crosstalk * block_v
            p_v = float(np.trace(obs_v).real)
            p_h = float(np.trace(obs_h).real)
            p_succ[j] = p_v
            rho_v = QubitDensity(obs_v / p_v) if p_v > 0 else ket0
            rho_h = QubitDensity(obs_h / p_h) if p_h > 1e-15 else ket0
            rho_s.append(rho_v)
            rho_f.append(rho_h)
            det[j] = detector_probabilities(rho_v, n, config.optics)

    return PointModel(
        theta_out=theta_out,
        p_success=p_succ,
        success_states=tuple(rho_s),
        failure_states=tuple(rho_f),
        detector_probs=det,
    )


def _ideal_success_density(j: int, n: int, theta_out: float) -> QubitDensity:
    amp = np.array(
        [math.cos(theta_out), np.exp(2j * math.pi * j / n) * math.sin(theta_out)]
    )
    return QubitDensity(np.outer(amp, amp.conj()))


def _run_montecarlo(config: RunConfig, t: int) -> TrialRecords:
    model = point_model(config, t)
    n, m = config.n_states, config.shots_per_state
    prepared = np.repeat(np.arange(n, dtype=np.int32), m)
    success = np.zeros(n * m, dtype=bool)
    detector = np.full(n * m, -1, dtype=np.int16)
    for j in range(n):
        rng = _substream(config.seed, _TAG_MC, t, j)
        block = slice(j * m, (j + 1) * m)
        hits = rng.random(m) < model.p_success[j]
        success[block] = hits
        k = int(hits.sum())
        if k:
            draws = rng.choice(n, size=k, p=model.detector_probs[j])
            detector[block][hits] = draws.astype(np.int16)
    return TrialRecords(prepared, success, detector)


def _run_optical(config: RunConfig, t: int) -> list[IntensityPattern]:
    model = point_model(config, t)
    n = config.n_states
    patterns: list[IntensityPattern] = []
    for j in range(n):
        ideal = {
            _SUCCESS: camera_pattern(
                model.success_states[j], config.optics, float(model.p_success[j]),
                state_index=j, branch=_SUCCESS,
            ),
            _FAILURE: camera_pattern(
                model.failure_states[j], config.optics, float(1.0 - model.p_success[j]),
                state_index=j, branch=_FAILURE,
            ),
        }
        peak = max(p.values.max() for p in ideal.values())
        scale = config.peak_counts / peak
        for branch_id, branch in enumerate((_SUCCESS, _FAILURE)):
            rng = _substream(config.seed, _TAG_OPTICAL, t, j, branch_id)
            mean = ideal[branch].values * scale + config.background_offset
            counts = rng.poisson(mean).astype(float)
            values = np.maximum(counts - config.background_offset, 0.0)
            patterns.append(
                IntensityPattern(
                    xs=ideal[branch].xs, values=values, state_index=j, branch=branch
                )
            )
    return patterns


def _require_single_point(config: RunConfig) -> None:
    if len(config.separation_schedule) != 1:
        raise ValueError(
            "run()/estimate() operate on a single schedule entry; use sweep() for schedules"
        )


def run(config: RunConfig):
    """Sample one schedule point: TrialRecords (montecarlo) or patterns (optical)."""
    _require_single_point(config)
    if config.mode == "montecarlo":
        return _run_montecarlo(config, 0)
    if config.mode == "optical":
        return _run_optical(config, 0)
    raise ValueError("analytic mode has nothing to sample; use sweep()")


def _estimate_montecarlo(records: TrialRecords, config: RunConfig) -> EstimateSet:
    n = config.n_states
    p_sj = np.zeros(n)
    var_sj = np.zeros(n)
    p_jk = np.zeros((n, n))
    var_jj = np.zeros(n)
    for j in range(n):
        sel = records.prepared == j
        m_j = int(sel.sum())
        if m_j == 0:
            raise ValueError(f"no trials recorded for state {j}")
        succ = records.success & sel
        k_j = int(succ.sum())
        p_sj[j] = k_j / m_j
        var_sj[j] = p_sj[j] * (1.0 - p_sj[j]) / m_j
        if k_j == 0:
            raise ValueError(f"state {j} never separated successfully; cannot estimate p_jk")
        counts = np.bincount(records.detector[succ], minlength=n).astype(float)
        p_jk[j] = counts / k_j
        var_jj[j] = p_jk[j, j] * (1.0 - p_jk[j, j]) / k_j
    return _assemble(p_sj, var_sj, p_jk, var_jj)


def _estimate_optical(patterns: list[IntensityPattern], config: RunConfig) -> EstimateSet:
    n = config.n_states
    theta_out, _, _ = config.resolve_point(0)
    by_key = {(p.state_index, p.branch): p for p in patterns}
    for j in range(n):
        for branch in (_SUCCESS, _FAILURE):
            if (j, branch) not in by_key:
                raise ValueError(f"missing {branch} pattern for state {j}")

    p_sj = np.zeros(n)
    var_sj = np.zeros(n)
    totals = np.zeros(n)
    for j in range(n):
        i_s = float(by_key[(j, _SUCCESS)].values.sum())
        i_f = float(by_key[(j, _FAILURE)].values.sum())
        total = i_s + i_f
        if total <= 0:
            raise ValueError(f"zero total intensity for state {j}")
        p_sj[j] = i_s / total
        var_sj[j] = p_sj[j] * (1.0 - p_sj[j]) / total
        totals[j] = total

    fits = [fit_pattern(by_key[(j, _SUCCESS)], config.optics) for j in range(n)]
    phi_corr, _ = phase_correction(fits, n)
    shift = phi_corr / (2.0 * config.optics.kappa * config.optics.mode_separation)
    positions = detector_positions(n, config.optics)

    chi = compensation_factor(positions, config.optics)
    p_jk = np.zeros((n, n))
    var_jj = np.zeros(n)
    for j in range(n):
        comp = detector_readout(by_key[(j, _SUCCESS)], positions, config.optics, x_shift=shift)
        total = comp.sum()
        if total <= 0:
            raise ValueError(f"state {j} has no intensity at the detectors")
        p_jk[j] = comp / total
        # Poisson in the raw counts: var(comp_k) = raw_k/chi_k^2 = comp_k/chi_k,
        # pushed through the normalized ratio by the delta method
        var_comp = comp / chi
        rest = total - comp[j]
        var_jj[j] = (rest ** 2 * var_comp[j] + comp[j] ** 2 * (var_comp.sum() - var_comp[j])) / total ** 4
    return _assemble(p_sj, var_sj, p_jk, var_jj)


def _assemble(p_sj, var_sj, p_jk, var_jj) -> EstimateSet:
    n = p_sj.size
    p_s = float(p_sj.mean())
    p_cb = float(np.diag(p_jk).mean())
    stderr = {
        "p_s": math.sqrt(float(var_sj.sum())) / n,
        "p_c_beta": math.sqrt(float(var_jj.sum())) / n,
    }
    stderr["q"] = stderr["p_s"]
    stderr["p_e"] = math.sqrt(
        ((1.0 - p_cb) * stderr["p_s"]) ** 2 + (p_s * stderr["p_c_beta"]) ** 2
    )
    return EstimateSet(
        p_s_hat=p_s,
        p_c_beta_hat=p_cb,
        p_e_hat=p_s * (1.0 - p_cb),
        q_hat=1.0 - p_s,
        per_state_success=p_sj,
        identification_matrix=p_jk,
        stderr=stderr,
    )


def estimate(data, config: RunConfig) -> EstimateSet:
    """Estimated rates from one schedule point's records or patterns."""
    _require_single_point(config)
    if isinstance(data, TrialRecords):
        return _estimate_montecarlo(data, config)
    if isinstance(data, list) and data and isinstance(data[0], IntensityPattern):
        return _estimate_optical(data, config)
    raise ValueError("estimate() expects TrialRecords or a list of IntensityPattern")


@dataclass(frozen=True)
class SweepRow:
    n: int
    theta_out_deg: float
    mode: str
    p_s: float
    p_c_beta: float
    p_e: float
    q: float
    stderr_ps: float
    stderr_pc: float


def _point_config(config: RunConfig, t: int, mode: str) -> RunConfig:
    return replace(
        config,
        separation_schedule=(config.separation_schedule[t],),
        mode=mode,
    )


def sweep(config: RunConfig, modes: tuple[str, ...] | None = None) -> list[SweepRow]:
    """One row per schedule entry per mode.

    Analytic rows evaluate the ideal closed forms at the resolved angles;
    sampled rows run the corresponding emulation and estimator.  Substream
    seeding depends on the schedule position, so a sweep is reproducible
    as a whole.
    """
    modes = modes or (config.mode,)
    for mode in modes:
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
    rows: list[SweepRow] = []
    for t in range(len(config.separation_schedule)):
        theta_out, _, _ = config.resolve_point(t)
        for mode in modes:
            if mode == "analytic":
                p_s = success_probability(config.theta, theta_out)
                p_cb = 1.0 - me_error_rate(config.n_states, theta_out)
                rows.append(
                    SweepRow(
                        n=config.n_states,
                        theta_out_deg=math.degrees(theta_out),
                        mode=mode,
                        p_s=p_s,
                        p_c_beta=p_cb,
                        p_e=p_s * (1.0 - p_cb),
                        q=1.0 - p_s,
                        stderr_ps=0.0,
                        stderr_pc=0.0,
                    )
                )
                continue
            if mode == "montecarlo":
                data = _run_montecarlo(config, t)
            else:
                data = _run_optical(config, t)
            sub = _point_config(config, t, mode)
            est = (
                _estimate_montecarlo(data, sub)
                if mode == "montecarlo"
                else _estimate_optical(data, sub)
            )
            rows.append(
                SweepRow(
                    n=config.n_states,
                    theta_out_deg=math.degrees(theta_out),
                    mode=mode,
                    p_s=est.p_s_hat,
                    p_c_beta=est.p_c_beta_hat,
                    p_e=est.p_e_hat,
                    q=est.q_hat,
                    stderr_ps=est.stderr["p_s"],
                    stderr_pc=est.stderr["p_c_beta"],
                )
            )
    return rows


SWEEP_CSV_HEADER = "N,theta_out_deg,mode,p_s,p_c_beta,P_e,Q,stderr_ps,stderr_pc"


def sweep_rows_to_csv(rows: list[SweepRow]) -> str:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(r.n),
                    format(r.theta_out_deg, ".12g"),
                    r.mode,
                    format(r.p_s, ".12g"),
                    format(r.p_c_beta, ".12g"),
                    format(r.p_e, ".12g"),
                    format(r.q, ".12g"),
                    format(r.stderr_ps, ".12g"),
                    format(r.stderr_pc, ".12g"),
                ]
            )
        )
    return "\n".join(lines) + "\n"
