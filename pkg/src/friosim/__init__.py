"""Optimal discrimination of symmetric qubit states at a fixed rate of
inconclusive outcomes, realized as state separation followed by a
minimum-error measurement, with a photonic path-mode simulation and a
brute-force optimality oracle."""

__version__ = "0.1.0"

from .states import (
    BlochPoint,
    PureQubit,
    QubitDensity,
    SymmetricEnsemble,
    bloch,
    density_from_bloch,
    fiducial_state,
    overlap,
    symmetric_ensemble,
    to_density,
    uniform_states,
)
from .separation import (
    CouplingUnitary,
    SeparationMap,
    SeparationOutcome,
    coupling_unitary,
    separate,
    separation_map,
    success_probability,
)
from .strategy import (
    FrioProbabilities,
    Povm,
    frio_povm,
    frio_probabilities,
    me_error_rate,
    me_povm,
    pe_min,
    q_mc,
)
from .optics import (
    FitResult,
    IntensityPattern,
    OpticsConfig,
    compensation_factor,
    detector_positions,
    detector_probabilities,
    fit_pattern,
    fourier_basis,
    intensity_pattern,
    phase_correction,
    reconstruct_density,
)
from .imperfections import (
    CalibrationTable,
    NoiseModel,
    branch_state,
    depolarized_ancilla,
    gray_from_theta,
    noisy_separation,
    theta_from_gray,
)
from .experiment import (
    EstimateSet,
    RunConfig,
    TrialRecord,
    TrialRecords,
    estimate,
    run,
    sweep,
)
from .oracle import (
    GridSpec,
    OracleReport,
    PovmValidity,
    brute_force_pe,
    verify_povm,
)

__all__ = [name for name in dir() if not name.startswith("_")]
