"""jumplab: analytic jump rates for tightly measured open quantum systems.

Computes the finite-state Markov generator that governs the telegraph motion
of a continuously measured system in the strong-measurement regime, and
verifies it empirically by integrating the conditioned stochastic master
equation and extracting jump statistics from trajectory ensembles.
"""

from .analyze import (
    ConditionalPhaseMean,
    JumpStats,
    MeanQ,
    collapse_frequencies,
    conditional_phase_mean,
    detect_jumps,
    detect_jumps_trajectory,
    ensemble_mean_q,
    estimate_generator,
    no_collapse_fraction,
)
from .decompose import ScalingReport, SuperoperatorTensors, decompose, validate_scaling
from .errors import (
    DegenerateSpectrumError,
    DimensionMismatchError,
    EmptyEnsembleError,
    InsufficientSamplesError,
    JumplabError,
    NegativeRateError,
    NoCollapseError,
    NonDiagonalFastTermError,
    NonHermitianError,
    PositivityBreachError,
    ReducibleError,
    StabilityGuardError,
    VanishingDeltaError,
)
from .matcore import commutator, hermitize, min_eigenvalue
from .model import (
    LindbladModel,
    MeasurementSetup,
    ValidatedModel,
    check_density_matrix,
    diagonal_state,
    drift,
    innovation,
    load_model,
    mixed_state,
    model_from_dict,
    model_to_dict,
    pointer_state,
    record_increment,
    save_model,
    validate_model,
)
from .rates import (
    RateGenerator,
    StatePath,
    delta,
    delta_matrix,
    jump_rates,
    markov_sample,
    stationary,
)
from .sde import (
    LindbladPath,
    QYTrajectory,
    Trajectory,
    integrate_lindblad,
    run_qy_ensemble,
    run_sme_ensemble,
    simulate_qy,
    simulate_sme,
    step_sme,
    trajectory_seed,
)

__version__ = "0.1.0"
