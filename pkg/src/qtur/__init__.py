"""Monitored Lindblad dynamics: exact jump statistics, Monte Carlo
unraveling, and numerical certification of thermodynamic uncertainty
bounds built on the equivalence between a coherently evolving system and
its Hamiltonian-free twin."""

from .bounds import (
    BoundReport,
    InputStat,
    ep_lower_bound,
    ep_tur,
    gamma_factor,
    inverse_x_tanh_x,
    kur_differential,
    moment_ratio_bounds,
    survival_bound_check,
    tur_activity_integral,
    windowed_gamma,
)
from .counting import (
    CountingObservable,
    MomentResult,
    ThermoCurve,
    activity_curve,
    counting_moments,
    decompose_activity,
    decompose_sigma,
    entropy_production,
    entropy_production_rate,
    mean_rate,
)
from .engine import (
    DegenerateSteadyStateError,
    Liouvillian,
    NoJumpFamily,
    build_generator,
    no_jump_family,
    propagate,
    steady_state,
    survival_probability,
)
from .models import (
    antisymmetric_current_weights,
    build_da_model,
    build_ep_model,
    build_poisson_model,
    load_model,
    model_from_json,
    model_to_json,
    save_model,
)
from .operators import (
    JumpChannel,
    LindbladModel,
    ModelValidationError,
    SpectralDecomposition,
    check_local_detailed_balance,
    extract_bohr_frequency,
    spectral_decompose,
    split_diagonal_offdiagonal,
    validate_density,
)
from .sweeps import CicReport, SweepConfig, SweepResult, run_cic_suite, run_sweep, write_csv
from .trajectories import (
    EnsembleEstimate,
    PathWeights,
    SeedPolicy,
    TrajectoryRecord,
    TrajectorySampler,
    estimate,
    forward_backward_densities,
    record_entropy,
    record_observable,
    sample_ensemble,
    sample_trajectory,
)

__version__ = "0.1.0"
