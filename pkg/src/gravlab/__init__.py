"""Laboratory for isothermal self-gravitating hydrodynamics.

Three interchangeable solvers for the same periodic-box problems: a
physics-informed neural network (solver id "grinn"), an explicit Lax
finite-difference reference with spectral self-gravity ("fd"), and the
closed-form linear theory ("lt"), plus benchmarks comparing them.
"""

__version__ = "0.1.0"

from .domain import (
    CASE_IDS,
    CaseConfig,
    CollocationSet,
    ConfigError,
    DomainSpec,
    UnitSystem,
    build_domain,
    default_units,
    parse_config_text,
    config_to_text,
    preset_case,
    sample_collocation,
)
from .linear_theory import (
    RegimeError,
    WaveMode,
    dispersion,
    e_folding_time,
    evaluate_mode,
    growth_rate,
    initial_condition,
    make_mode,
    oscillation_frequency,
    phase_speed,
    velocity_amplitude,
)
from .fd_solver import (
    FieldState,
    SolverError,
    Trajectory,
    courant_dt,
    evolve,
    gravitational_field,
    initial_state_for,
    lax_step,
    make_initial_state,
    run_case,
    sample_state,
    solve_poisson,
)
from .network import (
    CheckpointError,
    Jet,
    JetAdjoint,
    LossTerm,
    NetworkSpec,
    forward,
    init_params,
    input_jet,
    load_checkpoint,
    loss_gradient,
    save_checkpoint,
)
from .optimizers import AdamState, LbfgsResult, adam_step, lbfgs_minimize
from .pinn import (
    LossEvaluator,
    LossReport,
    Prediction,
    TrainedModel,
    TrainingError,
    case_mode,
    network_spec_for,
    predict,
    residuals_from_jet,
    train,
)
from .benchmark import (
    FitError,
    GrowthFit,
    MismatchReport,
    PhaseSpeedFit,
    ScalingReport,
    compare_case,
    density_mismatch,
    measure_growth_rate,
    measure_phase_speed,
    scaling_experiment,
    signed_mismatch,
    volume_average,
    volume_stats,
)
from .io import (
    RunManifest,
    read_manifest,
    read_snapshot,
    write_manifest,
    write_snapshot,
    write_state_snapshot,
)
