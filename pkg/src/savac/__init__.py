"""Augmented SAV finite element solver for the stochastic Allen-Cahn equation."""

__version__ = "0.1.0"

from .config import (
    INITIAL_KINDS,
    RunConfig,
    config_modes,
    emit_config,
    experiment_plan,
    initial_profile,
    noise_model,
    parse_config,
    potential_params,
    problem,
    solver_options,
    tracking_plan,
)
from .errors import (
    ConfigError,
    EnsembleError,
    MeshError,
    PathError,
    SavacError,
    SingularStepError,
    SolverError,
)
from .fem import (
    LumpedMass,
    assemble_lumped_mass,
    assemble_stiffness,
    discrete_laplacian,
    h1_norm_sq,
    h1_seminorm_sq,
    lumped_inner,
    lumped_norm_sq,
    nodal_interpolate,
)
from .linalg import SolverOptions, SparseSymOperator, cg_solve
from .mc import (
    CHECKSUM_RTOL,
    ErrorReport,
    ExperimentPlan,
    LadderRung,
    Problem,
    TrackingPlan,
    TrackingReport,
    compute_eoc,
    r_tracking_study,
    run_ensemble,
    write_eoc_csv,
    write_errors_csv,
    write_tracking_csv,
)
from .mesh import MAX_NODE_COUNT, TorusMesh, build_torus_mesh, prolong
from .noise import (
    ModeSpec,
    NoiseModel,
    NoisePath,
    apply_noise_operator,
    coarsen,
    default_modes,
    eigenfunction,
    generate_increments,
    mode_table,
    mode_values,
    noise_field,
    stream_seed,
    total_displacement,
)
from .potential import (
    RHO_KINDS,
    PotentialParams,
    double_well,
    double_well_prime,
    double_well_second,
    lumped_energy,
    noise_coefficient,
    sav_energy,
)
from .profiles import (
    constant_profile,
    cosine_profile,
    ellipse_signed_distance,
    tanh_ellipse_profile,
)
from .sav import (
    DENSE_ORACLE_MAX_NODES,
    PathResult,
    SavState,
    StepCoefficients,
    StepOperators,
    dense_oracle_step,
    initial_state,
    prepare_operators,
    reduce_auxiliary,
    run_path,
    sav_step,
    step_coefficients,
)

__all__ = [
    "__version__",
    # errors
    "ConfigError",
    "EnsembleError",
    "MeshError",
    "PathError",
    "SavacError",
    "SingularStepError",
    "SolverError",
    # mesh
    "MAX_NODE_COUNT",
    "TorusMesh",
    "build_torus_mesh",
    "prolong",
    # fem
    "LumpedMass",
    "assemble_lumped_mass",
    "assemble_stiffness",
    "discrete_laplacian",
    "h1_norm_sq",
    "h1_seminorm_sq",
    "lumped_inner",
    "lumped_norm_sq",
    "nodal_interpolate",
    # potential
    "RHO_KINDS",
    "PotentialParams",
    "double_well",
    "double_well_prime",
    "double_well_second",
    "lumped_energy",
    "noise_coefficient",
    "sav_energy",
    # noise
    "ModeSpec",
    "NoiseModel",
    "NoisePath",
    "apply_noise_operator",
    "coarsen",
    "default_modes",
    "eigenfunction",
    "generate_increments",
    "mode_table",
    "mode_values",
    "noise_field",
    "stream_seed",
    "total_displacement",
    # linalg
    "SolverOptions",
    "SparseSymOperator",
    "cg_solve",
    # profiles
    "constant_profile",
    "cosine_profile",
    "ellipse_signed_distance",
    "tanh_ellipse_profile",
    # sav
    "DENSE_ORACLE_MAX_NODES",
    "PathResult",
    "SavState",
    "StepCoefficients",
    "StepOperators",
    "dense_oracle_step",
    "initial_state",
    "prepare_operators",
    "reduce_auxiliary",
    "run_path",
    "sav_step",
    "step_coefficients",
    # mc
    "CHECKSUM_RTOL",
    "ErrorReport",
    "ExperimentPlan",
    "LadderRung",
    "Problem",
    "TrackingPlan",
    "TrackingReport",
    "compute_eoc",
    "r_tracking_study",
    "run_ensemble",
    "write_eoc_csv",
    "write_errors_csv",
    "write_tracking_csv",
    # config
    "INITIAL_KINDS",
    "RunConfig",
    "config_modes",
    "emit_config",
    "experiment_plan",
    "initial_profile",
    "noise_model",
    "parse_config",
    "potential_params",
    "problem",
    "solver_options",
    "tracking_plan",
]
