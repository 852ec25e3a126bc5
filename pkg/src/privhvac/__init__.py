"""Privacy-enhanced occupancy-based HVAC control.

Learn per-occupant mobility models, design count-report distortion channels
that trade mutual-information leakage against control performance, run the
model-predictive control loop on distorted reports, and measure what a
maximum-a-posteriori adversary can recover from them.
"""

from .adversary import (AttackConfig, ImpossibleObservationError,
                        InferenceResult, StateSpaceError,
                        constant_outside_attack, inference_accuracy,
                        map_infer_beam, map_infer_bruteforce,
                        trace_log_posterior)
from .config import (ConfigError, DatasetManifest, ExperimentConfig,
                     SweepSpec, WorldSpec, config_from_dict, load_config,
                     load_manifest)
from .dataio import (DataError, ingest_traces, load_closed_loop_log,
                     load_distortion, load_model, load_occupancy, load_tables,
                     load_traces, load_tradeoff, save_closed_loop_log,
                     save_distortion, save_model, save_occupancy,
                     save_schemes, save_tables, save_traces, save_tradeoff,
                     tables_cache_key)
from .distortion import (ConstraintTables, DesignConfig, DesignResult,
                         DistortionMatrix, InfeasibleRowError,
                         apply_distortion, build_constraint_tables,
                         design_distortion, dpi_check, fixed_schedule_series,
                         identity_scheme, mi_gradient, multinomial_scheme,
                         mutual_information, row_feasible, uniform_scheme)
from .harness import (SchemeComparison, SweepError, TradeoffRecord,
                      attack_baselines, auto_bracket_deltas,
                      calibrate_delta_to_mi, compare_schemes,
                      default_count_law, derive_rng, design_sweep,
                      run_tradeoff_sweep, synthesize_scaled_world)
from .kernels import BACKEND as kernel_backend
from .occupancy import (FhmmModel, LocationTrace, OccupancyMarginal,
                        OccupancySeries, TraceError, TransitionMatrix,
                        ZoneSet, exact_joint_mi_check, learn_transitions,
                        occupancy_from_traces, occupancy_marginal,
                        poisson_binomial_pmf, random_office_model,
                        sample_traces, stationary_distribution)
from .thermal import (ClosedLoopLog, ComfortBand, ControlSequence, HvacParams,
                      MpcConfig, MpcProblem, MpcSolution, Tariff,
                      TrajectoryResult, ZoneThermalParams,
                      closed_loop_simulate, simulate_trajectory, solve_mpc,
                      stage_cost, step_dynamics)

__all__ = [
    "__version__", "kernel_backend",
    # occupancy modelling
    "ZoneSet", "LocationTrace", "TransitionMatrix", "FhmmModel",
    "OccupancySeries", "OccupancyMarginal", "TraceError",
    "learn_transitions", "stationary_distribution", "occupancy_from_traces",
    "sample_traces", "occupancy_marginal", "poisson_binomial_pmf",
    "exact_joint_mi_check", "random_office_model",
    # thermal model and MPC
    "ZoneThermalParams", "HvacParams", "ComfortBand", "Tariff", "MpcProblem",
    "MpcConfig", "ControlSequence", "TrajectoryResult", "MpcSolution",
    "ClosedLoopLog", "step_dynamics", "stage_cost", "simulate_trajectory",
    "solve_mpc", "closed_loop_simulate",
    # distortion design
    "DistortionMatrix", "ConstraintTables", "DesignConfig", "DesignResult",
    "InfeasibleRowError", "mutual_information", "mi_gradient",
    "identity_scheme", "uniform_scheme", "multinomial_scheme",
    "fixed_schedule_series", "apply_distortion", "dpi_check",
    "build_constraint_tables", "row_feasible", "design_distortion",
    # adversary
    "AttackConfig", "InferenceResult", "ImpossibleObservationError",
    "StateSpaceError", "trace_log_posterior", "map_infer_beam",
    "map_infer_bruteforce", "inference_accuracy", "constant_outside_attack",
    # experiment harness
    "TradeoffRecord", "SchemeComparison", "SweepError", "derive_rng",
    "default_count_law", "auto_bracket_deltas", "design_sweep",
    "run_tradeoff_sweep", "attack_baselines", "compare_schemes",
    "calibrate_delta_to_mi", "synthesize_scaled_world",
    # configuration and file formats
    "ConfigError", "WorldSpec", "SweepSpec", "ExperimentConfig",
    "DatasetManifest", "load_config", "config_from_dict", "load_manifest",
    "DataError", "save_traces", "load_traces", "ingest_traces",
    "save_occupancy", "load_occupancy", "save_distortion", "load_distortion",
    "save_tables", "load_tables", "tables_cache_key", "save_closed_loop_log",
    "load_closed_loop_log", "save_model", "load_model", "save_tradeoff",
    "load_tradeoff", "save_schemes",
]
__version__ = "0.1.0"
