"""Belief-MDP reduction toolkit.

Turns stochastic-equation control models with hidden state into fully
observed belief problems: kernel estimation, Bayes filtering (exact,
Kalman, particle), continuity diagnostics (weak / total-variation /
semi-uniform moduli, diffeomorphism checks, set convergence), cost
compactness probes, and value iteration on a belief lattice.
"""

__version__ = "0.1.0"

from .aumann import (
    AumannMap,
    FiniteSupportKernel,
    GaussianFamilyKernel,
    build_aumann_map,
    gaussian_correlation_kernel,
)
from .beliefgrid import BeliefGrid, simplex_grid
from .beliefs import (
    Belief,
    FiniteBelief,
    GaussianBelief,
    ParticleBelief,
    belief_summary,
)
from .catalog import (
    CATALOG_NAMES,
    CatalogError,
    catalog_model,
    fixture_model,
    model_from_json,
    model_to_json,
)
from .config import ExperimentConfig, parse_config, validate_config
from .continuity import ContinuityProfile, continuity_profile, profile_csv
from .costs import (
    CostSpec,
    ProbeReport,
    estimation_cost,
    inventory_cost,
    kinf_compact_probe,
    lift_cost,
    quadratic_cost,
    table_cost,
)
from .diffeo import DiffeoReport, DiffeoTolerances, check_diffeomorphic, noise_jacobian
from .distances import DistanceEstimate, bl_distance, make_bl_dictionary, tv_distance
from .feller import FellerModulusReport, feller_csv, feller_modulus, union_sup
from .filtering import (
    DegenerateUpdateError,
    FilterStep,
    SingularInnovationError,
    bayes_update,
    filter_kernel_sample,
    kalman_step,
    predictive_observation,
    sample_belief,
)
from .fixtures import load_fixture
from .gridfilter import gaussian_on_grid, grid_bayes_oracle
from .inversion import (
    InversionResult,
    SingularJacobianError,
    change_of_variables_density,
    density_on_grid,
    newton_invert,
)
from .kernels import (
    EmpiricalKernel,
    GriddedKernel,
    joint_kernel,
    kernel_from_json,
    kernel_to_csv,
    kernel_to_json,
    observation_kernel,
    observation_kernel1,
    pushforward_kernel,
    transition_kernel,
)
from .models import (
    FiniteTablePOMDP,
    LssmCoefficients,
    StochasticControlModel,
    initial_observe,
    observe,
    observe1,
    step_state,
)
from .noise import Box, NoiseDistribution, gaussian, noise_from_json, noise_to_json, point_mass, uniform_box, exponential
from .rollout import SimulationReport, simulate_policy
from .runner import TaskResult, TaskSetupError, run_task
from .seeding import derive_seed, substream
from .setconv import Ball, SetConvergenceReport, set_convergence_check
from .solver import (
    ValueFunction,
    ValueIterationResult,
    bellman_backup,
    optimal_action_set,
    value_iteration,
)

__all__ = [
    "__version__",
    "AumannMap", "FiniteSupportKernel", "GaussianFamilyKernel",
    "build_aumann_map", "gaussian_correlation_kernel",
    "BeliefGrid", "simplex_grid",
    "Belief", "FiniteBelief", "GaussianBelief", "ParticleBelief", "belief_summary",
    "CATALOG_NAMES", "CatalogError", "catalog_model", "fixture_model",
    "model_from_json", "model_to_json",
    "ExperimentConfig", "parse_config", "validate_config",
    "ContinuityProfile", "continuity_profile", "profile_csv",
    "CostSpec", "ProbeReport", "estimation_cost", "inventory_cost",
    "kinf_compact_probe", "lift_cost", "quadratic_cost", "table_cost",
    "DiffeoReport", "DiffeoTolerances", "check_diffeomorphic", "noise_jacobian",
    "DistanceEstimate", "bl_distance", "make_bl_dictionary", "tv_distance",
    "FellerModulusReport", "feller_csv", "feller_modulus", "union_sup",
    "DegenerateUpdateError", "FilterStep", "SingularInnovationError",
    "bayes_update", "filter_kernel_sample", "kalman_step",
    "predictive_observation", "sample_belief",
    "load_fixture",
    "gaussian_on_grid", "grid_bayes_oracle",
    "InversionResult", "SingularJacobianError", "change_of_variables_density",
    "density_on_grid", "newton_invert",
    "EmpiricalKernel", "GriddedKernel", "joint_kernel", "kernel_from_json",
    "kernel_to_csv", "kernel_to_json", "observation_kernel",
    "observation_kernel1", "pushforward_kernel", "transition_kernel",
    "FiniteTablePOMDP", "LssmCoefficients", "StochasticControlModel",
    "initial_observe", "observe", "observe1", "step_state",
    "Box", "NoiseDistribution", "gaussian", "noise_from_json", "noise_to_json",
    "point_mass", "uniform_box", "exponential",
    "SimulationReport", "simulate_policy",
    "TaskResult", "TaskSetupError", "run_task",
    "derive_seed", "substream",
    "Ball", "SetConvergenceReport", "set_convergence_check",
    "ValueFunction", "ValueIterationResult", "bellman_backup",
    "optimal_action_set", "value_iteration",
]
