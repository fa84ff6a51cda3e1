"""Contest-equilibrium toolkit.

Computes Nash-equilibrium effort thresholds for multi-group meritocratic
selection contests with asymmetric valuations, evaluates representation /
welfare / revenue metrics, simulates finite-population best-response
dynamics, and optimizes cost-constrained fairness interventions.
"""

from .densities import (
    Biased,
    CdfQuery,
    DensitySpec,
    Mixture,
    Pareto,
    PointMass,
    StochasticBias,
    TruncNormal,
    Uniform,
    convolved_cdf,
    density_from_dict,
    scaled,
    stochastic_bias_density_cdf,
)
from .equilibrium import (
    ContestSpec,
    GroupSpec,
    ThresholdPolicy,
    effort,
    finite_shift,
    pareto_closed_threshold,
    quota_thresholds,
    solve_threshold,
    two_group_uniform_contest,
    uniform_ability_closed_threshold,
    uniform_closed_threshold,
)
from .errors import (
    CalibrationRangeError,
    ContestError,
    DegenerateMetricError,
    DomainBoundsError,
    FiniteShiftPreconditionError,
    InfeasibleTargetError,
    InfiniteMeanError,
    NonUniqueThresholdError,
    SpecValidationError,
    UnsupportedConfigurationError,
)
from .finite_contest import (
    DynamicsHyper,
    DynamicsTrace,
    FiniteContest,
    GridPolicy,
    SimulationReport,
    run_dynamics,
    simulate_contest,
    top_k_prob,
    two_agent_mc_revenue,
    two_agent_policies,
    two_agent_revenue,
    undiff_finite_policy,
    win_prob_two_group,
)
from .intervention import (
    InterventionSolution,
    InterventionSpec,
    calibrate_rho,
    crossover_tau,
    eval_objective,
    optimize,
    sweep_tau,
)
from .metrics import (
    MeritFn,
    MetricsReport,
    biased_metrics_at,
    general_metrics,
    uniform_metrics,
)

__version__ = "0.1.0"
