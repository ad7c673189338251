"""Critical two-sex branching processes in i.i.d. random environments.

Monte Carlo simulation of the process, its associated random walk and
hitting time, the first-passage limit law of the scaled extinction
time, executable condition audits, and experiment orchestration with
Kolmogorov-Smirnov verification at desk scale.
"""

from .errors import (
    BbpreError,
    ConfigurationError,
    DegenerateModelError,
    ExcessCensoringError,
    OverflowGuardError,
)
from .limit_law import FirstPassageLaw
from .model import (
    ConditionCheck,
    ConditionReport,
    ConstantMap,
    ConstantMeanMap,
    EnvironmentModel,
    ExpMeanMap,
    MatingRule,
    OffspringModel,
    TableMap,
    analytic_sigma_xi,
    asexual,
    audit_conditions,
    check_approximation,
    check_homogeneity,
    check_lipschitz,
    check_superadditivity,
    log_noise_scale,
    mate_array,
    monogamous,
    noise_components,
    polygamous,
    walk_increment,
    walk_increments,
)
from .rng import derive_stream
from .simulator import (
    CoupledRun,
    DiagnosticTable,
    FrozenBundle,
    StepRecord,
    Trajectory,
    bundle_diagnostics,
    evolve_step,
    residual_diagnostics,
    run_coupled,
    run_frozen_bundle,
    run_until_extinction,
    run_with_environment,
)
from .stats import (
    EmpiricalCdf,
    ExperimentConfig,
    LemmaSweep,
    LemmaSweepConfig,
    ReplicateRecord,
    SummaryReport,
    SummaryRow,
    default_max_steps,
    empirical_cdf,
    ks_statistic,
    lemma_bound_sweep,
    loglog_slope,
    run_experiment,
    run_extinction_records,
    run_replicates,
)
from .walk import (
    HittingResult,
    HittingSpec,
    ThetaDistribution,
    WalkState,
    hitting_time,
    model_increment_source,
    theta_distribution,
    walk_step,
)

__version__ = "0.1.0"
