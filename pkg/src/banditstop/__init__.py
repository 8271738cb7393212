"""Batched two-arm linear contextual bandit simulation with early stopping,
Gram-weighted online estimation, and post-stopping conditional inference.
"""

from .bounds import (
    AdditiveCost,
    BoundConstants,
    CostAdjustedRegret,
    ThresholdCost,
    calibrate_tail_constant,
    chebyshev_radius,
    constants_from_context,
    cost_adjusted_regret,
    cumulative_cost_adjusted_regret,
    regret_bound_from_radius,
    regret_bound_from_variance,
    regret_bound_time,
    tail_radius,
)
from .errors import (
    ConfigError,
    ContractError,
    DomainError,
    EstimatorUnavailable,
    InfeasibleConditioning,
    UnsupportedCaseError,
)
from .estimators import (
    BatchData,
    BatchOlsFit,
    IvwEstimate,
    KnownSigma,
    ResidualSigma,
    SufficientStats,
    fit_batch_ols,
    ivw_combine,
    limit_arm_second_moment,
    residual_noise_factors,
    state_from_sufficient_stats,
    sufficient_statistics,
    variance_known_sigma,
    variance_residual,
)
from .harness import (
    BoundsConfig,
    CalibrationConfig,
    ExperimentConfig,
    StoppingConfig,
    aggregate,
    config_from_dict,
    config_to_dict,
    emit_reports,
    load_config,
    prepare,
    record_from_trajectory,
    replay_stop_decisions,
    run_experiment,
    run_replications,
)
from .inference import (
    ConditionalSamplerConfig,
    ConditionalSamples,
    bootstrap_interval,
    run_inference,
    sample_conditional,
    test_hypothesis,
)
from .model import (
    AssumptionReport,
    ContextSpec,
    TrueModel,
    TruncatedGaussian,
    UniformBox,
    check_assumptions,
    estimate_policy_regret,
    realize_rewards,
    sample_batch_contexts,
    uniform_cube_spec,
)
from .policies import (
    BatchActions,
    ClipSchedule,
    EpsGreedy,
    PolicyState,
    Schedule,
    Thompson,
    Ucb,
    UniformRandom,
    action_probabilities,
    action_probability,
    clip,
    constant_clip,
    select_actions,
    thompson_sampled_probability,
    update_state,
)
from .records import ExperimentRecord, InferenceResult, SimulationSetup
from .rng import derive_seed, make_rng, mix64, substream_seed
from .simulate import Trajectory, simulate_trajectory
from .stopping import (
    OnlineOpportunity,
    OnlineThreshold,
    PredeterminedOpportunity,
    PredeterminedThreshold,
    StopDecision,
    StoppingRuleSpec,
    StopTimePrediction,
    closed_form_stop_time,
    evaluate,
    scan_stop_time,
    spectral_norm,
)

__version__ = "0.1.0"
