"""surrokit: surrogate-index estimation of long-term A/B-test effects.

Estimate day-63 treatment effects from the first T post-allocation days via
linear auto-surrogate models, validate the estimates against a seeded
ground-truth simulator, and evaluate launch-decision agreement between
surrogate and direct reads.
"""

from .errors import (
    ArmLabelConflict,
    ControlAsTreatment,
    DataValidationError,
    DegenerateGroup,
    DegenerateVarianceWarning,
    DuplicateObservation,
    EmptyInput,
    InvalidConfig,
    InvalidCycle,
    InvalidRecall,
    KeyMismatch,
    MalformedRow,
    MissingDay,
    MissingPrePeriod,
    NoControlArm,
    NonFiniteOutcome,
    NoTreatmentArm,
    NumericalError,
    OutOfRange,
    RankDeficient,
    SurrokitError,
    TooFewRows,
    UnknownArm,
    ZeroVariance,
)
from .estimators import (
    DEFAULT_ALPHA,
    SE_FLOOR,
    Z_CRIT_95,
    EffectEstimate,
    EstimatorKind,
    SignificanceClass,
    build_estimate,
    direct_effect,
    estimate_to_record,
    mean_difference_effect,
    record_to_estimate,
    surrogate_effect,
    welch_se,
    z_test,
)
from .evaluation import (
    CLASS_ORDER,
    ConfusionMatrix3,
    DecisionPair,
    DistributionSummary,
    LaunchMetrics,
    capacity_gain,
    classify_pairs,
    confusion,
    excess_kurtosis,
    extra_experiments_needed,
    launch_metrics,
    scaled_distribution,
)
from .panel import (
    DEFAULT_HORIZON,
    ArmLabel,
    OutcomePanel,
    PanelSchema,
    UserRecord,
    days_in_range,
    load_panel,
    long_term_mean,
    panel_to_csv_text,
    window,
    write_panel,
)
from .simulator import (
    SimConfig,
    SimulatedExperiment,
    config_from_dict,
    config_to_dict,
    corpus_treatment_arms,
    load_config,
    novelty_profile,
    simulate_corpus,
    simulate_experiment,
)
from .surrogate import (
    FitDiagnostics,
    ModelSource,
    SurrogateModel,
    fit_least_squares,
    fit_pretest,
    fit_similar,
    model_from_dict,
    model_to_dict,
    predict,
    running_mean_model,
)

__version__ = "0.1.0"
