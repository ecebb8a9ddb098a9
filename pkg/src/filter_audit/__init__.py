"""Black-box counterfactual audits for content-filtering platforms."""

from .audit import (
    AuditConfig,
    AuditVerdict,
    BatchVerdict,
    CounterfactualPair,
    Estimator,
    Hypothesis,
    InfoPoint,
    audit_batch,
    audit_estimates,
    audit_pair,
    audit_statistics,
    audit_symmetrized,
    audit_threshold,
)
from .config import parse_config
from .decisions import (
    AffineMap,
    Choice,
    DecisionRecord,
    EstimatorSpec,
    ValuePair,
    calibrate_eta,
    decide,
    distinguishability_probe,
)
from .errors import (
    AuditError,
    ConfigParseError,
    DomainError,
    FilterAuditError,
    InsufficientDataError,
    ProtocolError,
    SingularityError,
    ValidationError,
    WitnessNotFoundError,
)
from .families import (
    Bernoulli,
    FamilyId,
    Feed,
    Gaussian1D,
    GaussianKnownVar,
    ModelFamily,
    Poisson,
    fisher_information,
    get_family,
    log_density,
    mle,
    mvue,
    sample_feed,
)
from .montecarlo import CurvePoint, Experiment, ExperimentPlan, run_experiment, summarize
from .platforms import AffineShift, Constant, Lookup, PlatformSpec, SimulatedPlatform, describe_platform, make_platform
from .regcost import (
    FeasibleQuery,
    RegCostReport,
    RewardKind,
    RewardSpec,
    cost_of_regulation,
    diversity_compare,
    is_feasible,
    statistic_path,
    zero_cost_witness,
)
from .reports import emit_report
from .special import chi2_isf, chi2_quantile

__version__ = "0.1.0"

__all__ = [
    "AffineMap",
    "AffineShift",
    "AuditConfig",
    "AuditError",
    "AuditVerdict",
    "BatchVerdict",
    "Bernoulli",
    "Choice",
    "ConfigParseError",
    "Constant",
    "CounterfactualPair",
    "CurvePoint",
    "DecisionRecord",
    "DomainError",
    "Estimator",
    "EstimatorSpec",
    "Experiment",
    "ExperimentPlan",
    "FamilyId",
    "FeasibleQuery",
    "Feed",
    "FilterAuditError",
    "Gaussian1D",
    "GaussianKnownVar",
    "Hypothesis",
    "InfoPoint",
    "InsufficientDataError",
    "Lookup",
    "ModelFamily",
    "PlatformSpec",
    "Poisson",
    "ProtocolError",
    "RegCostReport",
    "RewardKind",
    "RewardSpec",
    "SimulatedPlatform",
    "SingularityError",
    "ValidationError",
    "ValuePair",
    "WitnessNotFoundError",
    "audit_batch",
    "audit_estimates",
    "audit_pair",
    "audit_statistics",
    "audit_symmetrized",
    "audit_threshold",
    "calibrate_eta",
    "chi2_isf",
    "chi2_quantile",
    "cost_of_regulation",
    "decide",
    "describe_platform",
    "distinguishability_probe",
    "diversity_compare",
    "emit_report",
    "fisher_information",
    "get_family",
    "is_feasible",
    "log_density",
    "make_platform",
    "mle",
    "mvue",
    "parse_config",
    "run_experiment",
    "sample_feed",
    "statistic_path",
    "summarize",
    "zero_cost_witness",
]
