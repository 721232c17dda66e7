"""Competing-risks survival analysis with a multivariate Weibull dependence model."""

__version__ = "0.1.0"

from .errors import DataError, DomainError, IdentifiabilityError, NonFiniteLikelihood, SingularHessianError
from .model import (
    DimensionParams,
    ModelParams,
    joint_survival,
    marginal_hazard,
    marginal_survival,
    pearson_correlation,
    product_moment,
    survival_partial,
)
from .likelihood import (
    DEFAULT_CENSOR_TIME,
    CensoringPattern,
    Cohort,
    Observation,
    RegressionParams,
    RegressionSpec,
    observation_loglik,
    pattern_of,
    resolve_scales,
    total_loglik,
)
from .estimation import FitConfig, FitResult, fit
from .inference import HazardCurve, HazardRatio, correlation_with_ci, hazard_curve, hazard_ratio
from .nonparam import StepCurve, km_cumhaz, km_survival
from .simulate import SimConfig, generate_dataset, sample_event_times, sample_positive_stable
from .ingest import CohortSchema, IngestReport, load_cohort, load_regression_spec, write_cohort
