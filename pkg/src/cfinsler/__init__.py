"""Numerical engine for strongly pseudoconvex complex Finsler metrics."""

__version__ = "0.1.0"

from .jets import FinslerPoint, TaylorJet, WirtingerIndex
from .metrics import (
    FinslerMetric,
    MetricJet,
    builtin_metric,
    dsl_metric,
    evaluate_metric_jet,
    homogeneity_residuals,
    levi_data,
    metric_from_spec,
)

__all__ = [
    "FinslerPoint",
    "TaylorJet",
    "WirtingerIndex",
    "FinslerMetric",
    "MetricJet",
    "builtin_metric",
    "dsl_metric",
    "evaluate_metric_jet",
    "homogeneity_residuals",
    "levi_data",
    "metric_from_spec",
    "__version__",
]
