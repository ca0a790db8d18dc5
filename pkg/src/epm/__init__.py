"""Empirical performance models: predict algorithm runtime from instance
features and parameter configurations."""

from .data import (
    ColumnInfo,
    Configuration,
    ConfigurationSpace,
    Dataset,
    FeatureVector,
    ParameterDef,
    PredictiveDistribution,
    RunRecord,
    assemble_dataset,
)
from .evaluation import MetricReport, evaluate_predictions, run_experiment
from .models import EPM, FAMILIES, make_model
from .serialize import deserialize_model, serialize_model

__version__ = "0.1.0"

__all__ = [
    "ColumnInfo", "Configuration", "ConfigurationSpace", "Dataset", "EPM", "FAMILIES",
    "FeatureVector", "MetricReport", "ParameterDef", "PredictiveDistribution", "RunRecord",
    "assemble_dataset", "deserialize_model", "evaluate_predictions", "make_model",
    "run_experiment", "serialize_model",
]
