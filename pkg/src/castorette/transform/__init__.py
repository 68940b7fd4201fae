from .pelt import (
    MEAN_NORMAL,
    MEANVAR_NORMAL,
    Segmentation,
    pelt,
    segment_cost_fn,
    segmentation_cost,
)
from .cleaning import (
    CleaningConfig,
    TransferFunction,
    fit_transfer,
    iterative_segment_removal,
    realign,
    remove_outliers,
)
from .frame import Column, FeatureFrame
from .features import FeatureSpec, engineer_features, daily_stat_name

__all__ = [
    "MEAN_NORMAL",
    "MEANVAR_NORMAL",
    "Segmentation",
    "pelt",
    "segment_cost_fn",
    "segmentation_cost",
    "CleaningConfig",
    "TransferFunction",
    "fit_transfer",
    "iterative_segment_removal",
    "realign",
    "remove_outliers",
    "Column",
    "FeatureFrame",
    "FeatureSpec",
    "engineer_features",
    "daily_stat_name",
]
