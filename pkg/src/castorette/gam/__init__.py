from .basis import SplineBasis, build_basis, second_difference_penalty
from .terms import (
    BY,
    CATEGORICAL,
    SPLINE,
    TENSOR,
    Term,
    TermSpec,
    build_term,
)
from .fit import IDENTITY, LOG, AdditiveModel, fit_additive
from .boost import boost_select
from .gam2 import (
    DEFAULT_MEAN_TERMS,
    DEFAULT_VARIANCE_TERMS,
    ForecastOutput,
    Gam2Artifact,
    Gam2Config,
    fit_gam2,
    score,
)
from .serialize import artifact_from_blob, artifact_to_blob, validate_blob

__all__ = [
    "SplineBasis",
    "build_basis",
    "second_difference_penalty",
    "SPLINE",
    "TENSOR",
    "CATEGORICAL",
    "BY",
    "Term",
    "TermSpec",
    "build_term",
    "IDENTITY",
    "LOG",
    "AdditiveModel",
    "fit_additive",
    "boost_select",
    "Gam2Config",
    "Gam2Artifact",
    "ForecastOutput",
    "DEFAULT_MEAN_TERMS",
    "DEFAULT_VARIANCE_TERMS",
    "fit_gam2",
    "score",
    "artifact_to_blob",
    "artifact_from_blob",
    "validate_blob",
]
