"""Two-stage additive forecaster: mean first, then variance.

Stage one fits the conditional mean with an identity link.  Stage two
fits the squared stage-one residuals with a log link, so the variance
surface is positive by construction and shrinks or widens with the
drivers of volatility rather than staying global.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import MissingFeature, ValidationError
from ..transform.frame import FeatureFrame
from .boost import boost_select
from .fit import IDENTITY, LOG, AdditiveModel, fit_additive
from .terms import TermSpec

DEFAULT_MEAN_TERMS = (
    TermSpec("categorical", ("DayType",)),
    TermSpec("by", ("TimeOfDay", "DayType")),
    TermSpec("spline", ("TimeOfYear",)),
    TermSpec("spline", ("Temperature",)),
    TermSpec("spline", ("SolarRadiance",)),
)

DEFAULT_VARIANCE_TERMS = (
    TermSpec("spline", ("TimeOfDay",)),
    TermSpec("tensor", ("DewPoint", "TimeOfDay")),
    TermSpec("spline", ("DailyAverageTemperature",)),
)

# relative floor: sigma never collapses below this fraction of the
# target's scale, so bands stay visible and downstream divisions safe
SIGMA_FLOOR_SCALE = 1e-6


@dataclass(frozen=True)
class Gam2Config:
    mean_terms: tuple[TermSpec, ...] = DEFAULT_MEAN_TERMS
    variance_terms: tuple[TermSpec, ...] = DEFAULT_VARIANCE_TERMS
    boosting: bool = False
    boost_steps: int = 150
    boost_step_size: float = 0.1
    lambdas: object = "gcv"
    sigma_floor_scale: float = SIGMA_FLOOR_SCALE

    @classmethod
    def from_config(cls, cfg: dict) -> "Gam2Config":
        kwargs = {}
        if "mean_terms" in cfg:
            kwargs["mean_terms"] = tuple(TermSpec.from_json(t) for t in cfg["mean_terms"])
        if "variance_terms" in cfg:
            kwargs["variance_terms"] = tuple(
                TermSpec.from_json(t) for t in cfg["variance_terms"]
            )
        if "boosting" in cfg:
            kwargs["boosting"] = bool(cfg["boosting"])
        if "boost_steps" in cfg:
            kwargs["boost_steps"] = int(cfg["boost_steps"])
        if "boost_step_size" in cfg:
            kwargs["boost_step_size"] = float(cfg["boost_step_size"])
        if "lambda" in cfg:
            kwargs["lambdas"] = cfg["lambda"]
        return cls(**kwargs)


@dataclass
class Gam2Artifact:
    mean_model: AdditiveModel
    variance_model: AdditiveModel
    sigma_floor: float
    train_metrics: dict = field(default_factory=dict)

    def required_features(self) -> list[str]:
        seen: list[str] = []
        for f in self.mean_model.features() + self.variance_model.features():
            if f not in seen:
                seen.append(f)
        return seen


@dataclass(frozen=True)
class ForecastOutput:
    timestamps: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    out_of_domain: np.ndarray


def fit_gam2(frame: FeatureFrame, config: Gam2Config = Gam2Config()) -> Gam2Artifact:
    """Train mean and variance stages on the frame's target column.

    Rows with a missing value in any required feature are dropped
    before fitting; training tolerates gaps, scoring does not.
    """
    if frame.target is None:
        raise ValidationError("frame has no target column")
    mean_terms = list(config.mean_terms)
    variance_terms = list(config.variance_terms)
    needed = {frame.target}
    for spec in (*mean_terms, *variance_terms):
        needed.update(spec.features)
    usable = frame.subset(frame.valid_rows(sorted(needed)))

    if config.boosting:
        selected = boost_select(
            usable, mean_terms, steps=config.boost_steps, step_size=config.boost_step_size
        )
        mean_terms = selected or mean_terms

    mean_model = fit_additive(usable, mean_terms, link=IDENTITY, lambdas=config.lambdas)
    y = usable.column(usable.target).values
    residuals = y - mean_model.predict(usable)

    sq_name = "__squared_residual__"
    var_frame = usable.subset(np.ones(usable.n, dtype=bool))
    var_frame.add_numeric(sq_name, residuals**2)
    var_frame.target = sq_name

    if config.boosting:
        selected = boost_select(
            var_frame,
            variance_terms,
            steps=config.boost_steps,
            step_size=config.boost_step_size,
        )
        variance_terms = selected or variance_terms

    variance_model = fit_additive(
        var_frame, variance_terms, link=LOG, lambdas=config.lambdas
    )

    sigma_floor = config.sigma_floor_scale * float(np.std(y))
    metrics = {
        "n": int(usable.n),
        "rmse": float(np.sqrt(np.mean(residuals**2))),
        "mae": float(np.mean(np.abs(residuals))),
        "mean_gcv": float(mean_model.fit_info["gcv"]),
        "variance_gcv": float(variance_model.fit_info["gcv"]),
    }
    return Gam2Artifact(
        mean_model=mean_model,
        variance_model=variance_model,
        sigma_floor=sigma_floor,
        train_metrics=metrics,
    )


def score(artifact: Gam2Artifact, frame: FeatureFrame) -> ForecastOutput:
    """Point forecast and predictive sigma for every frame row.

    Unlike training, scoring refuses missing inputs: a hole here means
    the caller failed to assemble covariates for the horizon, and a
    silently imputed forecast would be worse than a loud error.
    """
    required = artifact.required_features()
    frame.require(required)
    holes = [f for f in required if frame.column(f).missing.any()]
    if holes:
        raise MissingFeature(
            f"missing values at score time in: {', '.join(sorted(holes))}"
        )
    mu = artifact.mean_model.predict(frame)
    variance = artifact.variance_model.predict(frame)
    sigma = np.maximum(np.sqrt(np.maximum(variance, 0.0)), artifact.sigma_floor)
    flagged = artifact.mean_model.out_of_domain(frame) | artifact.variance_model.out_of_domain(frame)
    return ForecastOutput(
        timestamps=frame.timestamps.copy(),
        mu=mu,
        sigma=sigma,
        out_of_domain=flagged,
    )
