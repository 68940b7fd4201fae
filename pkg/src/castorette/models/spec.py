"""Declarative model pipelines and deployment schedules.

A pipeline document says *what* a model needs (covariate contexts,
cleaning policy, feature recipe, term structure), not how to run it.
Validation is eager and total: every problem in the document is
reported in one pass, each diagnostic naming the step it belongs to.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ValidationError
from ..gam.gam2 import Gam2Config
from ..gam.terms import BY, CATEGORICAL, TermSpec
from ..timeutil import (
    format_duration,
    format_rfc3339,
    parse_duration,
    parse_rfc3339,
)
from ..transform.cleaning import CleaningConfig
from ..transform.features import (
    CALENDAR_FEATURES,
    DAY_TYPE,
    SEASON,
    FeatureSpec,
    daily_stat_name,
    lag_name,
)

TASK_TRAIN = "train"
TASK_SCORE = "score"

TRANSFORM_STEPS = ("remove_outliers", "segment_removal", "realign", "features")

# calendar features that are category-valued; everything else a
# pipeline can produce is numeric
CATEGORICAL_FEATURES = (DAY_TYPE, SEASON)


@dataclass(frozen=True)
class DeploymentConfig:
    """When a task runs: at ``time``, then every ``repeat`` seconds
    until ``until`` (inclusive).  ``repeat=0`` means exactly once."""

    task: str
    time: int
    repeat: int = 0
    until: int | None = None

    def __post_init__(self):
        if self.task not in (TASK_TRAIN, TASK_SCORE):
            raise ValidationError(f"unknown task {self.task!r}")
        if self.repeat < 0:
            raise ValidationError("repeat must be non-negative")
        # until < time is allowed: an already-expired schedule simply
        # never fires

    def to_json(self) -> dict:
        doc = {"task": self.task, "time": format_rfc3339(self.time)}
        if self.repeat:
            doc["repeat"] = format_duration(self.repeat)
        if self.until is not None:
            doc["until"] = format_rfc3339(self.until)
        return doc


def parse_deployment(doc: dict, expect_task: str | None = None) -> DeploymentConfig:
    try:
        task = doc["task"]
        time = parse_rfc3339(doc["time"])
        repeat = parse_duration(doc["repeat"]) if doc.get("repeat") else 0
        until = parse_rfc3339(doc["until"]) if doc.get("until") else None
    except KeyError as exc:
        raise ValidationError(f"schedule is missing {exc.args[0]!r}") from None
    except ValueError as exc:
        raise ValidationError(f"schedule has a bad field: {exc}") from None
    if expect_task is not None and task != expect_task:
        raise ValidationError(f"schedule task must be {expect_task!r}, got {task!r}")
    return DeploymentConfig(task=task, time=time, repeat=repeat, until=until)


@dataclass(frozen=True)
class ContextRef:
    entity: str
    signal: str

    def to_json(self) -> dict:
        return {"entity": self.entity, "signal": self.signal}


@dataclass(frozen=True)
class CovariateRef:
    entity: str
    signal: str
    alias: str

    def to_json(self) -> dict:
        doc = {"entity": self.entity, "signal": self.signal}
        if self.alias != self.signal:
            doc["as"] = self.alias
        return doc


@dataclass(frozen=True)
class LoadSpec:
    covariates: tuple[CovariateRef, ...]
    train_window: int
    score_horizon: int
    holidays: frozenset = frozenset()

    def to_json(self) -> dict:
        return {
            "covariates": [c.to_json() for c in self.covariates],
            "train_window": format_duration(self.train_window),
            "score_horizon": format_duration(self.score_horizon),
            "holidays": sorted(self.holidays),
        }


@dataclass(frozen=True)
class TransformStep:
    name: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"step": self.name, **self.params}


@dataclass(frozen=True)
class PipelineSpec:
    load: LoadSpec
    transform: tuple[TransformStep, ...]
    train: Gam2Config
    train_doc: dict = field(default_factory=dict, compare=False)

    def feature_spec(self) -> FeatureSpec:
        for step in self.transform:
            if step.name == "features":
                return FeatureSpec.from_config(step.params)
        raise ValidationError("pipeline has no features step")

    def cleaning_config(self) -> CleaningConfig:
        merged: dict = {}
        for step in self.transform:
            if step.name in ("remove_outliers", "segment_removal"):
                merged.update(step.params)
        known = ("allow_negative", "max_constant_run", "pelt_penalty",
                 "deviation_threshold", "min_remaining_fraction")
        return CleaningConfig(**{k: merged[k] for k in known if k in merged})

    def has_step(self, name: str) -> bool:
        return any(s.name == name for s in self.transform)

    def to_json(self) -> dict:
        return {
            "load": self.load.to_json(),
            "transform": [s.to_json() for s in self.transform],
            "train": dict(self.train_doc),
            "score": {},
        }


class _Diagnostics:
    def __init__(self):
        self.items: list[dict] = []

    def add(self, step: str, message: str) -> None:
        self.items.append({"step": step, "message": message})

    def raise_if_any(self, what: str) -> None:
        if self.items:
            lines = "; ".join(f"{d['step']}: {d['message']}" for d in self.items)
            raise ValidationError(f"{what} failed validation: {lines}",
                                  diagnostics=self.items)


def _parse_covariates(doc, diag: _Diagnostics) -> list[CovariateRef]:
    out = []
    for i, c in enumerate(doc):
        step = f"load.covariates[{i}]"
        if not isinstance(c, dict) or "entity" not in c or "signal" not in c:
            diag.add(step, "covariate needs entity and signal")
            continue
        out.append(CovariateRef(
            entity=str(c["entity"]),
            signal=str(c["signal"]),
            alias=str(c.get("as", c["signal"])),
        ))
    return out


def _parse_load(doc: dict, diag: _Diagnostics) -> LoadSpec | None:
    covariates = _parse_covariates(doc.get("covariates", []), diag)
    window = horizon = 0
    try:
        window = parse_duration(doc.get("train_window", "P30D"))
    except ValueError as exc:
        diag.add("load.train_window", str(exc))
    try:
        horizon = parse_duration(doc.get("score_horizon", "PT24H"))
    except ValueError as exc:
        diag.add("load.score_horizon", str(exc))
    if window <= 0:
        diag.add("load.train_window", "training window must be positive")
    if horizon <= 0:
        diag.add("load.score_horizon", "scoring horizon must be positive")
    return LoadSpec(
        covariates=tuple(covariates),
        train_window=window,
        score_horizon=horizon,
        holidays=frozenset(str(d) for d in doc.get("holidays", [])),
    )


def _parse_transform(doc, diag: _Diagnostics) -> tuple[TransformStep, ...]:
    steps = []
    features_at = []
    for i, s in enumerate(doc):
        step = f"transform[{i}]"
        if not isinstance(s, dict) or "step" not in s:
            diag.add(step, "transform step needs a 'step' name")
            continue
        name = s["step"]
        if name not in TRANSFORM_STEPS:
            diag.add(step, f"unknown transform step {name!r}")
            continue
        params = {k: v for k, v in s.items() if k != "step"}
        if name == "features":
            features_at.append(i)
            try:
                FeatureSpec.from_config(params)
            except (ValidationError, KeyError, TypeError) as exc:
                diag.add(step, f"bad feature config: {exc}")
        steps.append(TransformStep(name=name, params=params))
    if len(features_at) != 1:
        diag.add("transform", "pipeline needs exactly one features step")
    elif steps and steps[-1].name != "features":
        diag.add("transform", "features must be the final transform step")
    if steps and len(features_at) == 1:
        try:
            merged = {}
            for st in steps:
                if st.name in ("remove_outliers", "segment_removal"):
                    merged.update(st.params)
            known = ("allow_negative", "max_constant_run", "pelt_penalty",
                     "deviation_threshold", "min_remaining_fraction")
            CleaningConfig(**{k: merged[k] for k in known if k in merged})
        except ValidationError as exc:
            diag.add("transform", f"bad cleaning config: {exc}")
    return tuple(steps)


def _feature_universe(spec: FeatureSpec) -> tuple[set, set]:
    numeric = {f for f in spec.calendar if f not in CATEGORICAL_FEATURES}
    numeric |= set(spec.passthrough)
    numeric |= {daily_stat_name(s, c) for s, c in spec.daily}
    numeric |= {lag_name(h) for h in spec.lags}
    categorical = {f for f in spec.calendar if f in CATEGORICAL_FEATURES}
    return numeric, categorical


def _check_terms(label, specs, numeric, categorical, diag: _Diagnostics) -> None:
    for j, term in enumerate(specs):
        step = f"train.{label}[{j}]"
        for f in term.features:
            if f not in numeric and f not in categorical:
                diag.add(step, f"feature {f!r} is not produced by the pipeline")
        if term.kind == CATEGORICAL and term.features[0] not in categorical:
            diag.add(step, f"feature {term.features[0]!r} is not categorical")
        if term.kind == BY:
            cont, cat = term.features
            if cont not in numeric:
                diag.add(step, f"feature {cont!r} must be numeric")
            if cat not in categorical:
                diag.add(step, f"feature {cat!r} must be categorical")
        if term.kind in ("spline", "tensor"):
            for f in term.features:
                if f in categorical:
                    diag.add(step, f"feature {f!r} is categorical, not numeric")


def parse_pipeline(doc: dict, diag: _Diagnostics) -> PipelineSpec | None:
    """Parse and statically validate a pipeline document.

    Returns the parsed spec even when diagnostics were recorded so the
    caller can report every problem at once; the caller decides
    whether to raise.
    """
    load = _parse_load(doc.get("load", {}), diag)
    transform = _parse_transform(doc.get("transform", []), diag)
    train_doc = dict(doc.get("train", {}))
    try:
        train = Gam2Config.from_config(train_doc)
    except (ValidationError, KeyError, TypeError) as exc:
        diag.add("train", f"bad training config: {exc}")
        train = Gam2Config()

    feature_spec = None
    for step in transform:
        if step.name == "features":
            try:
                feature_spec = FeatureSpec.from_config(step.params)
            except ValidationError:
                pass
    if feature_spec is not None:
        numeric, categorical = _feature_universe(feature_spec)
        aliases = {c.alias for c in load.covariates}
        for name in feature_spec.passthrough:
            if name not in aliases:
                diag.add("transform", f"passthrough {name!r} is not a covariate alias")
        for _stat, cov in feature_spec.daily:
            if cov not in aliases:
                diag.add("transform", f"daily stat over unknown covariate {cov!r}")
        if not load.covariates and not feature_spec.lags:
            diag.add("load.covariates",
                     "model needs at least one covariate or lag feature")
        _check_terms("mean_terms", train.mean_terms, numeric, categorical, diag)
        _check_terms("variance_terms", train.variance_terms, numeric, categorical, diag)
    return PipelineSpec(load=load, transform=transform, train=train,
                        train_doc=train_doc)
