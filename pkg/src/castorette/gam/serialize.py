"""Versioned JSON serialisation of trained forecaster artifacts.

Floats are written with ``repr`` semantics (shortest round-trip), so
serialise -> load -> serialise is byte-identical and loaded models
predict exactly what the originals did.
"""

from __future__ import annotations

import json

import numpy as np

from ..errors import CorruptParams
from .basis import SplineBasis
from .fit import AdditiveModel
from .gam2 import Gam2Artifact
from .terms import Term, TermSpec

FORMAT = "gam2/1"


def _array(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _term_to_json(term: Term) -> dict:
    return {
        "spec": term.spec.to_json(),
        "bases": [{"feature": b.feature, "knots": list(b.knots)} for b in term.bases],
        "categories": list(term.categories),
        "marginal_maps": [_array(m) for m in term.marginal_maps],
        "coef": _array(term.coef),
    }


def _term_from_json(doc: dict) -> Term:
    return Term(
        spec=TermSpec.from_json(doc["spec"]),
        bases=tuple(
            SplineBasis(feature=b["feature"], knots=tuple(b["knots"]))
            for b in doc["bases"]
        ),
        categories=tuple(doc["categories"]),
        marginal_maps=tuple(np.asarray(m, dtype=float) for m in doc["marginal_maps"]),
        coef=np.asarray(doc["coef"], dtype=float),
    )


def _model_to_json(model: AdditiveModel) -> dict:
    return {
        "link": model.link,
        "intercept": float(model.intercept),
        "lambdas": [float(v) for v in model.lambdas],
        "domains": {
            "numeric": {k: [float(v[0]), float(v[1])] for k, v in model.domains["numeric"].items()},
            "categorical": {k: list(v) for k, v in model.domains["categorical"].items()},
        },
        "terms": [_term_to_json(t) for t in model.terms],
    }


def _model_from_json(doc: dict) -> AdditiveModel:
    return AdditiveModel(
        intercept=float(doc["intercept"]),
        terms=[_term_from_json(t) for t in doc["terms"]],
        link=doc["link"],
        lambdas=tuple(float(v) for v in doc["lambdas"]),
        domains={
            "numeric": {k: (float(v[0]), float(v[1])) for k, v in doc["domains"]["numeric"].items()},
            "categorical": {k: list(v) for k, v in doc["domains"]["categorical"].items()},
        },
    )


def artifact_to_blob(artifact: Gam2Artifact) -> str:
    doc = {
        "format": FORMAT,
        "sigma_floor": float(artifact.sigma_floor),
        "train_metrics": artifact.train_metrics,
        "mean": _model_to_json(artifact.mean_model),
        "variance": _model_to_json(artifact.variance_model),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def artifact_from_blob(blob: str) -> Gam2Artifact:
    try:
        doc = json.loads(blob)
    except (TypeError, json.JSONDecodeError) as exc:
        raise CorruptParams(f"params blob is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise CorruptParams(
            f"unsupported params format {doc.get('format')!r}"
            if isinstance(doc, dict)
            else "params blob must be a JSON object"
        )
    try:
        return Gam2Artifact(
            mean_model=_model_from_json(doc["mean"]),
            variance_model=_model_from_json(doc["variance"]),
            sigma_floor=float(doc["sigma_floor"]),
            train_metrics=dict(doc.get("train_metrics", {})),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptParams(f"params blob is structurally invalid: {exc}") from None


def validate_blob(blob: str) -> None:
    artifact_from_blob(blob)
