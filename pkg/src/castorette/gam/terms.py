"""Additive model terms: smooth, categorical, and interaction effects.

A term owns its raw design matrix, its roughness penalty, and its
identifiability constraints.  Fitting reparameterises each term into
the null space of its constraints; the full-length coefficient vector
is mapped back afterwards so prediction is a plain matrix product.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import block_diag, null_space

from ..errors import DegenerateFeature, ValidationError
from ..transform.frame import FeatureFrame
from .basis import SplineBasis, build_basis, second_difference_penalty

SPLINE = "spline"
TENSOR = "tensor"
CATEGORICAL = "categorical"
BY = "by"

_ARITY = {SPLINE: 1, TENSOR: 2, CATEGORICAL: 1, BY: 2}


@dataclass(frozen=True)
class TermSpec:
    kind: str
    features: tuple[str, ...]
    knots: int = 8

    def __post_init__(self):
        if self.kind not in _ARITY:
            raise ValidationError(f"unknown term kind {self.kind!r}")
        object.__setattr__(self, "features", tuple(self.features))
        if len(self.features) != _ARITY[self.kind]:
            raise ValidationError(
                f"{self.kind} term takes {_ARITY[self.kind]} feature(s), "
                f"got {self.features!r}"
            )
        if self.knots < 1:
            raise ValidationError("knots must be positive")

    @property
    def name(self) -> str:
        inner = ",".join(self.features)
        return f"{self.kind}({inner})"

    def to_json(self) -> dict:
        return {"kind": self.kind, "features": list(self.features), "knots": self.knots}

    @classmethod
    def from_json(cls, doc: dict) -> "TermSpec":
        return cls(
            kind=doc["kind"],
            features=tuple(doc["features"]),
            knots=int(doc.get("knots", 8)),
        )


@dataclass(frozen=True)
class Term:
    """A fitted (or fittable) term; ``coef`` is in raw design space."""

    spec: TermSpec
    bases: tuple[SplineBasis, ...] = ()
    categories: tuple[str, ...] = ()
    # tensor terms only: maps each marginal basis into its centred
    # subspace; part of the design, so it must survive serialisation
    marginal_maps: tuple[np.ndarray, ...] = ()
    coef: np.ndarray | None = field(default=None, compare=False)

    @property
    def name(self) -> str:
        return self.spec.name

    @property
    def width(self) -> int:
        if self.spec.kind == SPLINE:
            return self.bases[0].num_basis
        if self.spec.kind == TENSOR:
            return self.marginal_maps[0].shape[1] * self.marginal_maps[1].shape[1]
        if self.spec.kind == CATEGORICAL:
            return len(self.categories)
        return self.bases[0].num_basis * len(self.categories)

    def design(self, frame: FeatureFrame) -> np.ndarray:
        kind = self.spec.kind
        if kind == SPLINE:
            x = frame.column(self.spec.features[0]).values
            return self.bases[0].design(x)
        if kind == TENSOR:
            c1 = self.bases[0].design(frame.column(self.spec.features[0]).values)
            c1 = c1 @ self.marginal_maps[0]
            c2 = self.bases[1].design(frame.column(self.spec.features[1]).values)
            c2 = c2 @ self.marginal_maps[1]
            return np.einsum("ij,ik->ijk", c1, c2).reshape(c1.shape[0], -1)
        if kind == CATEGORICAL:
            return self._one_hot(frame, self.spec.features[0])
        b = self.bases[0].design(frame.column(self.spec.features[0]).values)
        ind = self._one_hot(frame, self.spec.features[1])
        return np.einsum("ij,ik->ikj", b, ind).reshape(b.shape[0], -1)

    def _one_hot(self, frame: FeatureFrame, feature: str) -> np.ndarray:
        col = frame.column(feature)
        if not col.categorical:
            raise ValidationError(f"feature {feature!r} is not categorical")
        out = np.zeros((frame.n, len(self.categories)))
        index = {c: i for i, c in enumerate(self.categories)}
        for row, v in enumerate(col.values):
            i = index.get(v)
            if i is not None:
                out[row, i] = 1.0
        return out

    def penalty(self) -> np.ndarray:
        kind = self.spec.kind
        if kind == SPLINE:
            return second_difference_penalty(self.bases[0].num_basis)
        if kind == TENSOR:
            z1, z2 = self.marginal_maps
            p1 = z1.T @ second_difference_penalty(self.bases[0].num_basis) @ z1
            p2 = z2.T @ second_difference_penalty(self.bases[1].num_basis) @ z2
            return np.kron(p1, np.eye(z2.shape[1])) + np.kron(np.eye(z1.shape[1]), p2)
        if kind == CATEGORICAL:
            return np.zeros((len(self.categories),) * 2)
        p = second_difference_penalty(self.bases[0].num_basis)
        return block_diag(*[p] * len(self.categories))

    def constraints(self, design: np.ndarray) -> np.ndarray:
        """Rows whose kernel the coefficients must live in.

        Interaction-by-category terms get one sum-to-zero row per
        level, which removes the per-level constant directions that
        would otherwise alias the category's main effect.  Everything
        else gets the single global sum-to-zero row.
        """
        if self.spec.kind == BY:
            m = self.bases[0].num_basis
            rows = []
            for k in range(len(self.categories)):
                row = np.zeros(design.shape[1])
                row[k * m : (k + 1) * m] = design[:, k * m : (k + 1) * m].sum(axis=0)
                rows.append(row)
            return np.vstack(rows)
        return design.sum(axis=0, keepdims=True)

    def contribution(self, frame: FeatureFrame) -> np.ndarray:
        if self.coef is None:
            raise ValidationError(f"term {self.name} has no fitted coefficients")
        return self.design(frame) @ self.coef

    def with_coef(self, coef: np.ndarray) -> "Term":
        return replace(self, coef=np.asarray(coef, dtype=float))


def _categories(frame: FeatureFrame, feature: str) -> tuple[str, ...]:
    col = frame.column(feature)
    if not col.categorical:
        raise ValidationError(f"feature {feature!r} is not categorical")
    levels = sorted(set(col.values[~col.missing]))
    if len(levels) < 2:
        raise DegenerateFeature(f"feature {feature!r} has fewer than two levels")
    return tuple(levels)


def _centering_map(basis: SplineBasis, values) -> np.ndarray:
    w = basis.design(values).sum(axis=0, keepdims=True)
    z = null_space(w)
    if z.shape[1] != basis.num_basis - 1:
        raise DegenerateFeature(
            f"marginal basis for {basis.feature!r} lost rank while centring"
        )
    return z


def build_term(spec: TermSpec, frame: FeatureFrame) -> Term:
    """Instantiate a term's bases and category sets from training data."""
    kind = spec.kind
    if kind == SPLINE:
        x = frame.column(spec.features[0]).values
        return Term(spec=spec, bases=(build_basis(spec.features[0], x, spec.knots),))
    if kind == TENSOR:
        bases = []
        maps = []
        for f in spec.features:
            x = frame.column(f).values
            b = build_basis(f, x, spec.knots)
            bases.append(b)
            maps.append(_centering_map(b, x))
        return Term(spec=spec, bases=tuple(bases), marginal_maps=tuple(maps))
    if kind == CATEGORICAL:
        return Term(spec=spec, categories=_categories(frame, spec.features[0]))
    x = frame.column(spec.features[0]).values
    return Term(
        spec=spec,
        bases=(build_basis(spec.features[0], x, spec.knots),),
        categories=_categories(frame, spec.features[1]),
    )
