"""Cubic B-spline bases with quantile-placed knots."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import BSpline

from ..errors import DegenerateFeature

DEGREE = 3


@dataclass(frozen=True)
class SplineBasis:
    """A fixed cubic B-spline basis on a bounded domain.

    Inputs outside the training domain are clamped to its edge before
    evaluation, so extrapolation holds the boundary value flat rather
    than following a cubic off to infinity.
    """

    feature: str
    knots: tuple[float, ...]

    @property
    def num_basis(self) -> int:
        return len(self.knots) - DEGREE - 1

    @property
    def domain(self) -> tuple[float, float]:
        return self.knots[DEGREE], self.knots[-DEGREE - 1]

    def design(self, x) -> np.ndarray:
        lo, hi = self.domain
        xc = np.clip(np.asarray(x, dtype=float), lo, hi)
        # design_matrix rejects x == hi (right-open support), nudge it in
        hi_in = np.nextafter(hi, lo)
        xc = np.minimum(xc, hi_in)
        dm = BSpline.design_matrix(xc, np.asarray(self.knots), DEGREE)
        return np.asarray(dm.todense())


def build_basis(feature: str, values, interior_knots: int = 8) -> SplineBasis:
    """Basis for ``values`` with knots at evenly spaced quantiles.

    Quantile placement puts resolution where the data is, which for
    pathological conditions like near-constant inputs is caught here as
    :class:`DegenerateFeature` instead of surfacing later as a singular
    system.
    """
    x = np.asarray(values, dtype=float)
    if interior_knots < 1:
        raise DegenerateFeature("need at least one interior knot")
    lo, hi = float(np.min(x)), float(np.max(x))
    if not np.isfinite([lo, hi]).all() or hi - lo < 1e-12:
        raise DegenerateFeature(
            f"feature {feature!r} has no spread (range [{lo}, {hi}])"
        )
    if np.unique(x).size < interior_knots + 2:
        raise DegenerateFeature(
            f"feature {feature!r} has too few distinct values for "
            f"{interior_knots} interior knots"
        )
    probs = np.arange(1, interior_knots + 1) / (interior_knots + 1)
    interior = np.unique(np.quantile(x, probs))
    interior = interior[(interior > lo) & (interior < hi)]
    knots = np.concatenate(
        ([lo] * (DEGREE + 1), interior, [hi] * (DEGREE + 1))
    )
    return SplineBasis(feature=feature, knots=tuple(float(k) for k in knots))


def second_difference_penalty(m: int) -> np.ndarray:
    """``D2.T @ D2`` for ``m`` coefficients; zero matrix when ``m < 3``.

    Penalises curvature of the coefficient sequence.  Its null space is
    spanned by constant and linear coefficient runs, so smoothing never
    shrinks a straight-line fit.
    """
    if m < 3:
        return np.zeros((m, m))
    d2 = np.zeros((m - 2, m))
    for i in range(m - 2):
        d2[i, i : i + 3] = (1.0, -2.0, 1.0)
    return d2.T @ d2
