"""Penalized additive model fitting.

The design is assembled as ``[1 | C_1 | ... | C_k]`` where each block
is the term's raw design mapped into the null space of its constraints.
Identity-link fits solve the penalized normal equations directly; the
log link runs penalized IRLS, which for this objective is an exact
Newton iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, null_space

from ..errors import (
    DegenerateFeature,
    NonConvergence,
    SingularSystem,
    TooShort,
    ValidationError,
)
from ..transform.frame import FeatureFrame
from .terms import CATEGORICAL, Term, TermSpec, build_term

IDENTITY = "identity"
LOG = "log"

MIN_ROWS = 20
DEFAULT_LAMBDA_GRID = tuple(np.logspace(-4.0, 6.0, 20))

# linear predictor clip for the log link; exp(30) ~ 1e13 is far beyond
# any plausible squared-residual scale, so clipping only guards IRLS
# against transient overshoot
_ETA_CLIP = 30.0


@dataclass
class AdditiveModel:
    intercept: float
    terms: list[Term]
    link: str
    lambdas: tuple[float, ...]
    domains: dict
    fit_info: dict | None = field(default=None, repr=False, compare=False)

    def linear_predictor(self, frame: FeatureFrame) -> np.ndarray:
        eta = np.full(frame.n, self.intercept)
        for term in self.terms:
            eta += term.contribution(frame)
        return eta

    def predict(self, frame: FeatureFrame) -> np.ndarray:
        eta = self.linear_predictor(frame)
        if self.link == LOG:
            return np.exp(np.clip(eta, -_ETA_CLIP, _ETA_CLIP))
        return eta

    def features(self) -> list[str]:
        seen: list[str] = []
        for term in self.terms:
            for f in term.spec.features:
                if f not in seen:
                    seen.append(f)
        return seen

    def out_of_domain(self, frame: FeatureFrame) -> np.ndarray:
        """Rows where some input leaves the training domain.

        Predictions are still produced for such rows (splines clamp,
        unseen categories contribute zero) but callers should surface
        the flag rather than silently trust extrapolation.
        """
        flagged = np.zeros(frame.n, dtype=bool)
        for name, (lo, hi) in self.domains.get("numeric", {}).items():
            if name in frame:
                v = frame.column(name).values
                flagged |= (v < lo) | (v > hi)
        for name, levels in self.domains.get("categorical", {}).items():
            if name in frame:
                known = set(levels)
                vals = frame.column(name).values
                flagged |= np.asarray([v not in known for v in vals])
        return flagged


def _collect_domains(terms: list[Term], frame: FeatureFrame) -> dict:
    numeric: dict[str, tuple[float, float]] = {}
    categorical: dict[str, list[str]] = {}
    for term in terms:
        for basis in term.bases:
            numeric[basis.feature] = basis.domain
        if term.categories:
            cat_feature = term.spec.features[-1]
            categorical[cat_feature] = list(term.categories)
    return {"numeric": numeric, "categorical": categorical}


def _prepare(frame: FeatureFrame, term_specs, target: str | None):
    target_name = target or frame.target
    if target_name is None:
        raise ValidationError("no target column; set frame.target or pass target=")
    specs = [s if isinstance(s, TermSpec) else TermSpec(**s) for s in term_specs]
    if not specs:
        raise ValidationError("need at least one term")
    used = sorted({f for s in specs for f in s.features} | {target_name})
    frame.require(used)
    holes = [name for name in used if frame.column(name).missing.any()]
    if holes:
        raise ValidationError(
            f"fitting needs fully observed rows; missing values in: {', '.join(holes)}"
        )
    if frame.n < MIN_ROWS:
        raise TooShort(f"need at least {MIN_ROWS} rows, got {frame.n}")
    y = frame.column(target_name).values.astype(float)
    terms = [build_term(s, frame) for s in specs]
    return y, terms


def _assemble(terms: list[Term], frame: FeatureFrame):
    """Constraint-reduce each term and stack the full design."""
    blocks = [np.ones((frame.n, 1))]
    maps = []
    penalties = [np.zeros((1, 1))]
    slices = [slice(0, 1)]
    col = 1
    for term in terms:
        x = term.design(frame)
        a = term.constraints(x)
        z = null_space(a)
        if z.shape[1] == 0:
            raise DegenerateFeature(f"term {term.name} has no free directions")
        blocks.append(x @ z)
        maps.append(z)
        penalties.append(z.T @ term.penalty() @ z)
        slices.append(slice(col, col + z.shape[1]))
        col += z.shape[1]
    design = np.hstack(blocks)
    return design, maps, penalties, slices


def _penalty_matrix(penalties, slices, lambdas, p: int) -> np.ndarray:
    pen = np.zeros((p, p))
    for lam, block, sl in zip((0.0, *lambdas), penalties, slices):
        pen[sl, sl] = lam * 0.5 * (block + block.T)
    return pen


def _blame_singular(design, pen, slices, terms) -> SingularSystem:
    a = design.T @ design + pen
    w, v = np.linalg.eigh(a)
    direction = v[:, 0]
    loads = [float(np.sum(direction[sl] ** 2)) for sl in slices[1:]]
    worst = terms[int(np.argmax(loads))]
    return SingularSystem(
        f"normal equations are singular along term {worst.name} "
        f"(smallest eigenvalue {w[0]:.3e})"
    )


def _solve_identity(design, y, pen, slices, terms):
    a = design.T @ design + pen
    b = design.T @ y
    try:
        factor = cho_factor(a)
    except LinAlgError:
        raise _blame_singular(design, pen, slices, terms) from None
    coef = cho_solve(factor, b)
    # one round of iterative refinement; cheap and tightens the
    # stationarity of the solution by a couple of digits
    coef += cho_solve(factor, b - a @ coef)
    fitted = design @ coef
    rss = float(np.sum((y - fitted) ** 2))
    edf = float(np.trace(cho_solve(factor, design.T @ design)))
    return coef, rss, edf


def _solve_log(design, y, pen, slices, terms, max_iter, tol):
    if np.any(y < 0):
        raise ValidationError("log link requires non-negative targets")
    n, p = design.shape
    coef = np.zeros(p)
    coef[0] = math.log(max(float(np.mean(y)), 1e-12))
    eta = design @ coef

    def objective(c):
        e = np.clip(design @ c, -_ETA_CLIP, _ETA_CLIP)
        return float(np.sum(np.exp(e) - y * e) + 0.5 * c @ pen @ c)

    obj = objective(coef)
    factor = None
    for _ in range(max_iter):
        mu = np.exp(np.clip(eta, -_ETA_CLIP, _ETA_CLIP))
        wx = design * mu[:, None]
        a = design.T @ wx + pen
        z = eta + (y - mu) / mu
        b = design.T @ (mu * z)
        try:
            factor = cho_factor(a)
        except LinAlgError:
            raise _blame_singular(design, pen, slices, terms) from None
        proposal = cho_solve(factor, b)
        step = 1.0
        while step > 1e-8:
            candidate = coef + step * (proposal - coef)
            cand_obj = objective(candidate)
            if cand_obj <= obj + 1e-12:
                break
            step *= 0.5
        moved = float(np.max(np.abs(candidate - coef)))
        coef = candidate
        obj = cand_obj
        eta = design @ coef
        if moved < tol * (1.0 + float(np.max(np.abs(coef)))):
            break
    else:
        raise NonConvergence(f"IRLS did not converge in {max_iter} iterations")

    mu = np.exp(np.clip(eta, -_ETA_CLIP, _ETA_CLIP))
    with np.errstate(divide="ignore", invalid="ignore"):
        term1 = np.where(y > 0, y * np.log(np.where(y > 0, y / mu, 1.0)), 0.0)
    deviance = float(2.0 * np.sum(term1 - (y - mu)))
    wx = design * mu[:, None]
    a = design.T @ wx + pen
    factor = cho_factor(a)
    edf = float(np.trace(cho_solve(factor, design.T @ wx)))
    return coef, max(deviance, 0.0), edf


def fit_additive(
    frame: FeatureFrame,
    term_specs,
    link: str = IDENTITY,
    lambdas="gcv",
    target: str | None = None,
    lambda_grid=None,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> AdditiveModel:
    """Fit an additive model on fully observed rows of ``frame``.

    ``lambdas`` is either ``"gcv"`` (one smoothing level shared by all
    penalized terms, chosen by generalized cross-validation on a log
    grid), a scalar, or a per-term sequence.
    """
    if link not in (IDENTITY, LOG):
        raise ValidationError(f"unknown link {link!r}")
    y, terms = _prepare(frame, term_specs, target)
    design, maps, penalties, slices = _assemble(terms, frame)
    n, p = design.shape
    k = len(terms)

    def solve(lams):
        pen = _penalty_matrix(penalties, slices, lams, p)
        if link == IDENTITY:
            coef, fit_measure, edf = _solve_identity(design, y, pen, slices, terms)
        else:
            coef, fit_measure, edf = _solve_log(
                design, y, pen, slices, terms, max_iter, tol
            )
        denom = max(n - edf, 1e-9)
        gcv = n * fit_measure / denom**2
        return coef, fit_measure, edf, gcv, pen

    if lambdas == "gcv":
        grid = DEFAULT_LAMBDA_GRID if lambda_grid is None else tuple(lambda_grid)
        best = None
        for lam in grid:
            result = solve((lam,) * k)
            if best is None or result[3] < best[1][3]:
                best = ((lam,) * k, result)
        chosen, (coef, fit_measure, edf, gcv, pen) = best
    else:
        if np.isscalar(lambdas):
            chosen = (float(lambdas),) * k
        else:
            chosen = tuple(float(v) for v in lambdas)
            if len(chosen) != k:
                raise ValidationError(f"expected {k} lambdas, got {len(chosen)}")
        coef, fit_measure, edf, gcv, pen = solve(chosen)

    fitted_terms = [
        term.with_coef(z @ coef[sl]) for term, z, sl in zip(terms, maps, slices[1:])
    ]

    def objective(c):
        e = design @ c
        if link == LOG:
            e = np.clip(e, -_ETA_CLIP, _ETA_CLIP)
            return float(np.sum(np.exp(e) - y * e) + 0.5 * c @ pen @ c)
        r = y - e
        return float(0.5 * r @ r + 0.5 * c @ pen @ c)

    def gradient(c):
        e = design @ c
        if link == LOG:
            e = np.clip(e, -_ETA_CLIP, _ETA_CLIP)
            return design.T @ (np.exp(e) - y) + pen @ c
        return -design.T @ (y - e) + pen @ c

    model = AdditiveModel(
        intercept=float(coef[0]),
        terms=fitted_terms,
        link=link,
        lambdas=chosen,
        domains=_collect_domains(fitted_terms, frame),
        fit_info={
            "coef": coef,
            "design": design,
            "penalty": pen,
            "objective": objective,
            "gradient": gradient,
            "edf": edf,
            "gcv": gcv,
            ("rss" if link == IDENTITY else "deviance"): fit_measure,
            "n": n,
        },
    )
    return model
