"""Component-wise gradient boosting for term selection.

Each round fits every candidate term to the current residual with a
small fixed penalty, keeps the one that reduces squared error the
most, and advances the fit by a shrunken step.  Terms that never win a
round are dropped.  The procedure is deterministic: ties go to the
candidate listed first.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, null_space

from ..errors import DegenerateFeature
from ..transform.frame import FeatureFrame
from .terms import TermSpec, build_term


def boost_select(
    frame: FeatureFrame,
    candidates,
    steps: int = 150,
    step_size: float = 0.1,
    target: str | None = None,
    base_lambda: float = 1.0,
) -> list[TermSpec]:
    """Return the sublist of ``candidates`` selected by boosting,
    ordered by how often each term won a round."""
    specs = [s if isinstance(s, TermSpec) else TermSpec(**s) for s in candidates]
    target_name = target or frame.target
    y = frame.column(target_name).values.astype(float)
    r = y - float(np.mean(y))

    learners = []
    for spec in specs:
        try:
            term = build_term(spec, frame)
            x = term.design(frame)
            z = null_space(term.constraints(x))
            if z.shape[1] == 0:
                continue
            c = x @ z
            pen = z.T @ term.penalty() @ z
            a = c.T @ c + base_lambda * pen + 1e-10 * np.eye(z.shape[1])
            factor = cho_factor(a)
        except (DegenerateFeature, LinAlgError):
            continue
        learners.append((spec, c, factor))

    counts = {spec.name: 0 for spec, _, _ in learners}
    order = {spec.name: i for i, (spec, _, _) in enumerate(learners)}
    for _ in range(steps):
        best = None
        for spec, c, factor in learners:
            fit = c @ cho_solve(factor, c.T @ r)
            rss = float(np.sum((r - fit) ** 2))
            if best is None or rss < best[0] - 1e-12:
                best = (rss, spec, fit)
        if best is None:
            break
        _, spec, fit = best
        counts[spec.name] += 1
        r = r - step_size * fit

    winners = [spec for spec, _, _ in learners if counts[spec.name] > 0]
    winners.sort(key=lambda s: (-counts[s.name], order[s.name]))
    return winners
