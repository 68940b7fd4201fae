"""Contextual time-series platform: semantic context graph, layered
series store, GAM-based probabilistic forecasting, and a deployment
scheduler, glued together by an in-process message bus."""

from .errors import CastoretteError
from .platform import Platform

__version__ = "0.1.0"

__all__ = ["CastoretteError", "Platform", "__version__"]
