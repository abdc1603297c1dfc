"""Hyperbolic hierarchical adapter learning over frozen embeddings."""
from . import autodiff, atr, data, geometry, hhl, objective, trainer
from .errors import (DivergenceError, DomainError, HierarchyWarning, LatHError, ParseError,
                     UsageError, ValidationError)

__version__ = "0.1.0"
