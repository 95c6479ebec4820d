"""Peer gender culture and labor supply: synthetic panels, peer-effect estimation and a belief-driven search model."""

from . import peer_metrics, regression, search, synth
from .errors import (
    CollinearityError,
    ConvergenceError,
    DataContractError,
    DomainError,
    GenerationError,
    NumericalError,
    SchemaError,
    SearchPeersError,
    SolverError,
    SpellTruncationError,
    StructuralError,
)

__version__ = "0.1.0"

__all__ = [
    "CollinearityError",
    "ConvergenceError",
    "DataContractError",
    "DomainError",
    "GenerationError",
    "NumericalError",
    "SchemaError",
    "SearchPeersError",
    "SolverError",
    "SpellTruncationError",
    "StructuralError",
    "peer_metrics",
    "regression",
    "search",
    "synth",
]
