"""Automatic differentiation: a scalar graph engine and a batched array tape."""
from .graph import (
    DomainError,
    DualTrace,
    Graph,
    UnsupportedPrimitiveError,
    Var,
    input_derivative,
    record,
)
from .tape import Tensor, backward

__all__ = [
    "DomainError",
    "DualTrace",
    "Graph",
    "UnsupportedPrimitiveError",
    "Var",
    "input_derivative",
    "record",
    "Tensor",
    "backward",
]
