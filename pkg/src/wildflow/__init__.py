"""Convex-integration laboratory for rotating inviscid flows on a slab."""

from .fields import (Grid, ScalarField, TensorField, VectorField,
                     DomainError, ParityError, ContractError)

__version__ = "0.1.0"

__all__ = [
    "Grid", "ScalarField", "VectorField", "TensorField",
    "DomainError", "ParityError", "ContractError",
]
