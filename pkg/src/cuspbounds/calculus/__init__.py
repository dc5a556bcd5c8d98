"""Derivative engine: jets, exact partial and cluster derivatives, finite-difference oracle."""

from . import jet
from .derivatives import (
    ScalarField,
    cluster_directions,
    cluster_partial,
    coords_of,
    evaluate,
    gradient,
    jet_along,
    laplacian,
    partial_alpha,
    partial_all,
    value_grad_laplacian,
)
from .jet import Jet

__all__ = [
    "Jet",
    "jet",
    "ScalarField",
    "cluster_directions",
    "cluster_partial",
    "coords_of",
    "evaluate",
    "gradient",
    "jet_along",
    "laplacian",
    "partial_alpha",
    "partial_all",
    "value_grad_laplacian",
]
