"""Finite difference solver and diagnostics for singularly perturbed p(x)-Laplacian flame problems."""

from .exponent import ExponentField
from .grid import Grid, ScalarField, VectorField
from .reaction import ReactionProfile, lambda_star
from .solver import DirichletProblem, SolverConfig, SolveResult, continuation_sweep, solve

__all__ = [
    "DirichletProblem",
    "ExponentField",
    "Grid",
    "ReactionProfile",
    "ScalarField",
    "SolveResult",
    "SolverConfig",
    "VectorField",
    "continuation_sweep",
    "lambda_star",
    "solve",
]
