"""Graph Ginzburg-Landau energies, their gradient-flow minimisers, TL^p transport
distances and the continuum limit objects (cell problem, anisotropic perimeter)."""

__version__ = "0.1.0"

from .core import (Density, DimensionError, Kernel, LabelField, PointCloud, Potential, eval_kernel,
                   eval_potential, validate_assumptions)
from .energy import FidelitySpec, gl_energy, gl_gradient, gl_infinity_energy, gl_tilde_energy
from .graph import SparseGraph, build_graph
from .solver import NumericalError, SolveOptions, SolveResult, minimize

__all__ = [
    "Density", "DimensionError", "FidelitySpec", "Kernel", "LabelField", "NumericalError", "PointCloud",
    "Potential", "SolveOptions", "SolveResult", "SparseGraph", "__version__", "build_graph", "eval_kernel",
    "eval_potential", "gl_energy", "gl_gradient", "gl_infinity_energy", "gl_tilde_energy", "minimize",
    "validate_assumptions",
]
