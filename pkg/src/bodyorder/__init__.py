"""Body-ordered approximations of tight-binding observables.

Submodules
----------
lattice
    Configurations, hopping models and Hamiltonian assembly.
spectral
    Eigendecompositions, observables and their derivatives.
potential
    Green's functions, equilibrium measures and interpolation nodes of
    interval unions.
linear
    Polynomial interpolation, Chebyshev/KPM and body-order decompositions.
recursion
    Lanczos, Gauss quadrature and continued fractions.
scf
    Self-consistent potentials and Newton / mixing solvers.
ratefit
    Exponential rate estimation.
"""
__version__ = "0.1.0"

from .lattice import Configuration, HoppingModel, Hamiltonian, assemble, make_chain, make_defect_chain
from .spectral import (
    FermiDirac,
    GrandPotential,
    Resolvent,
    Polynomial,
    eig,
    local_observable,
    SingularityError,
)
from .potential import IntervalSet, solve_gap_params, green_value, fejer_points, leja_points, asymptotic_rate, capacity
from .linear import interp_build, Interpolant, matrix_interpolant, cheb_project, kpm_estimate
from .recursion import lanczos, gauss_rule, theta, cf_resolvent
from .scf import EffectivePotentialSpec, newton_scf, damped_fixed_point
from .ratefit import ErrorCurve, fit_rate, compare_rate, convergence_order

__all__ = [
    "__version__",
    "Configuration",
    "HoppingModel",
    "Hamiltonian",
    "assemble",
    "make_chain",
    "make_defect_chain",
    "FermiDirac",
    "GrandPotential",
    "Resolvent",
    "Polynomial",
    "eig",
    "local_observable",
    "SingularityError",
    "IntervalSet",
    "solve_gap_params",
    "green_value",
    "fejer_points",
    "leja_points",
    "asymptotic_rate",
    "capacity",
    "interp_build",
    "Interpolant",
    "matrix_interpolant",
    "cheb_project",
    "kpm_estimate",
    "lanczos",
    "gauss_rule",
    "theta",
    "cf_resolvent",
    "EffectivePotentialSpec",
    "newton_scf",
    "damped_fixed_point",
    "ErrorCurve",
    "fit_rate",
    "compare_rate",
    "convergence_order",
]
