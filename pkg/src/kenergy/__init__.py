"""Numerical K-energy functionals, Futaki invariants and Donaldson's Lagrangian.

Supported manifolds are CP^1, CP^2 with Fubini-Study reference metrics and
the flat torus C / (Z + iZ).  Metrics are given by Kahler potentials; all
curvature quantities are computed from order-4 Taylor jets of the potential
and integrated with tensor-product Gauss rules.
"""
__version__ = "0.1.0"

from .geometry import Manifold, NotAdmissibleError, QuadratureGrid, build_grid, default_grid, integrate
from .potentials import RadialPotential, HarmonicPotential, FourierPotential, random_potential
from .chern import bott_chern, chern_form, linear_path, reparametrized_path, bent_path
from .functionals import (
    critical_residual,
    descend,
    k_energy,
    k_energy_cor52,
    k_energy_lemma51,
    k_energy_nopath,
    k_energy_path,
    mu_k,
)
from .futaki import futaki_via_fk, solve_theta
from .donaldson import donaldson_lagrangian, lambda_const, theorem3_check
from .oracles import cohomology_reference, finite_difference_jets

__all__ = [
    "Manifold", "NotAdmissibleError", "QuadratureGrid", "build_grid", "default_grid", "integrate",
    "RadialPotential", "HarmonicPotential", "FourierPotential", "random_potential",
    "bott_chern", "chern_form", "linear_path", "reparametrized_path", "bent_path",
    "critical_residual", "descend", "k_energy", "k_energy_cor52", "k_energy_lemma51",
    "k_energy_nopath", "k_energy_path", "mu_k", "futaki_via_fk", "solve_theta",
    "donaldson_lagrangian", "lambda_const", "theorem3_check", "cohomology_reference",
    "finite_difference_jets",
]
