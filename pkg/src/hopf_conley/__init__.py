"""Numerical companion for fixed points of Hamiltonian diffeomorphisms of
T^{2m} x CP^n lifted to T^{2m} x C^{n+1}.

Modules
-------
loop_space
    Fourier loops, H^{1/2} structure, the operators L and j*.
hamiltonian
    Hopf-invariant quadratic Hamiltonians and their smallness constant.
action
    The cut-off action functional, its gradient and the smallness certificate.
dynamics
    Galerkin flows, isolation audits, critical-point search and clustering.
cohomology
    Graded algebras and modules over F2 and relative cup-length.
cli
    Configuration, pipeline and reports.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .action import ChiCutoff, action_gradient, action_value, condition_a_certificate  # noqa: E402
from .hamiltonian import HamiltonianSpec, HamiltonianTerm, lift  # noqa: E402
from .loop_space import FourierLoop, ProductPoint  # noqa: E402

__all__ = [
    "ChiCutoff",
    "FourierLoop",
    "HamiltonianSpec",
    "HamiltonianTerm",
    "ProductPoint",
    "action_gradient",
    "action_value",
    "condition_a_certificate",
    "lift",
]
