"""Numerical toolkit for b^m-symplectic Hamiltonian dynamics in action-angle form."""

__version__ = "0.1.0"
