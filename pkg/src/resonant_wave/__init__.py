"""Periodic solutions of completely resonant nonlinear wave equations.

Spectral Lyapunov-Schmidt / Nash-Moser solver for
``u_tt - u_xx + f(x, u) = 0`` on (0, pi) with Dirichlet conditions.
"""

__version__ = "0.1.0"
