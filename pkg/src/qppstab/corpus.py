"""Bundled example systems with their decompositions.

Parameter names follow the usual predator-prey notation; the Nutku growth
rate is called ``rho_growth`` to keep ``rho`` free for the eigenvalue ratio
of the oscillation analysis.
"""

import numpy as np

from .core import PoissonData, QPSystem

SYMPLECTIC_2D = np.array([[0.0, 1.0], [-1.0, 0.0]])


def volterra(a=1.0, b=1.0, c=1.0, d=1.0):
    """x1' = x1 (a - b x2), x2' = x2 (-d + c x1)."""
    sys = QPSystem([a, -d], [[0.0, -b], [c, 0.0]], np.eye(2))
    pd = PoissonData(SYMPLECTIC_2D, [d, a], [-c, -b])
    return sys, pd


def generalized_volterra(alpha, beta, gamma, delta, a=1.0, b=1.0, c=1.0, d=1.0):
    """Hamiltonian ``-c x1^alpha x2^beta - b x1^gamma x2^delta + d ln x1 + a ln x2``."""
    B = np.array([[alpha, beta], [gamma, delta]], dtype=float)
    A = np.array([[-beta * c, -delta * b], [alpha * c, gamma * b]])
    sys = QPSystem([a, -d], A, B)
    pd = PoissonData(SYMPLECTIC_2D, [d, a], [-c, -b])
    return sys, pd


def power_volterra(alpha_star, delta_star, a=1.0, b=1.0, c=1.0, d=1.0):
    """x1' = x1 (a - (1+delta*) b x2^(1+delta*)), x2' = x2 (-d + (1+alpha*) c x1^(1+alpha*))."""
    return generalized_volterra(1.0 + alpha_star, 0.0, 0.0, 1.0 + delta_star, a, b, c, d)


def interior_condition(alpha, beta, gamma, delta, a=1.0, d=1.0):
    """``delta/gamma > a/d > beta/alpha`` with ratios over zero read as +inf."""
    upper = np.inf if gamma == 0 else delta / gamma
    return bool(upper > a / d > beta / alpha)


def extra_terms(sigma1, sigma2, alpha, beta, a=1.0, b=1.0, c=1.0, d=1.0):
    """Volterra Hamiltonian plus ``sigma1 x1^alpha + sigma2 x2^beta`` (n = 2, m = 4)."""
    B = np.array([[1.0, 0.0], [0.0, 1.0], [alpha, 0.0], [0.0, beta]])
    A = np.array([[0.0, -b, 0.0, beta * sigma2], [c, 0.0, -alpha * sigma1, 0.0]])
    sys = QPSystem([a, -d], A, B)
    pd = PoissonData(SYMPLECTIC_2D, [d, a], [-c, -b, sigma1, sigma2])
    return sys, pd


def nutku(a=-1.0, b=-1.0, c=-1.0, rho_growth=1.0, mu=1.0, nu=-2.0):
    """Three-species LV system; Poisson when ``abc = -1`` and ``nu = mu b - rho ab``."""
    sys = QPSystem(
        [rho_growth, mu, nu],
        [[0.0, c, 1.0], [1.0, 0.0, a], [b, 1.0, 0.0]],
        np.eye(3),
    )
    K = [[0.0, c, b * c], [-c, 0.0, -1.0], [-b * c, 1.0, 0.0]]
    pd = PoissonData(K, [0.0, nu, -mu], [a * b, 1.0, -a])
    return sys, pd


def nutku_conditions(a, b, c, rho_growth, mu, nu):
    return {
        "abc_plus_one": a * b * c + 1.0,
        "nu_residual": nu - (mu * b - rho_growth * a * b),
    }


def bundled():
    """The four files written by ``qpp-stab examples`` with their default parameters."""
    return {
        "volterra2d": volterra(),
        "example2": generalized_volterra(2.0, 1.0, 1.0, 2.0),
        "example3": extra_terms(-1.0, -1.0, 0.5, 0.5),
        "nutku3d": nutku(),
    }
