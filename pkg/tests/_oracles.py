"""Independent reference solutions used by the tests."""

import numpy as np
from scipy.integrate import solve_bvp


def radial_rank2(c, radius, r_eval):
    """Radial solution of 1/4 Lap w = e^{2w} - c^2 e^{-2w}, w(R) = -log(1 - R^2).

    This is the rank-2 companion problem with constant q_2 = c and boundary
    values h_X, where w = -log h_11.  Solved as a first-order system in
    (w, r w') with a collocation BVP solver.
    """
    wb = -np.log(1 - radius**2)

    def rhs(r, y):
        w, p = y
        safe = np.where(r > 0, r, 1.0)
        return np.vstack([np.where(r > 0, p / safe, 0.0), 4 * r * (np.exp(2 * w) - c**2 * np.exp(-2 * w))])

    def bc(ya, yb):
        return np.array([ya[1], yb[0] - wb])

    r = np.linspace(0, radius, 400)
    y0 = np.vstack([-np.log(1 - r**2), np.zeros_like(r)])
    sol = solve_bvp(rhs, bc, r, y0, tol=1e-10, max_nodes=200000)
    if not sol.success:
        raise RuntimeError(sol.message)
    return sol.sol(r_eval)[0]


def exact_curvature(z):
    """u* = -log(1 - |z|^2) solves 1/4 Lap u = e^{2u}."""
    return -np.log(1 - np.abs(z) ** 2)


def observed_orders(errors):
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])
