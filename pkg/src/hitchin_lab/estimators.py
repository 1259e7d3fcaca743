"""Estimator-style wrappers around the solvers.

Each estimator stores its parameters in ``__init__``, computes in ``fit``
and evaluates the fitted field at points of the grid disk in ``predict``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .analysis import solve_curvature
from .bundle import companion_field
from .grid import PolarGrid
from .hyperbolic import hx_metric
from .solver import SolverConfig, exhaust, metric_to_toda, solve_dirichlet, solve_toda_chain
from ._validation import check_differentials, check_points


def _config(est):
    return SolverConfig(tol=est.tol, max_iter=est.max_iter, path=getattr(est, "path", "auto"))


class _GridMixin:
    def _grid(self):
        return PolarGrid(self.radius, self.n_r, self.n_theta, beta=self.beta)

    def _points(self, z):
        return check_points(np.asarray(z, dtype=complex), radius=self.grid_.radius, strict=False)


class HitchinDirichletSolver(_GridMixin, BaseEstimator):
    """Harmonic metric of the companion field theta(q) with boundary values h_X.

    Parameters
    ----------
    n : rank.
    q : dict {j: coefficients} of the differentials q_2..q_n (lowest degree first).
    boundary : "hx" or a callable z -> (..., n, n) boundary metric.
    """

    def __init__(self, n=2, q=None, radius=0.8, n_r=32, n_theta=64, beta=0.4, boundary="hx",
                 tol=1e-8, max_iter=40, path="auto"):
        self.n = n
        self.q = q
        self.radius = radius
        self.n_r = n_r
        self.n_theta = n_theta
        self.beta = beta
        self.boundary = boundary
        self.tol = tol
        self.max_iter = max_iter
        self.path = path

    def fit(self, X=None, y=None):
        q = check_differentials(self.q or {}, self.n)
        self.grid_ = self._grid()
        self.higgs_ = companion_field(q)
        if isinstance(self.boundary, str):
            if self.boundary != "hx":
                raise ValueError("boundary must be 'hx' or a callable")
            bdry = lambda z: hx_metric(self.n, z)
        else:
            bdry = self.boundary
        self.metric_, self.report_ = solve_dirichlet(self.higgs_, bdry, self.grid_, _config(self))
        self.residual_ = self.report_.residual
        return self

    def predict(self, z):
        """Interpolated metric matrices H(z)."""
        check_is_fitted(self, "metric_")
        f = self.grid_.interpolator(self.metric_.H, self.metric_.H_bdry)
        H = f(self._points(z))
        return 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))

    def margins(self):
        """Weak domination margins v_k against h_X at the nodes."""
        from .bundle import weak_domination_margins

        check_is_fitted(self, "metric_")
        return weak_domination_margins(self.metric_.H, hx_metric(self.n, self.grid_.z))


class TodaChainSolver(_GridMixin, BaseEstimator):
    """Toda system for a line chain with links ``gammas`` (polynomial coefficient lists or constants).

    ``w_bdry`` is "hx" (boundary of the rank-n reference metric) or an array
    of shape (n - 1, n_theta).
    """

    def __init__(self, gammas=(1.0,), cyclic=None, radius=0.8, n_r=32, n_theta=64, beta=0.4, w_bdry="hx",
                 tol=1e-8, max_iter=40):
        self.gammas = gammas
        self.cyclic = cyclic
        self.radius = radius
        self.n_r = n_r
        self.n_theta = n_theta
        self.beta = beta
        self.w_bdry = w_bdry
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        from .bundle import _as_poly

        self.grid_ = self._grid()
        gam = [_as_poly(g) for g in self.gammas]
        n = len(gam) + 1
        if isinstance(self.w_bdry, str):
            if self.w_bdry != "hx":
                raise ValueError("w_bdry must be 'hx' or an array")
            wb = metric_to_toda(hx_metric(n, self.grid_.z_bdry))
        else:
            wb = np.asarray(self.w_bdry, dtype=float)
        cyc = None if self.cyclic is None else _as_poly(self.cyclic)
        self.w_bdry_ = wb
        self.w_, self.report_ = solve_toda_chain(gam, wb, self.grid_, _config(self), cyclic=cyc)
        return self

    def predict(self, z):
        """w_k(z) stacked on the last axis."""
        check_is_fitted(self, "w_")
        vals = np.moveaxis(self.w_, 0, -1)
        f = self.grid_.interpolator(vals, self.w_bdry_.T)
        return f(self._points(z))


class CurvatureSolver(_GridMixin, BaseEstimator):
    """1/4 Lap u = |alpha|^2 e^{2u} with Dirichlet data u_bdry (constant, callable or array)."""

    def __init__(self, alpha=(1.0,), radius=0.9, n_r=32, n_theta=64, beta=0.4, u_bdry=0.0, tol=1e-10,
                 max_iter=40):
        self.alpha = alpha
        self.radius = radius
        self.n_r = n_r
        self.n_theta = n_theta
        self.beta = beta
        self.u_bdry = u_bdry
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        self.grid_ = self._grid()
        ub = self.u_bdry
        if callable(ub):
            ub = ub(self.grid_.z_bdry)
        self.u_bdry_ = np.broadcast_to(np.asarray(ub, dtype=float), (self.grid_.n_theta,)).copy()
        self.u_, self.report_ = solve_curvature(self.alpha, self.grid_, _config(self), self.u_bdry_)
        return self

    def predict(self, z):
        check_is_fitted(self, "u_")
        f = self.grid_.interpolator(self.u_, self.u_bdry_)
        return f(self._points(z)).real


class ExhaustionEstimator(BaseEstimator):
    """Dirichlet solves on radii 1 - 2^{-m}(1 - r0) monitored on |z| <= rho_obs."""

    def __init__(self, n=2, q=None, r0=0.5, n_stages=6, rho_obs=0.5, grid_shape=(48, 96), tol=1e-8,
                 max_iter=40):
        self.n = n
        self.q = q
        self.r0 = r0
        self.n_stages = n_stages
        self.rho_obs = rho_obs
        self.grid_shape = grid_shape
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X=None, y=None):
        q = check_differentials(self.q or {}, self.n)
        cfg = SolverConfig(tol=self.tol, max_iter=self.max_iter, r0=self.r0, n_stages=self.n_stages,
                           rho_obs=self.rho_obs)
        self.field_, self.log_ = exhaust(companion_field(q), cfg, grid_shape=tuple(self.grid_shape), n=self.n)
        if self.log_["status"] != "ok":
            raise RuntimeError(self.log_.get("message", "exhaustion failed"))
        self.distances_ = np.array(self.log_["d"])
        self.monotone_ = self.log_["monotone"]
        return self

    def predict(self, z):
        check_is_fitted(self, "field_")
        g = self.field_.grid
        z = check_points(np.asarray(z, dtype=complex), radius=g.radius, strict=False)
        H = g.interpolator(self.field_.H, self.field_.H_bdry)(z)
        return 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
