import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from _oracles import exact_curvature
from hitchin_lab.estimators import CurvatureSolver, ExhaustionEstimator, HitchinDirichletSolver, TodaChainSolver
from hitchin_lab.hyperbolic import hx_metric


def test_dirichlet_estimator():
    est = HitchinDirichletSolver(n=2, q={2: [0, 1]}, n_r=16, n_theta=32)
    with pytest.raises(NotFittedError):
        est.predict([0.1])
    assert est.fit() is est
    assert est.report_.converged
    H = est.predict([0.0, 0.3j])
    assert H.shape == (2, 2, 2)
    assert np.allclose(H, np.conj(np.swapaxes(H, -1, -2)))
    assert est.margins().max() <= 1e-3
    with pytest.raises(ValueError):
        est.predict([0.95])
    c = clone(est)
    assert c.get_params() == est.get_params() and not hasattr(c, "metric_")


def test_dirichlet_estimator_validation():
    with pytest.raises(ValueError):
        HitchinDirichletSolver(n=2, boundary="other", n_r=8, n_theta=16).fit()
    with pytest.raises(ValueError):
        HitchinDirichletSolver(n=2, q={5: [1]}, n_r=8, n_theta=16).fit()
    with pytest.raises(ValueError):
        HitchinDirichletSolver(n=2, n_r=8, n_theta=15).fit()


def test_dirichlet_estimator_callable_boundary():
    est = HitchinDirichletSolver(n=2, boundary=lambda z: hx_metric(2, z), n_r=16, n_theta=32).fit()
    assert np.abs(est.predict([0.2]) - hx_metric(2, np.array([0.2]))).max() < 1e-3


def test_toda_estimator():
    est = TodaChainSolver(gammas=([1.0], [1.0]), n_r=16, n_theta=32).fit()
    w = est.predict([0.0, 0.4])
    assert w.shape == (2, 2)
    ref = -np.log(np.cumprod(np.diagonal(hx_metric(3, np.array([0.0, 0.4])), axis1=-2, axis2=-1).real,
                             axis=-1))[:, :2]
    assert np.abs(w - ref).max() < 2e-3
    with pytest.raises(ValueError):
        TodaChainSolver(w_bdry="nope").fit()


def test_curvature_estimator():
    est = CurvatureSolver(u_bdry=exact_curvature, n_r=32, n_theta=64).fit()
    z = np.array([0.0, 0.5, -0.7j])
    assert np.abs(est.predict(z) - exact_curvature(z)).max() < 2e-3
    est0 = CurvatureSolver(u_bdry=0.0, n_r=16, n_theta=32).fit()
    assert est0.predict([0.0])[0] < 0


def test_exhaustion_estimator():
    est = ExhaustionEstimator(n=2, q={2: [0, 1]}, n_stages=3, grid_shape=(16, 32)).fit()
    assert len(est.distances_) == 2
    assert est.predict([0.1]).shape == (1, 2, 2)
