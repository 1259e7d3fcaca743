import warnings

import numpy as np
import pytest

from _oracles import observed_orders, radial_rank2
from hitchin_lab.bundle import DifferentialTuple, MetricField, PairingMatrix, companion_field, compatibility_defect
from hitchin_lab.grid import PolarGrid
from hitchin_lab.hyperbolic import hx_field, hx_metric
from hitchin_lab.solver import (
    SolverConfig,
    domination_system,
    energy_density,
    exhaust,
    hitchin_residual,
    maximum_principle_check,
    metric_to_toda,
    perturbed_boundary,
    residual_norm,
    solve_dirichlet,
    solve_toda_chain,
    subharmonicity_check,
    toda_to_metric,
    uniqueness_probe,
)


def _solve(n, q, radius=0.8, shape=(32, 64), path="auto", boundary=None):
    g = PolarGrid(radius, *shape)
    A = companion_field(DifferentialTuple(n, q))
    bd = boundary or (lambda z: hx_metric(n, z))
    return solve_dirichlet(A, bd, g, SolverConfig(path=path))


@pytest.mark.parametrize("kw", [{"tol": 0}, {"damping": 1.5}, {"max_iter": 0}, {"r0": 1.0},
                                {"n_stages": 0}, {"path": "other"}, {"rho_obs": -1}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_schedule():
    s = SolverConfig(r0=0.5, n_stages=3).schedule
    assert np.allclose(s, [0.75, 0.875, 0.9375])


def test_toda_metric_roundtrip(rng):
    w = rng.normal(size=(3, 4, 5))
    assert np.allclose(metric_to_toda(toda_to_metric(w)), w)
    assert np.allclose(np.linalg.det(toda_to_metric(w)), 1)


def test_reference_metric_residual_second_order():
    errs = []
    for n_r in (16, 32, 64):
        g = PolarGrid(0.8, n_r, 2 * n_r)
        R = hitchin_residual(hx_field(g, 3), companion_field(DifferentialTuple.zero(3)))
        errs.append(residual_norm(R))
    assert min(observed_orders(errs)) > 1.5


def test_residual_type_error():
    with pytest.raises(TypeError):
        hitchin_residual(np.eye(2), np.eye(2))


def test_radial_oracle():
    errs = []
    for shape in ((16, 32), (32, 64), (64, 128)):
        fld, rep = _solve(2, {2: [0.1]}, shape=shape)
        assert rep.converged and rep.path == "toda"
        g = fld.grid
        w_ref = radial_rank2(0.1, 0.8, g.r)
        w = -np.log(fld.H[..., 0, 0].real)
        errs.append(np.abs(w - w_ref[:, None]).max())
    assert errs[-1] < 5e-5
    assert min(observed_orders(errs)) > 1.5


def test_toda_and_matrix_paths_agree():
    a, ra = _solve(3, {3: [0, 0.5]}, path="toda")
    b, rb = _solve(3, {3: [0, 0.5]}, path="matrix")
    assert ra.converged and rb.converged
    assert np.abs(a.H - b.H).max() < 1e-7
    assert rb.residual < 5e-3


def test_toda_path_rejects_non_chain():
    with pytest.raises(ValueError):
        _solve(3, {2: [0.3]}, path="toda")


def test_zero_differential_reproduces_reference():
    fld, rep = _solve(3, {})
    # discrete solution, so agreement is at the truncation level
    assert rep.converged
    assert np.abs(fld.H - hx_metric(3, fld.grid.z)).max() < 5e-3
    e, emin = energy_density(fld, companion_field(DifferentialTuple.zero(3)))
    assert np.allclose(e, 3 * 3 * 8 / 6, atol=1e-2)


@pytest.mark.parametrize("n, q", [(2, {2: [0, 1]}), (2, {2: [0.3]}), (3, {3: [0, 1]}), (3, {2: [0.2], 3: [0, 0.5]})])
def test_domination_and_energy(n, q):
    fld, rep = _solve(n, q)
    ref, _ = _solve(n, {})
    assert rep.converged
    assert max(rep.margins_max) <= 1e-4
    # against the discrete reference solution the sign is exact
    w, wx = metric_to_toda(fld.H), metric_to_toda(ref.H)
    assert (wx - w).max() <= 1e-9
    e, emin = energy_density(fld, companion_field(DifferentialTuple(n, q)))
    assert emin >= n * n * (n * n - 1) / 6 - 1e-3


def test_toda_chain_direct():
    g = PolarGrid(0.8, 24, 48)
    wb = metric_to_toda(hx_metric(3, g.z_bdry))
    w, rep = solve_toda_chain([1.0, 1.0], wb, g)
    assert rep.converged
    assert np.abs(w - metric_to_toda(hx_metric(3, g.z))).max() < 1e-3
    with pytest.raises(ValueError):
        solve_toda_chain([], wb, g)
    with pytest.raises(ValueError):
        solve_toda_chain([1.0, 1.0], np.full_like(wb, np.nan), g)


def test_maximum_principle_on_margins():
    fld, rep = _solve(3, {3: [0, 1]})
    ref, _ = _solve(3, {})
    g = fld.grid
    w = metric_to_toda(fld.H)
    wx = metric_to_toda(ref.H)
    v, c = domination_system(w, wx, 1.0, g)
    vb = metric_to_toda(ref.H_bdry) - metric_to_toda(fld.H_bdry)
    out = maximum_principle_check(v, c, g, vb, tol=1e-6)
    assert out["holds"], out["witness"]
    assert v.max() <= 1e-8


def test_maximum_principle_counterexample():
    g = PolarGrid(0.5, 8, 16)
    u = np.zeros((2,) + g.shape)
    c = np.zeros((2, 2) + g.shape)
    c[0, 1] = -1.0
    c[1, 0] = 1.0
    c[0, 0] = c[1, 1] = -1.0
    out = maximum_principle_check(u, c, g, np.zeros((2, g.n_theta)))
    assert not out["cooperative"] and not out["holds"]
    assert out["witness"]["pair"] == [0, 1]
    # a bump violates the conclusion when the inequality does not hold
    u2 = np.broadcast_to(np.exp(-10 * g.r[:, None] ** 2), g.shape)[None]
    out2 = maximum_principle_check(u2, np.zeros((1, 1) + g.shape), g, np.zeros((1, g.n_theta)))
    assert not out2["inequality"] and not out2["conclusion"]


def test_subharmonicity():
    a, _ = _solve(2, {2: [0, 1]})
    b, _ = _solve(2, {2: [0, 1]}, boundary=perturbed_boundary(2, 0.3))
    res = subharmonicity_check(a, b, tol=1e-6)
    assert res["ok"], res
    H = b.H.copy()
    i, j = 10, 5
    H[i, j] = H[i, j] * 3.0
    bad = MetricField(b.grid, H, b.H_bdry)
    res = subharmonicity_check(a, bad, tol=1e-6)
    assert not res["ok"] and res["n_violations"] > 0


def test_perturbed_boundary_is_compatible():
    z = np.array([0.1, 0.5j, -0.3])
    Hb = perturbed_boundary(3, 0.2)(z)
    assert compatibility_defect(Hb, PairingMatrix.antidiagonal(3)).max() < 1e-12
    assert np.abs(Hb - hx_metric(3, z)).max() > 1e-2


def test_incompatible_boundary_rejected():
    g = PolarGrid(0.5, 8, 16)
    A = companion_field(DifferentialTuple.zero(2))
    Hb = np.broadcast_to(np.diag([2.0, 1.0]).astype(complex), (g.n_theta, 2, 2))
    with pytest.raises(ValueError):
        solve_dirichlet(A, Hb, g, S=PairingMatrix.antidiagonal(2))


def test_nonconvergence_warns():
    g = PolarGrid(0.8, 16, 32)
    A = companion_field(DifferentialTuple(2, {2: [0, 1]}))
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        _, rep = solve_dirichlet(A, lambda z: hx_metric(2, z), g, SolverConfig(max_iter=1, tol=1e-14))
    assert not rep.converged
    assert any(issubclass(r.category, RuntimeWarning) for r in rec)


def test_exhaust_and_uniqueness_small():
    A = companion_field(DifferentialTuple(2, {2: [0, 1]}))
    cfg = SolverConfig(n_stages=3)
    with pytest.raises(ValueError):
        exhaust(A, cfg, rho_obs=0.9, grid_shape=(16, 32))
    fld, log = exhaust(A, cfg, grid_shape=(16, 32))
    assert log["status"] == "ok" and len(log["d"]) == 2
    d, logs = uniqueness_probe(A, lambda z: hx_metric(2, z), perturbed_boundary(2, 0.2), cfg, grid_shape=(16, 32))
    assert logs["decreasing"]
    assert d == logs["stage_distances"][-1]
    assert all(r < 1 for r in logs["ratios"])
