import numpy as np
import pytest

from hitchin_lab.grid import PolarGrid


def test_rejects_bad_parameters():
    with pytest.raises(ValueError):
        PolarGrid(1.0, 8, 16)
    with pytest.raises(ValueError):
        PolarGrid(0.5, 8, 15)
    with pytest.raises(ValueError):
        PolarGrid(0.5, 8, 16, beta=0.6)


def test_nodes_inside_and_increasing():
    g = PolarGrid(0.7, 16, 32)
    assert np.all(np.diff(g.r) > 0)
    assert g.r[0] > 0 and g.r[-1] < 0.7
    assert g.z.shape == g.shape == (16, 32)
    assert np.allclose(np.abs(g.z_bdry), 0.7)


def test_cell_areas_sum_to_disk_area():
    g = PolarGrid(0.6, 24, 48)
    total = (g.cell_area[:, None] * g.dtheta * np.ones(g.n_theta)).sum()
    assert total == pytest.approx(np.pi * g.r_faces[-1] ** 2, rel=1e-12)


def _f(z):
    return np.exp(z.real) * np.cos(2 * z.imag) + np.abs(z) ** 4


def _lap_f(z):
    return -3 * np.exp(z.real) * np.cos(2 * z.imag) + 16 * np.abs(z) ** 2


def test_truncation_second_order_away_from_center():
    # the innermost ring carries an O(h) angular error, as on any polar grid
    errs = []
    for n in (16, 32, 64):
        g = PolarGrid(0.8, n, 2 * n)
        E = np.abs(g.laplacian(_f(g.z), _f(g.z_bdry)) - _lap_f(g.z))
        errs.append(E[g.r > 0.2].max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_poisson_solution_second_order():
    import scipy.sparse.linalg as spla

    errs = []
    for n in (16, 32, 64):
        g = PolarGrid(0.8, n, 2 * n)
        rhs = _lap_f(g.z).ravel() - g.boundary_vector(_f(g.z_bdry)).ravel()
        u = spla.spsolve(g.laplacian_matrix.tocsc(), rhs).reshape(g.shape)
        errs.append(np.abs(u - _f(g.z)).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8), orders


def test_laplacian_matrix_matches_operator(rng):
    g = PolarGrid(0.5, 8, 16)
    u = rng.normal(size=g.shape)
    ub = rng.normal(size=g.n_theta)
    lhs = (g.laplacian_matrix @ u.ravel() + g.boundary_vector(ub).ravel()).reshape(g.shape)
    assert np.allclose(lhs, g.laplacian(u, ub))


def test_interpolator_reproduces_smooth_field():
    g = PolarGrid(0.8, 32, 64)
    f = lambda z: np.cos(z.real) + 1j * z.imag ** 2
    interp = g.interpolator(f(g.z), f(g.z_bdry))
    pts = np.array([0.0, 0.3 + 0.2j, -0.5j, 0.79])
    assert np.abs(interp(pts) - f(pts)).max() < 5e-5
    with pytest.raises(ValueError):
        interp(np.array([0.9]))


def test_coloring_separates_stencil_neighbours():
    g = PolarGrid(0.5, 6, 12)
    col = np.asarray(g.coloring).ravel()
    st = g.stencil
    for p in range(g.size):
        nb = [q for q in st[p] if q >= 0]
        for q in nb:
            assert col[p] != col[q]
