import numpy as np
import pytest

from _oracles import exact_curvature, observed_orders
from hitchin_lab.analysis import (
    IN_AB,
    NOT_IN_A,
    DiskFunction,
    chain_necessary_condition,
    class_membership,
    green,
    in_class,
    kraus_necessity_check,
    mean_log_circle,
    perturbed_existence_conditions,
    solve_curvature,
)
from hitchin_lab.bundle import DifferentialTuple, companion_higgs
from hitchin_lab.grid import PolarGrid
from hitchin_lab.hyperbolic import hx_metric


def test_green_values():
    assert green(0.5, 0.25) == pytest.approx(np.log(3.5), abs=1e-12)
    assert green(0.0, 0.5) == pytest.approx(np.log(2))
    assert green(0.3, 0.3) == np.inf
    with pytest.raises(ValueError):
        green(1.0, 0.1)


def test_green_symmetric_positive_harmonic(rng):
    z = rng.uniform(-0.6, 0.6, 20) + 1j * rng.uniform(-0.6, 0.6, 20)
    xi = rng.uniform(-0.6, 0.6, 20) + 1j * rng.uniform(-0.6, 0.6, 20)
    assert np.allclose(green(z, xi), green(xi, z))
    assert np.all(green(z, xi) > 0)
    # vanishes on the boundary
    assert abs(green(0.999999 * np.exp(0.3j), 0.2)) < 1e-5
    h = 1e-3
    x0 = 0.3 + 0.1j
    lap = (green(x0 + h, -0.4) + green(x0 - h, -0.4) + green(x0 + 1j * h, -0.4) + green(x0 - 1j * h, -0.4)
           - 4 * green(x0, -0.4)) / h**2
    assert abs(lap) < 1e-4


def test_mean_log_circle(rng):
    z = rng.uniform(-0.9, 0.9, 100) + 1j * rng.uniform(-0.9, 0.9, 100)
    r = rng.uniform(0.05, 0.95, 100)
    err = [abs(mean_log_circle(a, b) - np.log(max(abs(a), b))) for a, b in zip(z, r)]
    assert max(err) < 1e-6
    # singular point on the circle
    assert mean_log_circle(0.5, 0.5) == pytest.approx(np.log(0.5), abs=1e-8)
    with pytest.raises(ValueError):
        mean_log_circle(0.1, 0.0)


@pytest.mark.parametrize("p, verdict", [(-2.5, NOT_IN_A), (-2, NOT_IN_A), (-1.9, IN_AB), (-1, IN_AB), (0, IN_AB)])
def test_power_class_exact_and_numerical(p, verdict):
    out = class_membership(DiskFunction.power(p))
    assert out["verdict"] == verdict and out["kind"] == "exact"
    num = class_membership(DiskFunction.custom(lambda z: (1 - np.abs(z) ** 2) ** p))
    assert num["verdict"] == verdict and num["kind"] == "numerical evidence"


def test_abs_poly_class():
    assert class_membership(DiskFunction.abs_poly_sq([0, 1, 2]))["verdict"] == IN_AB
    assert class_membership(lambda z: np.abs(z) ** 2)["verdict"] == IN_AB


def test_in_class():
    assert in_class(IN_AB, "A") and in_class(IN_AB, "Ab")
    assert not in_class(NOT_IN_A, "A")
    with pytest.raises(ValueError):
        in_class(IN_AB, "B")
    with pytest.raises(ValueError):
        DiskFunction(lambda z: z, form="other")


def test_exact_curvature_solution_second_order():
    errs = []
    for n_r in (16, 32, 64):
        g = PolarGrid(0.9, n_r, 2 * n_r)
        u, rep = solve_curvature([1.0], g, u_bdry=exact_curvature)
        assert rep.converged
        errs.append(np.abs(u - exact_curvature(g.z)).max())
    assert min(observed_orders(errs)) > 1.5


def test_curvature_rejects_bad_boundary():
    g = PolarGrid(0.5, 8, 16)
    with pytest.raises(ValueError):
        solve_curvature([1.0], g, u_bdry=np.zeros(3))


def test_kraus_necessity():
    g = PolarGrid(0.8, 24, 48)
    u, _ = solve_curvature([1.0], g, u_bdry=exact_curvature)
    f = 4 * np.exp(2 * u)
    out = kraus_necessity_check(u, f, g, exact_curvature(g.z_bdry))
    assert out["ok"]
    assert out["sup_potential"] <= out["bound"]


def test_perturbed_conditions_trivial_perturbation():
    n = 2
    theta0 = lambda z: companion_higgs(DifferentialTuple.zero(n), np.asarray(z))
    zero = lambda z: np.zeros(np.shape(z) + (n, n), dtype=complex)
    out = perturbed_existence_conditions(theta0, zero, zero, lambda z: hx_metric(n, np.asarray(z)), levels=6)
    assert out["existence"] and out["bounded_existence"] and not out["inconclusive"]


def test_chain_necessary_condition():
    out = chain_necessary_condition([[0, 1], [0, 1]])
    assert out["hypothesis"] and out["N"] == 4
    assert np.allclose(np.abs(out["alpha"]), [0, 1])
    assert out["comparison_coefficient"] == pytest.approx(1.0)
    assert not chain_necessary_condition([[1], [0, 1]])["hypothesis"]
    assert not chain_necessary_condition([[0], [1]])["hypothesis"]
