import numpy as np
import pytest

from _oracles import observed_orders
from hitchin_lab.grid import PolarGrid
from hitchin_lab.realforms import (
    SOData,
    Sp4Data,
    antidiagonal,
    block_charpoly_defect,
    block_to_chain,
    chain_to_block,
    collier_full_solve,
    collier_graded_solve,
    gothen_zero_metric,
    random_sp4_data,
    so_assoc_higgs,
    so_chain_order,
    so_eta,
    so_eta_dagger,
    so_existence_condition,
    so_pairing,
    so_reference_metric,
    so_regular_semisimple,
    sp4_assoc_higgs,
    sp4_full_solve,
    sp4_graded_solve,
    sp4_reference_metric,
    sp4_regular_semisimple,
    sp4_rss_bruteforce,
    structure_compat_defect,
)


def test_so_data_validation():
    with pytest.raises(ValueError):
        SOData(2, q={3: [1]})
    with pytest.raises(ValueError):
        SOData(2, q={4: [1]})
    with pytest.raises(ValueError):
        SOData(0)
    with pytest.raises(ValueError):
        SOData(2, h_M=0)


def test_so_eta_shape_and_adjoint():
    d = SOData(3, mu=[1, 1], nu=[0, 2], q={2: [0.5], 4: [0, 1]})
    z = np.array([0.2, -0.3j])
    eta = so_eta(d, z)
    assert eta.shape == (2, 4, 3)
    assert np.allclose(eta[:, 1, 0], 1) and np.allclose(eta[:, 2, 1], 1)
    assert np.allclose(eta[:, 1, 1], 0.5) and np.allclose(eta[:, 1, 2], z)
    # eta^dagger is the adjoint for the two antidiagonal forms
    QV, QW = antidiagonal(3), antidiagonal(4)
    ed = so_eta_dagger(eta)
    assert np.allclose(np.swapaxes(eta, -1, -2) @ QW, QV @ ed)
    A = so_assoc_higgs(d, z)
    S = so_pairing(3)
    # the field is skew-adjoint-free: S A is symmetric, so A is S-self-adjoint
    assert np.allclose(S @ A, np.swapaxes(S @ A, -1, -2))


def test_so_regular_semisimple():
    assert so_regular_semisimple(SOData(2, mu=[1], nu=[0, 1], q={2: [0.3]}))["found"]
    out = so_regular_semisimple(SOData(2, mu=[0], nu=[0], q={}))
    assert not out["found"] and out["witness"] is None


def test_block_charpoly_identity(rng):
    worst = 0.0
    for _ in range(200):
        m = int(rng.integers(1, 5))
        N = m + int(rng.integers(0, 3))
        A = rng.normal(size=(N, m)) + 1j * rng.normal(size=(N, m))
        B = rng.normal(size=(m, N)) + 1j * rng.normal(size=(m, N))
        worst = max(worst, block_charpoly_defect(A, B, rng.normal(size=4) + 2j).max())
    assert worst <= 1e-10


def test_chain_order_roundtrip(rng):
    perm = so_chain_order(3)
    assert sorted(perm) == list(range(7))
    H = rng.normal(size=(5, 7, 7))
    assert np.allclose(chain_to_block(block_to_chain(H, perm), perm), H)


def test_so_reference_metric_compatible():
    d = SOData(2, mu=[1])
    z = np.array([0.0, 0.4, 0.2 + 0.5j])
    for kind in ("hx", "h1"):
        H = chain_to_block(so_reference_metric(d, z, kind), so_chain_order(2))
        assert structure_compat_defect(H, "so", 2).max() < 1e-12
    with pytest.raises(ValueError):
        so_reference_metric(d, z, "other")


def test_so_existence_condition():
    assert so_existence_condition(SOData(2, mu=[1, 1]))["verdict"] == "in_Ab"
    assert not so_existence_condition(SOData(2, mu=[0]))["usable"]
    out = so_existence_condition(SOData(2), weight=lambda z: (1 - np.abs(z) ** 2) ** -3)
    assert out["verdict"] == "not_in_A" and not out["usable"]


def test_sp4_invariants_and_rss(rng):
    d = Sp4Data(mu=[1], nu=[0, 1], q2=[0.5])
    z = np.array([0.3, -0.2j])
    A = sp4_assoc_higgs(d, z)
    # char poly of ((0, b), (g, 0)) is det(t^2 - b g)
    for zi, Ai in zip(z, A):
        bg = d.beta(zi) @ Sp4Data.gamma()
        t = 0.7 + 0.4j
        lhs = np.linalg.det(t * np.eye(4) - Ai)
        assert lhs == pytest.approx(np.linalg.det(t * t * np.eye(2) - bg), abs=1e-12)
    assert sp4_regular_semisimple(d)["regular_semisimple"]
    mism = 0
    for kind in [None, "mu", "nu", "both", "det"] * 30:
        dd = random_sp4_data(rng, degenerate=kind)
        mism += sp4_regular_semisimple(dd)["regular_semisimple"] != sp4_rss_bruteforce(dd)
    assert mism == 0


def test_sp4_reference_compatible():
    d = Sp4Data(h_L=2.0)
    z = np.array([0.1, 0.6j])
    assert structure_compat_defect(sp4_reference_metric(d, z), "sp4").max() < 1e-12


def test_structure_defect_detects_mixing():
    H = np.eye(5, dtype=complex)
    H[0, 3] = H[3, 0] = 0.1
    assert structure_compat_defect(H[None], "so", 2).max() >= 0.1
    with pytest.raises(ValueError):
        structure_compat_defect(H[None], "other", 2)


def test_collier_graded_and_full():
    g = PolarGrid(0.7, 16, 32)
    d = SOData(2, mu=[1.0])
    graded, rep, defect = collier_graded_solve(d, g)
    assert rep.converged and defect.max() <= 1e-8
    fld, rep2, defect2, margins = collier_full_solve(d, graded)
    assert rep2.converged and defect2.max() <= 1e-8


def test_sp4_graded_and_full():
    g = PolarGrid(0.7, 16, 32)
    d = Sp4Data(mu=[1.0], nu=[0, 0.5], q2=[0.2])
    graded, rep, defect = sp4_graded_solve(d, g)
    assert rep.converged and defect.max() <= 1e-8
    fld, rep2, defect2, margins = sp4_full_solve(d, graded)
    assert rep2.converged and defect2.max() <= 1e-8


def test_gothen_zero_second_order():
    res = []
    for n_r in (16, 32, 64):
        H, info = gothen_zero_metric(Sp4Data(mu=[0], nu=[0], q2=[0]), PolarGrid(0.8, n_r, 2 * n_r))
        res.append(info["residual"])
    assert min(observed_orders(res)) > 1.5
    with pytest.raises(ValueError):
        gothen_zero_metric(Sp4Data(mu=[1]), PolarGrid(0.8, 8, 16))


def test_gothen_zero_with_q2():
    H, info = gothen_zero_metric(Sp4Data(mu=[0], nu=[0], q2=[0.3]), PolarGrid(0.8, 24, 48))
    assert info["h0"] == "solved" and info["residual"] < 1e-2
    assert structure_compat_defect(H.H, "sp4").max() < 1e-12
