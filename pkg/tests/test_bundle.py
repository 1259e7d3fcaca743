import numpy as np
from numpy.polynomial import Polynomial
import pytest

from hitchin_lab.bundle import (
    DifferentialTuple,
    HolomorphicChain,
    MetricField,
    PDViolation,
    PairingMatrix,
    build_graded_chain,
    charpoly_invariants,
    companion_field,
    companion_higgs,
    compatibility_defect,
    endomorphism_s,
    gram_frame,
    leading_minors,
    mutual_boundedness_report,
    s_distance,
    weak_domination_margins,
)
from hitchin_lab.grid import PolarGrid
from hitchin_lab.hyperbolic import hx_metric


def _random_pd(rng, n, shape=()):
    X = rng.normal(size=shape + (n, n)) + 1j * rng.normal(size=shape + (n, n))
    return X @ np.conj(np.swapaxes(X, -1, -2)) + n * np.eye(n)


def test_differential_tuple_json_roundtrip():
    q = DifferentialTuple(3, {2: [0, 1], 3: [1j, 0, 2]})
    back = DifferentialTuple.from_json(q.to_json())
    z = np.array([0.1, 0.3j])
    for j in (2, 3):
        assert np.allclose(back.evaluate(j, z), q.evaluate(j, z))
    assert DifferentialTuple.zero(4).is_zero()


@pytest.mark.parametrize("bad", [{1: [1]}, {4: [1]}])
def test_differential_tuple_rejects_degrees(bad):
    with pytest.raises(ValueError):
        DifferentialTuple(3, bad)


def test_companion_shape_and_invariants(rng):
    q = DifferentialTuple(4, {2: [0.3, 1], 3: [0, 0, 1], 4: [2j]})
    z = rng.uniform(-0.6, 0.6, 10) + 1j * rng.uniform(-0.6, 0.6, 10)
    A = companion_higgs(q, z)
    assert np.allclose(np.diagonal(A, -1, -2, -1), 1)
    assert np.allclose(np.tril(A, -2), 0)
    p = charpoly_invariants(A)
    for j in range(2, 5):
        assert np.allclose(p[:, j - 2], q.evaluate(j, z), atol=1e-12)


def test_invariants_are_conjugation_invariant(rng):
    q = DifferentialTuple(3, {2: [1, 2], 3: [0.5]})
    A = companion_higgs(q, np.array([0.2 + 0.1j]))[0]
    g = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    B = g @ A @ np.linalg.inv(g)
    assert np.allclose(charpoly_invariants(A), charpoly_invariants(B), atol=1e-10)


def test_graded_chain_of_companion():
    q = DifferentialTuple(3, {2: [0, 1]})
    chain = build_graded_chain(companion_field(q), samples=np.array([0.1, 0.2j]))
    assert chain.ranks == (1, 1, 1)
    assert np.allclose(chain.link_values(np.array([0.3]))[0], 1)


def test_chain_higgs_and_zero_set():
    ch = HolomorphicChain((1, 1, 1), (Polynomial([0, 1]), 2.0), zero_set={2})
    A = ch.higgs()(np.array([0.5]))
    assert A[0, 1, 0] == pytest.approx(0.5)
    assert A[0, 2, 1] == 0
    with pytest.raises(ValueError):
        HolomorphicChain((1, 1), ())


def test_leading_minors_and_pd_violation(rng):
    H = _random_pd(rng, 3)
    d = leading_minors(H)
    assert d[0] == pytest.approx(H[0, 0].real)
    assert d[-1] == pytest.approx(np.linalg.det(H).real)
    with pytest.raises(PDViolation):
        leading_minors(np.diag([1.0, -1.0]))


def test_margins_vanish_against_self(rng):
    H = _random_pd(rng, 3, (4,))
    assert np.allclose(weak_domination_margins(H, H), 0)


def test_gram_frame_orthonormalizes(rng):
    H = _random_pd(rng, 4)
    P = gram_frame(H)
    assert np.allclose(np.tril(P, -1), 0)
    assert np.allclose(P.T @ H @ np.conj(P), np.eye(4), atol=1e-10)


def test_compatibility_defect():
    S = PairingMatrix.antidiagonal(3)
    assert compatibility_defect(np.eye(3), np.eye(3)).max() < 1e-14
    z = np.array([0.0, 0.4, 0.3j])
    assert compatibility_defect(hx_metric(3, z), S).max() < 1e-12
    H = np.diag([2.0, 1.0, 2.0])
    assert compatibility_defect(H, S) > 0.1


def test_pairing_validation():
    with pytest.raises(ValueError):
        PairingMatrix(np.array([[0, 1], [2, 0]]))
    with pytest.raises(ValueError):
        PairingMatrix(np.zeros((2, 2)))


def test_s_endomorphism_and_distance(rng):
    H1 = _random_pd(rng, 3)
    s = endomorphism_s(H1, 2 * H1)
    assert np.allclose(s, 2 * np.eye(3))
    assert s_distance(H1, H1) == pytest.approx(0, abs=1e-12)
    assert s_distance(H1, 1.5 * H1) == pytest.approx(0.5)
    hi, lo = mutual_boundedness_report(H1, 4 * H1)
    assert hi == pytest.approx(4) and lo == pytest.approx(0.25)


def test_metric_field_validation_and_csv(tmp_path):
    g = PolarGrid(0.5, 4, 8)
    H = hx_metric(2, g.z)
    f = MetricField(g, H, hx_metric(2, g.z_bdry), det_normalized=True)
    f.validate()
    f.to_csv(tmp_path / "m.csv")
    data = np.loadtxt(tmp_path / "m.csv", delimiter=",", skiprows=1)
    assert data.shape == (g.size, 2 + 6)
    bad = H.copy()
    bad[1, 2] = np.diag([1.0, -1.0])
    with pytest.raises(PDViolation):
        MetricField(g, bad, hx_metric(2, g.z_bdry)).validate()
