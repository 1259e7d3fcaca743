import numpy as np
import pytest

from hitchin_lab.linalg import (
    CompatTriple,
    TriangularFrameData,
    check_hypotheses,
    closeness_verify,
    cyclic_perturbation_radius,
    diagonal_bounds,
    eigenspace_orthogonality_defect,
    gram_schmidt_P,
    h_norm,
    is_cyclic,
    omega_cyclic,
    random_compat_sample,
    random_triangular_data,
    triangular_inverse,
    verify_bound_main,
    verify_cyclic_perturbation,
    volume_ratio,
)


def _pd(rng, n):
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return X @ X.conj().T + n * np.eye(n)


def test_triangular_inverse(rng):
    for _ in range(300):
        n = int(rng.integers(1, 6))
        P = random_triangular_data(rng, n).P
        Q = triangular_inverse(P)
        ref = np.linalg.inv(P)
        assert np.abs(Q - ref).max() <= 1e-10 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("P", [np.ones((2, 3)), np.array([[1.0, 0], [1, 1]]), np.diag([1.0, 0.0])])
def test_triangular_inverse_rejects(P):
    with pytest.raises(ValueError):
        triangular_inverse(P)


def test_frame_data_validation(rng):
    P = np.triu(np.ones((3, 3)))
    with pytest.raises(ValueError):
        TriangularFrameData(P, np.ones((3, 3)), 1, 1, 1)
    A = np.triu(np.ones((3, 3)), -1)
    A[1, 0] = 0
    with pytest.raises(ValueError):
        TriangularFrameData(P, A, 1, 1, 1)


def test_diagonal_bounds_identity():
    lo, hi = diagonal_bounds(3, 1.0, 1.0, 1.0, 1.0)
    assert np.allclose(lo, 1) and np.allclose(hi, 1)


def test_verify_bound_main(rng):
    for _ in range(200):
        data = random_triangular_data(rng, int(rng.integers(1, 5)))
        C, holds, info = verify_bound_main(data)
        assert holds, info


def test_bound_reports_hypothesis_failure(rng):
    data = random_triangular_data(rng, 3)
    data.c = 0.5 * data.c
    assert check_hypotheses(data)
    C, holds, info = verify_bound_main(data)
    assert C is None and not holds and "hypothesis_failed" in info


def test_gram_schmidt(rng):
    H = _pd(rng, 3)
    P = gram_schmidt_P(H)
    assert np.allclose(np.tril(P, -1), 0)
    assert h_norm(np.eye(3), H) == pytest.approx(1)
    with pytest.raises(ValueError):
        gram_schmidt_P(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        gram_schmidt_P(np.diag([1.0, -1.0]))
    assert volume_ratio(np.eye(3)) == pytest.approx(1)


def test_omega_and_cyclicity(rng):
    n = 4
    f = np.diag(np.ones(n - 1), -1)
    e1 = np.eye(n)[0]
    assert is_cyclic(f, e1)
    assert omega_cyclic(f, e1) == pytest.approx(1)
    assert not is_cyclic(np.eye(n), e1)
    assert omega_cyclic(np.eye(n), e1) == pytest.approx(0, abs=1e-14)
    for _ in range(50):
        g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        v = rng.normal(size=n) + 1j * rng.normal(size=n)
        omega_cyclic(g, v, _pd(rng, n))


def test_cyclic_perturbation(rng):
    n = 3
    f = np.diag(np.ones(n - 1), -1) + np.diag([0.3, 0.1], 1)
    out = verify_cyclic_perturbation(f, np.eye(n)[0], _pd(rng, n), rng, samples=300)
    assert out["failures"] == 0
    with pytest.raises(ValueError):
        cyclic_perturbation_radius(3, -1.0, 1.0)


def test_eigenspace_orthogonality(rng):
    triple, H, _ = random_compat_sample(rng, 4)
    d, verdict = eigenspace_orthogonality_defect(triple.f, triple.S)
    if verdict == "ok":
        assert d < 1e-8
    d, verdict = eigenspace_orthogonality_defect(np.eye(3), np.eye(3)[::-1])
    assert verdict == "ok" and d == 0.0


def test_compat_triple_validation():
    S = np.eye(3)[::-1]
    with pytest.raises(ValueError):
        CompatTriple(np.array([[0, 1], [2, 0]]), np.eye(2))
    with pytest.raises(ValueError):
        CompatTriple(S, np.triu(np.ones((3, 3)), -1) + np.diag([1, 2, 3]))


def test_closeness(rng):
    in_regime = 0
    for _ in range(300):
        triple, H, H2 = random_compat_sample(rng, int(rng.integers(2, 5)))
        out = closeness_verify(triple, H, H2)
        if out["in_regime"]:
            in_regime += 1
            assert out["holds"], out
        else:
            assert out["holds"] is None
    assert in_regime > 100
