"""Finite-dimensional estimates: triangular frames, cyclic vectors, closeness.

Matrix sizes |X| are max-entry magnitudes; |X|_h is the operator norm in an
h-orthonormal frame.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg as sla

from .bundle import endomorphism_s, gram_frame


# ---------------------------------------------------------------- triangular matrices


def _check_upper(P):
    P = np.asarray(P)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    if np.any(np.tril(P, -1) != 0):
        raise ValueError("P must be upper triangular")
    if np.any(np.diag(P) == 0):
        raise ValueError("P must have non-vanishing diagonal")
    return P


def triangular_inverse(P):
    """P^{-1} by the alternating sum over strictly increasing index chains.

    (P^{-1})_{ij} = sum_m sum_{i=i_0<...<i_m=j} (-1)^m prod (P_{i_p i_p})^{-1}
    prod P_{i_p i_{p+1}}.
    """
    P = _check_upper(P)
    n = P.shape[0]
    dinv = 1.0 / np.diag(P)
    out = np.zeros_like(P, dtype=np.result_type(P.dtype, float))
    out[np.arange(n), np.arange(n)] = dinv
    for i in range(n):
        for j in range(i + 1, n):
            total = 0.0
            inner = range(i + 1, j)
            for m in range(1, j - i + 1):
                for mid in combinations(inner, m - 1):
                    chain = (i,) + mid + (j,)
                    term = (-1) ** m * np.prod(dinv[list(chain)])
                    for a, b in zip(chain[:-1], chain[1:]):
                        term = term * P[a, b]
                    total = total + term
            out[i, j] = total
    return out


@dataclass
class TriangularFrameData:
    P: np.ndarray
    A: np.ndarray
    c: float
    d: float
    e: float

    def __post_init__(self):
        self.P = _check_upper(np.asarray(self.P))
        A = np.asarray(self.A)
        n = self.P.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must match P")
        if np.any(np.tril(A, -2) != 0):
            raise ValueError("A must vanish below the subdiagonal")
        if np.any(np.diag(A, -1) == 0):
            raise ValueError("A must have non-vanishing subdiagonal")
        self.A = A

    @property
    def n(self):
        return self.P.shape[0]

    @property
    def A_norm(self):
        return float(np.abs(self.A).max())

    @property
    def A_tilde(self):
        return float(np.max(1.0 / np.abs(np.diag(self.A, -1)))) if self.n > 1 else 0.0

    @classmethod
    def from_matrices(cls, P, A):
        """Tight hypothesis constants read off the matrices."""
        P = np.asarray(P)
        c = float(np.abs(np.linalg.solve(P, A @ P)).max())
        return cls(P, A, c, float(abs(P[0, 0])), float(abs(np.linalg.det(P))))


def diagonal_bounds(n, c, d, e, A_tilde):
    """Lower and upper bounds on |P_ii| (i = 1..n) from the subdiagonal of P^{-1} A P.

    From |P_kk| <= ct |P_{k+1,k+1}| with ct = c A_tilde one gets
    |P_ii| >= d ct^{1-i}, and combining with |det P| <= e,
    |P_ii| <= (e d^{1-i})^{1/(n+1-i)} ct^{(i-1)(i-2)/(2(n+1-i))} ct^{(n-i)/2}.
    """
    ct = c * A_tilde
    i = np.arange(1, n + 1, dtype=float)
    lower = d * ct ** (1 - i)
    upper = (e * d ** (1 - i)) ** (1 / (n + 1 - i)) * ct ** ((i - 1) * (i - 2) / (2 * (n + 1 - i))) * ct ** ((n - i) / 2)
    return lower, upper


def _inverse_bounds(U, B1):
    """D_ij >= |(P^{-1})_ij| from (P^{-1})_ij = -P_ii^{-1} sum_{i<k<=j} P_ik (P^{-1})_kj."""
    n = U.shape[0]
    D = np.zeros_like(U)
    for j in range(n):
        D[j, j] = B1
        for i in range(j - 1, -1, -1):
            D[i, j] = B1 * sum(U[i, k] * D[k, j] for k in range(i + 1, j + 1))
    return D


def entry_bound(data):
    """Explicit C with |P_ij| + |(P^{-1})_ij| <= C, composing both propositions.

    Step 1: B1 bounds |P_ii| and |P_ii|^{-1} (diagonal_bounds).
    Step 2: induction on the offset t0 + 1 = j - i.  Isolating the term with
    P_{i,j} in (P^{-1} A P)_{i, j-1} gives
      |P_ij| <= B1^3 A_tilde (c + sum_{T'} D_il |A| U_{k,j-1} + B1 |A| U_{i-1,j-1})
                + sum_{i<k<j} U_ik B1 W_kj,
    where W_kj bounds the chain sums from k to j with interior diagonal factors.
    """
    n = data.n
    lower, upper = diagonal_bounds(n, data.c, data.d, data.e, data.A_tilde)
    B1 = float(max(np.max(upper), np.max(1.0 / lower)))
    Anorm = data.A_norm
    At = data.A_tilde
    c = data.c
    U = np.zeros((n, n))
    U[np.arange(n), np.arange(n)] = B1
    for t in range(1, n):
        D = _inverse_bounds(U, B1)
        for i in range(0, n - t):
            j = i + t
            jm = j - 1
            s = c
            # T': l ranges over i..jm+1, k over l-1..jm, minus (i, i-1) and (j, jm)
            for l in range(i, j + 1):
                for k in range(max(l - 1, 0), jm + 1):
                    if (l, k) == (i, i - 1) or (l, k) == (j, jm):
                        continue
                    if l > jm + 1 or k < l - 1:
                        continue
                    s += D[i, l] * Anorm * U[k, jm]
            if i >= 1:
                s += B1 * Anorm * U[i - 1, jm]
            bound = B1**3 * At * s
            # chains with at least two steps between i and j
            W = np.zeros(n)
            for k in range(j - 1, i, -1):
                W[k] = U[k, j] + sum(U[k, l] * B1 * W[l] for l in range(k + 1, j))
            bound += sum(U[i, k] * B1 * W[k] for k in range(i + 1, j))
            U[i, j] = bound
    D = _inverse_bounds(U, B1)
    C = float(np.max(U + D))
    return C, B1, U, D


def check_hypotheses(data):
    P, A = data.P, data.A
    failures = []
    tol = 1e-12
    conj = np.abs(np.linalg.solve(P, A @ P)).max()
    if conj > data.c * (1 + tol):
        failures.append(f"|P^-1 A P| = {conj:.6g} exceeds c = {data.c:.6g}")
    if abs(P[0, 0]) < data.d * (1 - tol):
        failures.append(f"|P_11| = {abs(P[0, 0]):.6g} below d = {data.d:.6g}")
    det = abs(np.linalg.det(P))
    if det > data.e * (1 + tol):
        failures.append(f"|det P| = {det:.6g} exceeds e = {data.e:.6g}")
    return failures


def verify_bound_main(data):
    """Check |P_ij| + |(P^{-1})_ij| <= C entrywise; returns (C, holds, details)."""
    failures = check_hypotheses(data)
    if failures:
        return None, False, {"hypothesis_failed": failures}
    C, B1, U, D = entry_bound(data)
    Pi = np.linalg.inv(data.P)
    lhs = np.abs(data.P) + np.abs(Pi)
    lower, upper = diagonal_bounds(data.n, data.c, data.d, data.e, data.A_tilde)
    diag = np.abs(np.diag(data.P))
    diag_ok = bool(np.all(diag >= lower * (1 - 1e-10)) and np.all(diag <= upper * (1 + 1e-10)))
    entry_ok = bool(np.all(np.abs(data.P) <= U * (1 + 1e-9) + 1e-300) and lhs.max() <= C * (1 + 1e-9))
    return C, diag_ok and entry_ok, {"B1": B1, "max_entry": float(lhs.max()), "diag_ok": diag_ok}


def random_triangular_data(rng, n):
    P = np.triu(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))
    diag = rng.uniform(0.3, 3.0, n) * np.exp(2j * np.pi * rng.uniform(size=n))
    P[np.arange(n), np.arange(n)] = diag
    A = np.triu(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)), -1)
    if n > 1:
        sub = rng.uniform(0.3, 2.0, n - 1) * np.exp(2j * np.pi * rng.uniform(size=n - 1))
        A[np.arange(1, n), np.arange(n - 1)] = sub
    return TriangularFrameData.from_matrices(P, A)


# ---------------------------------------------------------------- frames and norms


def gram_schmidt_P(H):
    """Upper triangular P(h) whose columns orthonormalize the standard frame under H."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be a square matrix")
    if not np.allclose(H, H.conj().T, atol=1e-12 * (1 + np.abs(H).max())):
        raise ValueError("H must be Hermitian")
    try:
        return gram_frame(H)
    except np.linalg.LinAlgError:
        raise ValueError("H must be positive definite")


def h_norm(X, H):
    """Operator norm of the endomorphism X measured by h."""
    P = gram_schmidt_P(H)
    return float(np.linalg.norm(np.linalg.solve(P, X @ P), 2))


def vector_norm(v, H):
    v = np.asarray(v, dtype=complex)
    return float(np.sqrt(np.real(v @ H @ np.conj(v))))


def volume_ratio(H):
    """|e_1 ^ ... ^ e_n|_h / |e_1|_h^n."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[0]
    return float(np.sqrt(np.linalg.det(H).real) / H[0, 0].real ** (n / 2))


def omega_cyclic(f, v, H=None):
    """|v ^ f v ^ ... ^ f^{n-1} v|_h, asserting the bound |f|_h^{n(n-1)/2} |v|_h^n."""
    f = np.asarray(f, dtype=complex)
    v = np.asarray(v, dtype=complex)
    n = f.shape[0]
    H = np.eye(n, dtype=complex) if H is None else np.asarray(H, dtype=complex)
    cols = [v]
    for _ in range(n - 1):
        cols.append(f @ cols[-1])
    K = np.column_stack(cols)
    P = gram_schmidt_P(H)
    w = abs(np.linalg.det(np.linalg.solve(P, K)))
    bound = h_norm(f, H) ** (n * (n - 1) / 2) * vector_norm(v, H) ** n
    assert w <= bound * (1 + 1e-9) + 1e-14, "omega exceeds |f|^{n(n-1)/2} |v|^n"
    return float(w)


def is_cyclic(f, v, tol=1e-9):
    """Minimal-polynomial test: v is cyclic iff its Krylov matrix has full rank."""
    f = np.asarray(f, dtype=complex)
    n = f.shape[0]
    cols = [np.asarray(v, dtype=complex)]
    for _ in range(n - 1):
        cols.append(f @ cols[-1])
    sv = np.linalg.svd(np.column_stack(cols), compute_uv=False)
    return bool(sv[-1] > tol * max(sv[0], 1.0))


def cyclic_perturbation_radius(n, A, rho):
    """eps_0 = rho / (2 n (1 + A)^{n(n-1)/2})."""
    if A < 0 or rho <= 0:
        raise ValueError("need A >= 0 and rho > 0")
    return rho / (2 * n * (1 + A) ** (n * (n - 1) / 2))


def verify_cyclic_perturbation(f, v, H, rng, samples=1000, scale=0.99):
    """Sample f_1 with |f - f_1|_h = scale * eps_0 and check |omega(f_1, v)| > rho |v|^n / 2."""
    n = f.shape[0]
    A = h_norm(f, H)
    vn = vector_norm(v, H)
    rho = omega_cyclic(f, v, H) / vn**n
    eps0 = cyclic_perturbation_radius(n, A, rho)
    P = gram_schmidt_P(H)
    fails = 0
    for _ in range(samples):
        X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        X *= scale * eps0 / np.linalg.norm(X, 2)
        f1 = f + P @ X @ np.linalg.inv(P)
        if not omega_cyclic(f1, v, H) > rho * vn**n / 2:
            fails += 1
    return {"eps0": eps0, "rho": rho, "A": A, "failures": fails, "samples": samples}


# ---------------------------------------------------------------- pairings


def eigenspace_orthogonality_defect(f, S, gap=1e-6):
    """max |u^T S v| over unit vectors from distinct generalized eigenspaces.

    Returns (defect, verdict) with verdict "ok" or "ill-conditioned".
    """
    f = np.asarray(f, dtype=complex)
    S = np.asarray(S, dtype=complex)
    n = f.shape[0]
    ev = sla.eigvals(f)
    clusters = []
    for lam in ev:
        for cl in clusters:
            if abs(lam - np.mean(cl)) < gap:
                cl.append(lam)
                break
        else:
            clusters.append([lam])
    means = [np.mean(cl) for cl in clusters]
    for a in range(len(means)):
        for b in range(a + 1, len(means)):
            if abs(means[a] - means[b]) < 10 * gap:
                return np.nan, "ill-conditioned"
    spaces = []
    for cl, mu in zip(clusters, means):
        k = len(cl)
        B = np.linalg.matrix_power(f - mu * np.eye(n), k)
        ns = sla.null_space(B, rcond=1e-8 * max(1.0, np.abs(B).max()))
        if ns.shape[1] != k:
            return np.nan, "ill-conditioned"
        spaces.append(ns)
    defect = 0.0
    for a in range(len(spaces)):
        for b in range(a + 1, len(spaces)):
            defect = max(defect, float(np.abs(spaces[a].T @ S @ spaces[b]).max()))
    return defect, "ok"


def kappa_projection(X, S):
    """Projection of a Hermitian log-direction onto the S-compatible subspace X = -S X^T S."""
    return 0.5 * (X - S @ X.T @ S)


@dataclass
class CompatTriple:
    """Pairing S and an S-self-adjoint f of the shape f(e_k) = e_{k+1} + sum_{j<=k} a_{jk} e_j."""

    S: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=complex)
        self.f = np.asarray(self.f, dtype=complex)
        n = self.f.shape[0]
        if not np.allclose(self.S, self.S.T):
            raise ValueError("S must be symmetric")
        if not np.allclose(self.S @ self.f, (self.S @ self.f).T, atol=1e-10):
            raise ValueError("f must be self-adjoint for S (S f symmetric)")
        if n > 1 and not np.allclose(np.diag(self.f, -1), 1):
            raise ValueError("subdiagonal of f must be 1")
        if np.any(np.tril(self.f, -2) != 0):
            raise ValueError("f must vanish below the subdiagonal")

    @property
    def n(self):
        return self.f.shape[0]


def closeness_constants(n, A, rho):
    eps0 = cyclic_perturbation_radius(n, A, rho)
    eps1 = 0.5 * (10 * n) ** (-3) * eps0
    return eps0, eps1, n / eps1


def closeness_verify(triple, H, H2, A=None, rho=None):
    """Check |s(h, h') - id|_h <= C_1 eps when eps = |[s, f]|_h < eps_1.

    A and rho default to the values realised by (h, h'); the returned dict
    carries ``in_regime`` and ``holds`` (None when out of regime).
    """
    f = triple.f
    n = triple.n
    if A is None:
        A = max(h_norm(f, H), h_norm(f, H2))
    if rho is None:
        rho = min(volume_ratio(H), volume_ratio(H2))
    eps0, eps1, C1 = closeness_constants(n, A, rho)
    s = endomorphism_s(H, H2)
    eps = h_norm(s @ f - f @ s, H)
    dist = h_norm(s - np.eye(n), H)
    out = {"eps": eps, "eps1": eps1, "C1": C1, "distance": dist, "bound": C1 * eps, "A": A, "rho": rho}
    if eps >= eps1:
        out.update(in_regime=False, holds=None)
    else:
        out.update(in_regime=True, holds=bool(dist <= C1 * eps * (1 + 1e-9) + 1e-15))
    return out


def random_compat_sample(rng, n, delta=None):
    """Toeplitz f (S-self-adjoint for antidiagonal S), compatible h and a nearby compatible h'."""
    S = np.eye(n)[::-1].copy()
    a = rng.normal(size=n) * 0.5
    f = np.zeros((n, n), dtype=complex)
    f[np.arange(1, n), np.arange(n - 1)] = 1.0
    for d in range(n):
        f[np.arange(n - d), np.arange(d, n)] = a[d]
    X = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    X = 0.5 * (X + X.conj().T)
    Om = kappa_projection(X - np.trace(X) / n * np.eye(n), S) * 0.5
    e, V = np.linalg.eigh(Om)
    H = (V * np.exp(e)) @ V.conj().T
    Y = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    Y = kappa_projection(0.5 * (Y + Y.conj().T), S)
    Y /= np.linalg.norm(Y, 2)
    if delta is None:
        delta = 10 ** rng.uniform(-14, -6)
    e2, V2 = np.linalg.eigh(H)
    Hh = (V2 * np.sqrt(e2)) @ V2.conj().T
    ey, Vy = np.linalg.eigh(delta * Y)
    H2 = Hh @ ((Vy * np.exp(ey)) @ Vy.conj().T) @ Hh
    H2 = 0.5 * (H2 + H2.conj().T)
    return CompatTriple(S, f), H, H2
