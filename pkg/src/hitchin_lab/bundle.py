"""Frame-level Higgs bundle data on the unit disk.

Everything lives in one fixed trivializing frame.  Metrics are stored as
matrices ``H[i, j] = h(e_i, e_j)`` (linear in the first slot), so the
adjoint of an endomorphism ``A`` is ``M^{-1} A^* M`` with ``M = H.T``.
"""

from dataclasses import dataclass, field
from functools import lru_cache
import json

import numpy as np
from numpy.polynomial import Polynomial

from ._validation import check_hermitian_pd, check_square_batch


class PDViolation(ValueError):
    """A metric failed to be positive definite at some node."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


def _as_poly(c):
    if isinstance(c, Polynomial):
        return Polynomial(np.asarray(c.coef, dtype=complex))
    if callable(c):
        raise TypeError("expected polynomial coefficients, got a callable")
    arr = np.atleast_1d(np.asarray(c, dtype=complex))
    if arr.size == 0:
        arr = np.zeros(1, dtype=complex)
    return Polynomial(arr)


def _parse_coeffs(raw):
    """Accept ``[c0, c1, ...]`` or ``[[re, im], ...]``; lowest degree first."""
    out = []
    for c in raw:
        if isinstance(c, (list, tuple)):
            if len(c) != 2:
                raise ValueError(f"complex coefficient must be [re, im], got {c!r}")
            out.append(complex(float(c[0]), float(c[1])))
        elif isinstance(c, str):
            out.append(complex(c.replace(" ", "")))
        else:
            out.append(complex(c))
    return out


@dataclass(frozen=True)
class DifferentialTuple:
    """Holomorphic differentials q_j = Q_j(z) dz^j for j = 2..n."""

    n: int
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"rank must be an integer >= 2, got {self.n!r}")
        polys = {}
        for j, c in dict(self.coeffs).items():
            j = int(j)
            if not 2 <= j <= self.n:
                raise ValueError(f"differential degree {j} outside 2..{self.n}")
            polys[j] = _as_poly(c)
        for j in range(2, self.n + 1):
            polys.setdefault(j, Polynomial([0j]))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "coeffs", polys)

    @classmethod
    def zero(cls, n):
        return cls(n, {})

    def evaluate(self, j, z):
        return self.coeffs[j](np.asarray(z, dtype=complex))

    def is_zero(self):
        return all(not np.any(p.coef) for p in self.coeffs.values())

    def to_json(self):
        q = {}
        for j, p in self.coeffs.items():
            q[str(j)] = [[float(c.real), float(c.imag)] for c in p.coef]
        return {"n": self.n, "q": q}

    @classmethod
    def from_json(cls, obj):
        if isinstance(obj, str):
            obj = json.loads(obj)
        n = int(obj["n"])
        q = {int(k): _parse_coeffs(v) for k, v in obj.get("q", {}).items()}
        return cls(n, q)


@dataclass(frozen=True)
class HiggsMatrixField:
    """A map z -> A(z) with a shape tag; ``func`` must broadcast over z."""

    n: int
    func: object
    shape: str = "general"

    SHAPES = ("companion", "chain", "so_block", "sp_block", "general")

    def __post_init__(self):
        if self.shape not in self.SHAPES:
            raise ValueError(f"unknown shape tag {self.shape!r}")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        A = np.asarray(self.func(z), dtype=complex)
        if A.shape != z.shape + (self.n, self.n):
            A = np.broadcast_to(A, z.shape + (self.n, self.n)).copy()
        return A


@dataclass(frozen=True)
class PairingMatrix:
    S: np.ndarray

    def __post_init__(self):
        S = np.asarray(self.S, dtype=complex)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ValueError("pairing must be a square matrix")
        if not np.allclose(S, S.T, atol=1e-12):
            raise ValueError("pairing must be symmetric")
        if abs(np.linalg.det(S)) < 1e-14:
            raise ValueError("pairing must be non-degenerate")
        object.__setattr__(self, "S", S)

    @classmethod
    def antidiagonal(cls, n):
        return cls(np.eye(n)[::-1].copy())


@dataclass
class MetricField:
    """Hermitian metric sampled on a polar grid.

    ``H`` holds the interior nodes with shape (n_r, n_theta, n, n) and
    ``H_bdry`` the boundary ring with shape (n_theta, n, n).
    """

    grid: object
    H: np.ndarray
    H_bdry: np.ndarray
    det_normalized: bool = False

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        self.H_bdry = np.asarray(self.H_bdry, dtype=complex)
        g = self.grid
        if self.H.shape[:2] != (g.n_r, g.n_theta):
            raise ValueError("metric array does not match the grid")
        if self.H_bdry.shape[0] != g.n_theta:
            raise ValueError("boundary array does not match the grid")

    @property
    def n(self):
        return self.H.shape[-1]

    def validate(self, tol=1e-8):
        check_hermitian_pd(self.H, tol=tol, grid=self.grid)
        if self.det_normalized:
            d = np.linalg.det(self.H).real
            bad = np.abs(d - 1.0) > tol * 100
            if np.any(bad):
                loc = np.argwhere(bad)[0]
                raise PDViolation(f"det H deviates from 1 at node {tuple(loc)}", tuple(loc))
        return self

    def to_csv(self, path):
        g = self.grid
        n = self.n
        iu = np.triu_indices(n)
        cols = ["r", "theta"]
        for i, j in zip(*iu):
            cols += [f"re_h{i + 1}{j + 1}", f"im_h{i + 1}{j + 1}"]
        rows = []
        R, T = np.meshgrid(g.r, g.theta, indexing="ij")
        flat = self.H[..., iu[0], iu[1]].reshape(-1, len(iu[0]))
        parts = np.empty((flat.shape[0], 2 * flat.shape[1]))
        parts[:, 0::2] = flat.real
        parts[:, 1::2] = flat.imag
        rows = np.column_stack([R.ravel(), T.ravel(), parts])
        np.savetxt(path, rows, delimiter=",", header=",".join(cols), comments="")


@dataclass(frozen=True)
class HolomorphicChain:
    """Chain of type (n_1, ..., n_k); for type (1,...,1) links are scalars."""

    ranks: tuple
    links: tuple
    zero_set: frozenset = frozenset()

    def __post_init__(self):
        if len(self.links) != len(self.ranks) - 1:
            raise ValueError("a chain with k summands has k-1 links")
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        object.__setattr__(self, "zero_set", frozenset(self.zero_set))

    @property
    def n(self):
        return sum(self.ranks)

    def is_line_chain(self):
        return all(r == 1 for r in self.ranks)

    def link_values(self, z):
        z = np.asarray(z, dtype=complex)
        vals = []
        for i, g in enumerate(self.links):
            if i + 1 in self.zero_set:
                vals.append(np.zeros_like(z))
            elif isinstance(g, Polynomial):
                vals.append(g(z))
            elif callable(g):
                vals.append(np.broadcast_to(np.asarray(g(z), dtype=complex), z.shape))
            else:
                vals.append(np.full(z.shape, complex(g)))
        return vals

    def higgs(self):
        n = self.n
        if not self.is_line_chain():
            raise NotImplementedError("matrix form only for line chains")

        def func(z):
            vals = self.link_values(z)
            A = np.zeros(np.shape(z) + (n, n), dtype=complex)
            for k, v in enumerate(vals):
                A[..., k + 1, k] = v
            return A

        return HiggsMatrixField(n, func, "chain")


def companion_higgs(q, z):
    """Matrix of theta(q) at z: unit subdiagonal, Q_j on superdiagonal j-1."""
    n = q.n
    z = np.asarray(z, dtype=complex)
    A = np.zeros(z.shape + (n, n), dtype=complex)
    idx = np.arange(n - 1)
    A[..., idx + 1, idx] = 1.0
    for j in range(2, n + 1):
        d = j - 1
        v = q.evaluate(j, z)
        k = np.arange(n - d)
        A[..., k, k + d] = v[..., None]
    return A


def companion_field(q):
    return HiggsMatrixField(q.n, lambda z: companion_higgs(q, z), "companion")


def _charpoly_coeffs(A):
    """Coefficients c_1..c_n of det(lambda I - A) = lambda^n + c_1 lambda^{n-1} + ...

    Uses the Faddeev-LeVerrier recursion, which is exact in the entries
    up to rounding and avoids eigenvalue round trips.
    """
    A = np.asarray(A, dtype=complex)
    n = A.shape[-1]
    I = np.broadcast_to(np.eye(n, dtype=complex), A.shape)
    Mk = np.zeros_like(A)
    c = []
    ck = np.ones(A.shape[:-2], dtype=complex)
    for k in range(1, n + 1):
        Mk = A @ Mk + ck[..., None, None] * I
        ck = -np.trace(A @ Mk, axis1=-2, axis2=-1) / k
        c.append(ck)
    return np.stack(c, axis=-1)


@lru_cache(maxsize=None)
def _invariant_map(n):
    """Symbolic char-poly coefficients of the companion matrix as functions of q.

    Returns, for k = 2..n, the pair (alpha_k, g_k) with
    c_k(q) = alpha_k * q_k + g_k(q_2, ..., q_{k-1}).
    """
    import sympy as sp

    qs = sp.symbols(f"q2:{n + 1}")
    lam = sp.Symbol("lam")
    A = sp.zeros(n, n)
    for i in range(n - 1):
        A[i + 1, i] = 1
    for j in range(2, n + 1):
        for k in range(n - j + 1):
            A[k, k + j - 1] = qs[j - 2]
    poly = sp.Poly((lam * sp.eye(n) - A).det(method="berkowitz"), lam)
    coeffs = poly.all_coeffs()
    out = []
    for k in range(2, n + 1):
        ck = sp.expand(coeffs[k])
        qk = qs[k - 2]
        alpha = sp.Poly(ck, qk).coeff_monomial(qk)
        rest = sp.expand(ck - alpha * qk)
        if rest.has(qk) or any(rest.has(s) for s in qs[k - 1:]):
            raise RuntimeError("char-poly map is not triangular")
        f = sp.lambdify(qs[: k - 2], rest, "numpy") if k > 2 else (lambda *a, r=rest: complex(r))
        out.append((complex(alpha), f))
    return out


def charpoly_invariants(A):
    """Invariant values (p_2, ..., p_n) calibrated so that p(theta(q)) = q."""
    A = np.asarray(A, dtype=complex)
    check_square_batch(A)
    n = A.shape[-1]
    if n < 2:
        return np.zeros(A.shape[:-2] + (0,), dtype=complex)
    c = _charpoly_coeffs(A)
    p = []
    for k, (alpha, rest) in enumerate(_invariant_map(n), start=2):
        val = (c[..., k - 1] - rest(*p)) / alpha
        p.append(val)
    return np.stack(p, axis=-1)


def build_graded_chain(field, samples=None, tol=1e-12):
    """Chain whose links are the subdiagonal entries of a Higgs matrix field."""
    n = field.n
    if samples is None:
        rng = np.random.default_rng(0)
        rad = np.sqrt(rng.uniform(0, 0.98, 64))
        samples = rad * np.exp(2j * np.pi * rng.uniform(size=64))
    A = field(np.asarray(samples))
    low = np.tril(np.ones((n, n), dtype=bool), -2)
    if np.any(np.abs(A[..., low]) > tol):
        raise ValueError("field has nonzero entries below the subdiagonal")

    def make_link(k):
        return lambda z: field(np.asarray(z, dtype=complex))[..., k + 1, k]

    links = tuple(make_link(k) for k in range(n - 1))
    return HolomorphicChain((1,) * n, links)


def _values(H):
    if isinstance(H, MetricField):
        return H.H
    return np.asarray(H, dtype=complex)


def leading_minors(H):
    """Leading principal minors Delta_1..Delta_n via Cholesky."""
    H = _values(H)
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        ev = np.linalg.eigvalsh(H)[..., 0]
        loc = tuple(np.argwhere(~(ev > 0))[0]) if ev.ndim else ()
        raise PDViolation(f"metric not positive definite at node {loc}", loc)
    d = np.abs(np.diagonal(L, axis1=-2, axis2=-1)) ** 2
    return np.cumprod(d, axis=-1)


def weak_domination_margins(H, H_ref):
    """v_k = log(Delta_k(H) / Delta_k(H_ref)) for k = 1..n-1."""
    a = np.log(leading_minors(H))
    b = np.log(leading_minors(H_ref))
    if a.shape != b.shape:
        raise ValueError("metrics live on different grids or ranks")
    return (a - b)[..., :-1]


def gram_frame(H):
    """Upper-triangular P with positive diagonal and H = (P^{-1})^T conj(P^{-1}).

    The columns of P are the Gram-Schmidt orthonormalization of the frame.
    """
    H = np.asarray(H, dtype=complex)
    L = np.linalg.cholesky(H)
    n = H.shape[-1]
    I = np.broadcast_to(np.eye(n, dtype=complex), H.shape)
    return np.linalg.solve(np.swapaxes(L, -1, -2), I)


def compatibility_defect(H, S):
    """Deviation of the induced antilinear map from an involution.

    With H linear in the first slot the real structure is u -> M conj(u) for
    M = S^{-1} H, and it squares to M conj(M).  The defect is the
    Frobenius norm of M conj(M) - I measured in an h-orthonormal frame, which
    vanishes exactly when h is compatible with S and does not depend on the
    frame used to write H and S.
    """
    H = _values(H)
    S = S.S if isinstance(S, PairingMatrix) else np.asarray(S, dtype=complex)
    n = H.shape[-1]
    M = np.linalg.solve(np.broadcast_to(S, H.shape), H)
    X = M @ np.conj(M) - np.eye(n)
    P = gram_frame(H)
    Y = np.linalg.solve(P, X @ P)
    return np.linalg.norm(Y, axis=(-2, -1))


def endomorphism_s(H1, H2):
    """Matrix of s(h1, h2), defined by h2(u, v) = h1(s u, v)."""
    H1 = _values(H1)
    H2 = _values(H2)
    return np.linalg.solve(np.swapaxes(H1, -1, -2), np.swapaxes(H2, -1, -2))


def s_eigenvalues(H1, H2):
    """Eigenvalues of s(h1, h2): generalized eigenvalues of (H2, H1)."""
    H1 = _values(H1)
    H2 = _values(H2)
    try:
        L = np.linalg.cholesky(H1)
    except np.linalg.LinAlgError:
        raise PDViolation("first metric is not positive definite")
    n = H1.shape[-1]
    I = np.broadcast_to(np.eye(n, dtype=complex), H1.shape)
    Li = np.linalg.solve(L, I)
    X = Li @ H2 @ np.conj(np.swapaxes(Li, -1, -2))
    return np.linalg.eigvalsh(X)


def mutual_boundedness_report(H1, H2):
    """(sup |s|, sup |s^{-1}|) with |.| the h1-operator norm."""
    ev = s_eigenvalues(H1, H2)
    return float(np.max(ev[..., -1])), float(np.max(1.0 / ev[..., 0]))


def s_distance(H1, H2):
    """Pointwise |s(h1, h2) - id| in the h1-operator norm."""
    ev = s_eigenvalues(H1, H2)
    return np.max(np.abs(ev - 1.0), axis=-1)
