"""SO(n, n+1) and Sp(4, R) Higgs bundles on the disk.

All line bundles (M, N, L) are trivialized and carry constant flat metrics.
For SO(n, n+1) the bundle is E = V + W with V = K^{n-1} + ... + K^{1-n}
(rank n), W = M + K^{n-2} + ... + K^{2-n} + M^{-1} (rank n + 1) and both
quadratic forms antidiagonal.  For Sp(4, R), E = V + V^* with
V = N + N^{-1} K and V^* = N^{-1} + N K^{-1}.
"""

from dataclasses import dataclass, field
import time

import numpy as np
from numpy.polynomial import Polynomial

from .analysis import DiskFunction, IN_AB, class_membership, in_class
from .bundle import HolomorphicChain, MetricField, _as_poly, _values, compatibility_defect, weak_domination_margins
from .hyperbolic import conformal_factor, hx_metric
from .solver import SolverConfig, hitchin_residual, residual_norm, solve_dirichlet
from ._validation import check_positive


def antidiagonal(n):
    return np.fliplr(np.eye(n))


def _poly_is_zero(p, tol=0.0):
    return bool(np.all(np.abs(p.coef) <= tol))


# ---------------------------------------------------------------- SO(n, n+1)


@dataclass(frozen=True)
class SOData:
    """Collier data: mu, nu and q_2, q_4, ..., q_{2n-2} as polynomials in z."""

    n: int
    mu: object = 1.0
    nu: object = 0.0
    q: dict = field(default_factory=dict)
    h_M: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        check_positive(self.h_M, "h_M")
        object.__setattr__(self, "mu", _as_poly(self.mu))
        object.__setattr__(self, "nu", _as_poly(self.nu))
        q = {}
        for j, c in dict(self.q).items():
            j = int(j)
            if j % 2 or not 2 <= j <= 2 * self.n - 2:
                raise ValueError(f"q_{j} is not one of q_2, q_4, ..., q_{2 * self.n - 2}")
            q[j] = _as_poly(c)
        object.__setattr__(self, "q", q)

    def q_values(self, j, z):
        p = self.q.get(j)
        return np.zeros(np.shape(z), dtype=complex) if p is None else p(z)


def so_eta(d, z):
    """eta_{mu,nu}(q): V -> W (x) K as an (n + 1) x n matrix at z."""
    z = np.asarray(z, dtype=complex)
    n = d.n
    eta = np.zeros(z.shape + (n + 1, n), dtype=complex)
    eta[..., 0, n - 1] = d.nu(z)
    eta[..., n, n - 1] = d.mu(z)
    for k in range(1, n):
        eta[..., k, k - 1] = 1.0
        for j in range(k + 1, n + 1):
            eta[..., k, j - 1] = d.q_values(2 * (j - k), z)
    return eta


def so_eta_dagger(eta):
    """Adjoint W -> V with respect to the antidiagonal forms: Q_V^{-1} eta^T Q_W."""
    n = eta.shape[-1]
    QV, QW = antidiagonal(n), antidiagonal(n + 1)
    return QV @ np.swapaxes(eta, -1, -2) @ QW


def so_assoc_higgs(d, z):
    """The (2n + 1) x (2n + 1) field ((0, eta^dagger), (eta, 0)) on V + W."""
    eta = so_eta(d, z)
    n = d.n
    A = np.zeros(eta.shape[:-2] + (2 * n + 1, 2 * n + 1), dtype=complex)
    A[..., n:, :n] = eta
    A[..., :n, n:] = so_eta_dagger(eta)
    return A


def so_pairing(n):
    """Q_V + Q_W as a (2n + 1) x (2n + 1) matrix."""
    S = np.zeros((2 * n + 1, 2 * n + 1))
    S[:n, :n] = antidiagonal(n)
    S[n:, n:] = antidiagonal(n + 1)
    return S


def _distinct_nonzero(ev, rel=1e-6):
    """Eigenvalues pairwise separated and away from 0, relative to their scale."""
    ev = np.asarray(ev)
    scale = max(np.abs(ev).max(), 1e-300)
    if np.abs(ev).min() <= rel * scale:
        return False
    gaps = np.abs(ev[:, None] - ev[None, :]) + np.eye(len(ev)) * scale
    return bool(gaps.min() > rel * scale)


def _sample_disk(rng, n_samples, radius=0.95):
    r = radius * np.sqrt(rng.random(n_samples))
    return r * np.exp(2j * np.pi * rng.random(n_samples))


def so_regular_semisimple(d, n_samples=64, seed=0, rel=1e-6):
    """Look for a point where eta^dagger eta has n distinct nonzero eigenvalues.

    A witness proves generic regular semisimplicity; "not found" is only
    evidence.  Returns a dict with ``found``, ``witness`` and ``samples``.
    """
    rng = np.random.default_rng(seed)
    z = _sample_disk(rng, n_samples)
    eta = so_eta(d, z)
    prod = so_eta_dagger(eta) @ eta
    for zi, P in zip(z, prod):
        if _distinct_nonzero(np.linalg.eigvals(P), rel):
            return {"found": True, "verdict": f"found at z0 = {complex(zi):.6g}", "witness": complex(zi),
                    "samples": n_samples}
    return {"found": False, "verdict": f"not found in {n_samples} samples", "witness": None,
            "samples": n_samples}


def block_charpoly_defect(A, B, t):
    """Relative gap in det(tI - C) = t^{N - m} det(t^2 I - BA) for C = ((0, B), (A, 0)).

    A is N x m and B is m x N with N >= m.
    """
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    N, m = A.shape
    if B.shape != (m, N) or N < m:
        raise ValueError("need A of shape (N, m) and B of shape (m, N) with N >= m")
    C = np.zeros((N + m, N + m), dtype=complex)
    C[:m, m:] = B
    C[m:, :m] = A
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    out = []
    for ti in t:
        lhs = np.linalg.det(ti * np.eye(N + m) - C)
        rhs = ti ** (N - m) * np.linalg.det(ti ** 2 * np.eye(m) - B @ A)
        out.append(abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    return np.array(out)


def so_graded_chain(d):
    """Line chain M -> K^{n-1} -> ... -> K^{1-n} -> M^{-1} with links (mu, 1, ..., 1, mu)."""
    n = d.n
    mu = d.mu
    one = Polynomial([1.0 + 0j])
    links = (mu,) + (one,) * (2 * n - 2) + (mu,)
    return HolomorphicChain((1,) * (2 * n + 1), links)


def so_chain_order(n):
    """Index in V + W of each chain position: W_i sits at 2i and V_i at 2i + 1."""
    perm = np.empty(2 * n + 1, dtype=int)
    for p in range(2 * n + 1):
        perm[p] = n + p // 2 if p % 2 == 0 else p // 2
    return perm


def chain_to_block(H, perm):
    """Reorder a metric from chain order to block order."""
    H = np.asarray(H)
    inv = np.argsort(perm)
    return H[..., inv[:, None], inv[None, :]]


def block_to_chain(H, perm):
    H = np.asarray(H)
    return H[..., perm[:, None], perm[None, :]]


def so_reference_metric(d, z, kind="hx"):
    """Diagonal chain-order boundary metric.

    ``hx`` is the rank 2n + 1 reference metric; ``h1`` is
    diag(h_M, h_X (rank 2n - 1), h_M^{-1}).  Both are compatible with Q_V, Q_W.
    """
    n = d.n
    z = np.asarray(z, dtype=complex)
    if kind == "hx":
        return hx_metric(2 * n + 1, z)
    if kind != "h1":
        raise ValueError("kind must be 'hx' or 'h1'")
    H = np.zeros(z.shape + (2 * n + 1, 2 * n + 1), dtype=complex)
    H[..., 0, 0] = d.h_M
    H[..., -1, -1] = 1.0 / d.h_M
    H[..., 1:-1, 1:-1] = hx_metric(2 * n - 1, z)
    return H


def so_existence_condition(d, weight=None, levels=10):
    """Class verdict for h_M^{-1} g_X^{-n}(mu, mu) = |mu|^2 (2 / lambda)^n / h_M.

    For polynomial mu the function is bounded by a multiple of
    (1 - |z|^2)^{2n}, so it lies in A^b by comparison with the power class.
    A custom ``weight`` (DiskFunction or callable) is classified numerically.
    """
    if weight is not None:
        res = class_membership(weight, levels=levels)
        res["usable"] = in_class(res["verdict"], "A")
        return res
    if _poly_is_zero(d.mu):
        return {"verdict": "mu vanishes identically", "kind": "exact", "usable": False}
    res = class_membership(DiskFunction.power(2 * d.n))
    res["reason"] = "bounded by a multiple of (1 - |z|^2)^{2n}"
    res["usable"] = res["verdict"] == IN_AB
    res["weight"] = lambda z: np.abs(d.mu(z)) ** 2 * (2.0 / conformal_factor(z)) ** d.n / d.h_M
    return res


# ---------------------------------------------------------------- Sp(4, R)


@dataclass(frozen=True)
class Sp4Data:
    """Gothen data: beta = ((nu, q2), (q2, mu)), gamma = ((0, 1), (1, 0))."""

    mu: object = 1.0
    nu: object = 0.0
    q2: object = 0.0
    h_L: float = 1.0

    def __post_init__(self):
        check_positive(self.h_L, "h_L")
        for k in ("mu", "nu", "q2"):
            object.__setattr__(self, k, _as_poly(getattr(self, k)))

    def beta(self, z):
        z = np.asarray(z, dtype=complex)
        b = np.zeros(z.shape + (2, 2), dtype=complex)
        b[..., 0, 0] = self.nu(z)
        b[..., 0, 1] = b[..., 1, 0] = self.q2(z)
        b[..., 1, 1] = self.mu(z)
        return b

    @staticmethod
    def gamma():
        return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def sp4_assoc_higgs(d, z):
    """4 x 4 field ((0, beta), (gamma, 0)) on N + N^{-1}K + N^{-1} + N K^{-1}."""
    b = d.beta(z)
    A = np.zeros(b.shape[:-2] + (4, 4), dtype=complex)
    A[..., :2, 2:] = b
    A[..., 2:, :2] = Sp4Data.gamma()
    return A


def sp4_invariants(d):
    """(disc, det) of beta gamma as polynomials: 4 mu nu and q2^2 - mu nu."""
    mn = d.mu * d.nu
    return 4 * mn, d.q2 * d.q2 - mn


def sp4_regular_semisimple(d, tol=0.0):
    """Generic regular semisimplicity: 4 mu nu and q2^2 - mu nu both not identically 0."""
    disc, det = sp4_invariants(d)
    ok = not _poly_is_zero(disc, tol) and not _poly_is_zero(det, tol)
    return {"regular_semisimple": bool(ok), "discriminant": disc.coef.tolist(), "det": det.coef.tolist()}


def sp4_rss_bruteforce(d, n_samples=100, seed=0, rel=1e-5):
    """Eigenvalues of the assembled 4 x 4 field distinct at some sample point."""
    rng = np.random.default_rng(seed)
    z = _sample_disk(rng, n_samples)
    A = sp4_assoc_higgs(d, z)
    for P in A:
        ev = np.linalg.eigvals(P)
        scale = max(np.abs(ev).max(), 1e-300)
        gaps = np.abs(ev[:, None] - ev[None, :]) + np.eye(4) * scale
        if scale > 1e-12 and gaps.min() > rel * scale:
            return True
    return False


def random_sp4_data(rng, degenerate=None, max_degree=2):
    """Random Gothen data; ``degenerate`` in {None, "mu", "nu", "both", "det"} forces a collision."""

    def poly():
        deg = int(rng.integers(0, max_degree + 1))
        return rng.integers(-3, 4, deg + 1) + 1j * rng.integers(-3, 4, deg + 1)

    mu, nu, q2 = poly(), poly(), poly()
    if degenerate in ("mu", "both"):
        mu = [0.0]
    if degenerate in ("nu", "both"):
        nu = [0.0]
    if degenerate == "det":
        # mu nu = q2^2 identically: mu = a p^2, nu = p^2 / a, q2 = p
        p = Polynomial(poly())
        a = complex(rng.integers(1, 4))
        mu, nu, q2 = (a * p * p).coef, (p * p / a).coef, p.coef
    return Sp4Data(mu=mu, nu=nu, q2=q2)


def sp4_graded_chain(d):
    """N -> N K^{-1} -> N^{-1} K -> N^{-1} with links (1, mu, 1)."""
    one = Polynomial([1.0 + 0j])
    return HolomorphicChain((1, 1, 1, 1), (one, d.mu, one))


# chain position p sits at index SP4_CHAIN_ORDER[p] of N + N^{-1}K + N^{-1} + N K^{-1}
SP4_CHAIN_ORDER = np.array([0, 3, 1, 2])


def _sp4_diagonal(h, h_L):
    """diag(h_L h, h / h_L, 1 / (h_L h), h_L / h) in block order."""
    H = np.zeros(np.shape(h) + (4, 4), dtype=complex)
    for k, v in enumerate((h_L * h, h / h_L, 1.0 / (h_L * h), h_L / h)):
        H[..., k, k] = v
    return H


def sp4_reference_metric(d, z):
    """h_L times the rank-2 reference metric on N = L K^{1/2}, N^{-1}K, N^{-1}, N K^{-1} (block order).

    Up to the normalization of h_X this is
    diag(sqrt2 h_L g^{-1/2}, ..., g^{1/2} / (sqrt2 h_L)) of the graded chain.
    """
    z = np.asarray(z, dtype=complex)
    return _sp4_diagonal(hx_metric(2, z)[..., 0, 0].real, d.h_L)


def structure_compat_defect(H, form, n=None):
    """Pointwise defect of compatibility with the SO(n, n+1) or Sp(4, R) structure.

    so: max |H_VW| + defect(H_V, Q_V) + defect(H_W, Q_W).
    sp4: max |H_{V V^*}| + max |H_{V^*} - (H_V^T)^{-1}|.
    H is in block order.
    """
    H = _values(H)
    N = H.shape[-1]
    if form == "so":
        if n is None:
            n = (N - 1) // 2
        if N != 2 * n + 1:
            raise ValueError(f"rank {N} does not match SO({n}, {n + 1})")
        HV, HW = H[..., :n, :n], H[..., n:, n:]
        off = np.abs(H[..., :n, n:]).max(axis=(-2, -1))
        return off + compatibility_defect(HV, antidiagonal(n)) + compatibility_defect(HW, antidiagonal(n + 1))
    if form == "sp4":
        if N != 4:
            raise ValueError("Sp(4, R) metrics have rank 4")
        HV, HD = H[..., :2, :2], H[..., 2:, 2:]
        off = np.abs(H[..., :2, 2:]).max(axis=(-2, -1))
        dual = np.linalg.inv(np.swapaxes(HV, -1, -2))
        return off + np.abs(HD - dual).max(axis=(-2, -1))
    raise ValueError("form must be 'so' or 'sp4'")


# ---------------------------------------------------------------- drivers


def collier_graded_solve(d, grid, cfg=None, boundary="hx"):
    """Toda solve of the graded chain, returned in block order.

    Returns (MetricField in block order, SolveReport, defect field).
    """
    cfg = cfg or SolverConfig()
    chain = so_graded_chain(d)
    A = chain.higgs()
    Hb = so_reference_metric(d, grid.z_bdry, boundary)
    fld, rep = solve_dirichlet(A, Hb, grid, cfg)
    perm = so_chain_order(d.n)
    out = MetricField(grid, chain_to_block(fld.H, perm), chain_to_block(fld.H_bdry, perm), fld.det_normalized)
    return out, rep, structure_compat_defect(out, "so", d.n)


def collier_full_solve(d, graded, cfg=None):
    """Dirichlet solve of the full field with the graded metric as boundary data and start.

    The iteration is restricted to V + W block-diagonal metrics compatible
    with Q_V + Q_W.  Returns (field, report, defect, margins) where margins
    are the weak domination margins against the graded metric with respect to
    the filtration F_j(V) + F_j(W) (chain order).
    """
    cfg = cfg or SolverConfig(path="matrix")
    n = d.n
    A = lambda z: so_assoc_higgs(d, z)
    fld, rep = solve_dirichlet(A, graded.H_bdry, graded.grid, cfg, S=so_pairing(n), blocks=(n, n + 1),
                               H0=graded.H)
    perm = so_chain_order(n)
    margins = weak_domination_margins(block_to_chain(fld.H, perm), block_to_chain(graded.H, perm))
    return fld, rep, structure_compat_defect(fld, "so", n), margins


def sp4_graded_solve(d, grid, cfg=None):
    cfg = cfg or SolverConfig()
    A = sp4_graded_chain(d).higgs()
    Hb = sp4_reference_metric(d, grid.z_bdry)
    Hb = block_to_chain(Hb, SP4_CHAIN_ORDER)
    fld, rep = solve_dirichlet(A, Hb, grid, cfg)
    out = MetricField(grid, chain_to_block(fld.H, SP4_CHAIN_ORDER), chain_to_block(fld.H_bdry, SP4_CHAIN_ORDER),
                      fld.det_normalized)
    return out, rep, structure_compat_defect(out, "sp4")


def sp4_full_solve(d, graded, cfg=None):
    """Full Gothen field with graded boundary data; margins in chain order."""
    cfg = cfg or SolverConfig(path="matrix")
    A = lambda z: sp4_assoc_higgs(d, z)
    fld, rep = solve_dirichlet(A, graded.H_bdry, graded.grid, cfg, blocks=(2, 2), H0=graded.H)
    margins = weak_domination_margins(block_to_chain(fld.H, SP4_CHAIN_ORDER),
                                      block_to_chain(graded.H, SP4_CHAIN_ORDER))
    return fld, rep, structure_compat_defect(fld, "sp4"), margins


def gothen_zero_metric(d, grid, cfg=None):
    """Metric for (mu, nu) = (0, 0) built from a rank-2 harmonic metric diag(h0, 1/h0).

    h0 solves the companion problem ((0, q2), (1, 0)); for q2 = 0 it is the
    closed form 1 - |z|^2 of h_X.  The result is
    diag(h_L h0, h0 / h_L, 1 / (h_L h0), h_L / h0) in block order.
    Returns (MetricField, info).
    """
    if not (_poly_is_zero(d.mu) and _poly_is_zero(d.nu)):
        raise ValueError("the splitting needs mu = nu = 0")
    t0 = time.perf_counter()
    if _poly_is_zero(d.q2):
        h0 = hx_metric(2, grid.z)[..., 0, 0].real
        h0b = hx_metric(2, grid.z_bdry)[..., 0, 0].real
        info = {"h0": "closed form"}
    else:
        q2 = d.q2

        def A2(z):
            z = np.asarray(z, dtype=complex)
            out = np.zeros(z.shape + (2, 2), dtype=complex)
            out[..., 0, 1] = q2(z)
            out[..., 1, 0] = 1.0
            return out

        fld2, rep = solve_dirichlet(A2, lambda z: hx_metric(2, z), grid, cfg or SolverConfig())
        h0, h0b = fld2.H[..., 0, 0].real, fld2.H_bdry[..., 0, 0].real
        info = {"h0": "solved", "report": rep.to_dict()}

    H = MetricField(grid, _sp4_diagonal(h0, d.h_L), _sp4_diagonal(h0b, d.h_L), det_normalized=True)
    A = sp4_assoc_higgs(d, grid.z)
    info["residual"] = residual_norm(hitchin_residual(H, A))
    info["seconds"] = time.perf_counter() - t0
    return H, info
