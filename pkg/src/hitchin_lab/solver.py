"""Discrete Hitchin equation on polar sub-disks.

With M = H^T the equation for a harmonic metric reads

    d_zbar(M^{-1} d_z M) + [M^{-1} A^* M, A] = 0.

Writing X = M^{-1} dM, flatness of X gives
d_zbar(M^{-1} d_z M) = (div X + (i/r)[X_r, X_theta]) / 4, which is what the
lattice operator discretizes.  Differences are taken on lattice logarithms
log(M_p^{-1} M_q), conjugated by M_p^{1/2} so that every quantity at node p is
Hermitian in an h-orthonormal frame.
"""

from dataclasses import dataclass, field, asdict
import json
import time
import warnings

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bundle import (
    HiggsMatrixField,
    MetricField,
    PDViolation,
    PairingMatrix,
    _values,
    endomorphism_s,
    leading_minors,
    s_distance,
    s_eigenvalues,
    weak_domination_margins,
)
from .grid import PolarGrid
from .hyperbolic import conformal_factor, higgs_norm_sq, hx_metric
from ._validation import check_hermitian_pd, check_positive


@dataclass
class SolverConfig:
    tol: float = 1e-8
    damping: float = 1.0
    max_iter: int = 40
    r0: float = 0.5
    n_stages: int = 6
    rho_obs: float = 0.5
    path: str = "auto"
    fd_eps: float = 1e-7

    def __post_init__(self):
        check_positive(self.tol, "tol")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if int(self.max_iter) < 1:
            raise ValueError("max_iter must be a positive integer")
        if not 0 < self.r0 < 1:
            raise ValueError("r0 must lie in (0, 1)")
        if int(self.n_stages) < 1:
            raise ValueError("n_stages must be a positive integer")
        if self.path not in ("auto", "toda", "matrix"):
            raise ValueError("path must be one of auto, toda, matrix")
        check_positive(self.rho_obs, "rho_obs")

    @property
    def schedule(self):
        m = np.arange(1, int(self.n_stages) + 1)
        return 1.0 - 2.0 ** (-m) * (1.0 - self.r0)


@dataclass
class SolveReport:
    residual: float = np.nan
    iterations: int = 0
    converged: bool = False
    path: str = ""
    margins_max: list = field(default_factory=list)
    energy_min: float = np.nan
    energy_max: float = np.nan
    history: list = field(default_factory=list)
    message: str = ""
    seconds: float = 0.0

    def to_dict(self):
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, (np.floating, np.integer)):
                out[k] = v.item()
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), default=float)


# ---------------------------------------------------------------- helpers


def _herm(X):
    return 0.5 * (X + np.conj(np.swapaxes(X, -1, -2)))


def _eig_fun(X, f):
    """Apply f to a batch of Hermitian matrices through eigh."""
    e, V = np.linalg.eigh(_herm(X))
    return (V * f(e)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))


def _sqrt_pair(M):
    e, V = np.linalg.eigh(_herm(M))
    if np.any(e <= 0):
        loc = tuple(np.argwhere(e[..., 0] <= 0)[0])
        raise PDViolation(f"metric not positive definite at node {loc}", loc)
    Vh = np.conj(np.swapaxes(V, -1, -2))
    P = (V * np.sqrt(e)[..., None, :]) @ Vh
    Pi = (V * (1.0 / np.sqrt(e))[..., None, :]) @ Vh
    return P, Pi


def hermitian_basis(n, S=None, blocks=None):
    """Orthonormal basis (real Frobenius product) of the admissible log-directions.

    Trace-free Hermitian matrices, optionally restricted to X = -S X^T S
    (compatibility with the pairing S) and to the block diagonal given by a
    list of block sizes.
    """
    gens = []
    for i in range(n):
        for j in range(i, n):
            if i == j:
                E = np.zeros((n, n), dtype=complex)
                E[i, i] = 1
                gens.append(E)
            else:
                E = np.zeros((n, n), dtype=complex)
                E[i, j] = E[j, i] = 1 / np.sqrt(2)
                gens.append(E)
                F = np.zeros((n, n), dtype=complex)
                F[i, j], F[j, i] = 1j / np.sqrt(2), -1j / np.sqrt(2)
                gens.append(F)

    def proj(X):
        X = X - np.trace(X) / n * np.eye(n)
        if S is not None:
            X = 0.5 * (X - S @ X.T @ S)
        if blocks is not None:
            mask = np.zeros((n, n), dtype=bool)
            start = 0
            for b in blocks:
                mask[start:start + b, start:start + b] = True
                start += b
            X = np.where(mask, X, 0)
        return X

    imgs = np.array([proj(G) for G in gens])
    flat = np.concatenate([imgs.real.reshape(len(gens), -1), imgs.imag.reshape(len(gens), -1)], axis=1)
    U, sv, Vt = np.linalg.svd(flat, full_matrices=False)
    rank = int(np.sum(sv > 1e-10))
    basis = Vt[:rank]
    half = n * n
    B = (basis[:, :half] + 1j * basis[:, half:]).reshape(rank, n, n)
    return B


def _coeffs(X, B):
    """Coefficients of Hermitian X in the orthonormal Hermitian basis B."""
    return np.einsum("...ij,bji->...b", X, B).real


def _neighbour_table(grid):
    """Indices into the extended node list (interior then boundary ring)."""
    nr, nt = grid.shape
    st = grid.stencil.copy()
    j = np.arange(grid.size) % nt
    east = st[:, 0]
    st[:, 0] = np.where(east < 0, grid.size + j, east)
    return st


# ---------------------------------------------------------------- residual


def _residual_core(M, Mb, A, grid):
    """Hermitized residual at every interior node (flat arrays)."""
    nr, nt = grid.shape
    n = M.shape[-1]
    Mf = M.reshape(-1, n, n)
    P, Pi = _sqrt_pair(Mf)
    Mext = np.concatenate([Mf, Mb.reshape(-1, n, n)], axis=0)
    nb = _neighbour_table(grid)
    logs = []
    for d in range(4):
        Y = Pi @ Mext[nb[:, d]] @ Pi
        logs.append(_eig_fun(Y, np.log))
    w_out, w_in, w_ang = grid.weights
    ring = np.repeat(np.arange(nr), nt)
    lap = (
        w_out[ring, None, None] * logs[0]
        + w_in[ring, None, None] * logs[1]
        + w_ang[ring, None, None] * (logs[2] + logs[3])
    )
    re = grid.r_ext
    dr = (re[2:] - re[:-2])[ring]
    Xr = (logs[0] - logs[1]) / dr[:, None, None]
    Xt = (logs[2] - logs[3]) / (2 * grid.dtheta)
    r = grid.r[ring]
    comm = (1j / r)[:, None, None] * (Xr @ Xt - Xt @ Xr)
    Af = A.reshape(-1, n, n)
    Bm = P @ Af @ Pi
    Bs = np.conj(np.swapaxes(Bm, -1, -2))
    R = 0.25 * (lap + comm) + (Bs @ Bm - Bm @ Bs)
    return _herm(R), P


def _lambda_scale(grid, contraction):
    if contraction == "g_X":
        return (2.0 / conformal_factor(grid.z)).ravel()
    if contraction == "euclidean":
        return np.ones(grid.size)
    raise ValueError("contraction must be 'g_X' or 'euclidean'")


def hitchin_residual(H, A, contraction="g_X"):
    """Residual of the Hitchin equation at interior nodes.

    Returned per node in the h-orthonormal frame M^{1/2}, shape
    (n_r, n_theta, n, n).  With ``contraction="g_X"`` the (1,1)-form is
    contracted against the Kaehler form of g_X (a factor 2/lambda, so
    |dz|^2 = 2/lambda); ``"euclidean"`` returns the dz dzbar coefficient.  It
    vanishes for (h_X, theta(0)) up to O(grid^2) and is trace-free when det H
    is constant.
    """
    if not isinstance(H, MetricField):
        raise TypeError("hitchin_residual expects a MetricField")
    g = H.grid
    check_hermitian_pd(H.H, grid=g)
    check_hermitian_pd(H.H_bdry, name="boundary metric")
    A_vals = _higgs_values(A, g.z, H.n)
    M = np.swapaxes(H.H, -1, -2)
    Mb = np.swapaxes(H.H_bdry, -1, -2)
    R, _ = _residual_core(M, Mb, A_vals, g)
    R = R * _lambda_scale(g, contraction)[:, None, None]
    return R.reshape(g.shape + (H.n, H.n))


def residual_norm(R):
    return float(np.max(np.linalg.norm(R, ord=2, axis=(-2, -1)))) if R.size else 0.0


def _higgs_values(A, z, n=None):
    if isinstance(A, HiggsMatrixField):
        return A(z)
    if callable(A):
        return np.asarray(A(z), dtype=complex)
    A = np.asarray(A, dtype=complex)
    if A.ndim == 2:
        return np.broadcast_to(A, np.shape(z) + A.shape).copy()
    return A


# ---------------------------------------------------------------- matrix Newton


def _matrix_newton(A_vals, M0, Mb, grid, cfg, basis):
    n = M0.shape[-1]
    N = grid.size
    nbas = len(basis)
    M = M0.reshape(N, n, n).copy()
    color = grid.coloring
    ncol = int(color.max()) + 1
    slots = np.column_stack([np.arange(N), grid.stencil])
    hist = []
    scale = _lambda_scale(grid, "g_X")[:, None]

    def F_of(Mf):
        R, P = _residual_core(Mf, Mb, A_vals, grid)
        return _coeffs(R, basis) * scale, P

    def update(Mf, P, coef):
        E = _eig_fun(np.einsum("pb,bij->pij", coef, basis), np.exp)
        return _herm(P @ E @ P)

    F, P = F_of(M)
    res = np.abs(F).max()
    hist.append(float(res))
    it = 0
    converged = res <= cfg.tol
    while not converged and it < cfg.max_iter:
        it += 1
        eps = cfg.fd_eps
        rows, cols, vals = [], [], []
        for c in range(ncol):
            sel = color == c
            for b in range(nbas):
                coef = np.zeros((N, nbas))
                coef[sel, b] = eps
                Mp = M.copy()
                Mp[sel] = update(M[sel], P[sel], coef[sel])
                Fp, _ = F_of(Mp)
                dF = (Fp - F) / eps
                for s in range(5):
                    src = slots[:, s]
                    ok = src >= 0
                    ok[ok] = color[src[ok]] == c
                    q = np.nonzero(ok)[0]
                    p = src[q]
                    rows.append((q[:, None] * nbas + np.arange(nbas)).ravel())
                    cols.append(np.repeat(p * nbas + b, nbas))
                    vals.append(dF[q].ravel())
        J = sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(N * nbas, N * nbas),
        )
        try:
            step = spla.splu(J).solve(-F.ravel())
        except RuntimeError as exc:
            return M, hist, it, False, f"singular Jacobian: {exc}"
        step = step.reshape(N, nbas) * cfg.damping
        merit = np.linalg.norm(F)
        t = 1.0
        while True:
            Mt = update(M, P, t * step)
            Ft, Pt = F_of(Mt)
            if np.linalg.norm(Ft) < merit or t < 1.0 / 64:
                break
            t *= 0.5
        M, F, P = Mt, Ft, Pt
        res = np.abs(F).max()
        hist.append(float(res))
        converged = res <= cfg.tol
    return M, hist, it, converged, "" if converged else "maximum iterations reached"


# ---------------------------------------------------------------- Toda path


def _toda_F(w, wb, gam2, cyc2, grid):
    """Residuals of 1/4 Lap w_k = |g_k|^2 E_k - |q|^2 e^{-w_1 - w_{n-1}}."""
    m = w.shape[0]
    L = grid.laplacian_matrix
    z = np.zeros((1,) + w.shape[1:])
    ww = np.concatenate([z, w, z])
    E = np.exp(2 * ww[1:-1] - ww[:-2] - ww[2:])
    T = cyc2 * np.exp(-w[0] - w[-1])
    F = np.empty_like(w)
    bv = grid.weights[0][-1]
    nt = grid.n_theta
    for k in range(m):
        lap = L @ w[k]
        lap[-nt:] += bv * wb[k]
        F[k] = 0.25 * lap - gam2[k] * E[k] + T
    return F, E, T


def _toda_jac(E, T, gam2, grid):
    m = E.shape[0]
    L = 0.25 * grid.laplacian_matrix
    blocks = [[None] * m for _ in range(m)]
    for k in range(m):
        blocks[k][k] = L - sp.diags(2 * gam2[k] * E[k])
        if k > 0:
            blocks[k][k - 1] = sp.diags(gam2[k] * E[k])
        if k < m - 1:
            blocks[k][k + 1] = sp.diags(gam2[k] * E[k])
    J = sp.bmat(blocks, format="lil") if m > 1 else blocks[0][0].tolil()
    if np.any(T != 0):
        N = grid.size
        D = sp.diags(-T)
        extra = [[None] * m for _ in range(m)]
        for k in range(m):
            for j in {0, m - 1}:
                extra[k][j] = D if extra[k][j] is None else extra[k][j] + D
        for k in range(m):
            for j in range(m):
                if extra[k][j] is None:
                    extra[k][j] = sp.csr_matrix((N, N))
        J = J + sp.bmat(extra, format="lil")
    return J.tocsc()


def solve_toda_chain(gammas, w_bdry, grid, cfg=None, cyclic=None, w0=None):
    """Damped Newton for the Toda system on the grid.

    ``gammas`` are the n-1 chain links (callables, polynomials or constants),
    ``w_bdry`` has shape (n-1, n_theta) and ``cyclic`` is the optional entry
    in position (1, n).  Returns (w, report) with w of shape (n-1, n_r, n_theta).
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    m = len(gammas)
    if m < 1:
        raise ValueError("need at least one chain link")
    z = grid.z.ravel()
    gam2 = np.array([np.abs(_scalar_values(g, z)) ** 2 for g in gammas])
    cyc2 = np.zeros(z.shape) if cyclic is None else np.abs(_scalar_values(cyclic, z)) ** 2
    wb = np.asarray(w_bdry, dtype=float).reshape(m, grid.n_theta)
    if not np.all(np.isfinite(wb)):
        raise ValueError("boundary data must be finite")
    if w0 is None:
        w = np.zeros((m, grid.size))
        L = grid.laplacian_matrix.tocsc()
        lu = spla.splu(L)
        for k in range(m):
            rhs = -grid.boundary_vector(wb[k]).ravel()
            w[k] = lu.solve(rhs)
    else:
        w = np.asarray(w0, dtype=float).reshape(m, grid.size).copy()
    F, E, T = _toda_F(w, wb, gam2, cyc2, grid)
    hist = [float(np.abs(F).max())]
    it = 0
    converged = hist[-1] <= cfg.tol
    msg = ""
    while not converged and it < cfg.max_iter:
        it += 1
        J = _toda_jac(E, T, gam2, grid)
        step = spla.spsolve(J, -F.ravel()).reshape(w.shape) * cfg.damping
        merit = np.linalg.norm(F)
        t = 1.0
        while True:
            wt = w + t * step
            with np.errstate(over="ignore"):
                Ft, Et, Tt = _toda_F(wt, wb, gam2, cyc2, grid)
            if (np.all(np.isfinite(Ft)) and np.linalg.norm(Ft) < merit) or t < 1.0 / 256:
                break
            t *= 0.5
        if not np.all(np.isfinite(Ft)):
            msg = "Newton step overflowed"
            break
        w, F, E, T = wt, Ft, Et, Tt
        hist.append(float(np.abs(F).max()))
        converged = hist[-1] <= cfg.tol
    if not converged and not msg:
        msg = "maximum iterations reached"
    rep = SolveReport(
        residual=float(np.abs(_toda_F(w, wb, gam2, cyc2, grid)[0]).max()),
        iterations=it,
        converged=bool(converged),
        path="toda",
        history=hist,
        message=msg,
        seconds=time.perf_counter() - t0,
    )
    return w.reshape((m,) + grid.shape), rep


def _scalar_values(g, z):
    z = np.asarray(z, dtype=complex)
    if callable(g):
        return np.broadcast_to(np.asarray(g(z), dtype=complex), z.shape)
    return np.full(z.shape, complex(g))


def toda_to_metric(w):
    """Diagonal metric diag(e^{w_{k-1} - w_k}) with w_0 = w_n = 0."""
    w = np.asarray(w, dtype=float)
    z = np.zeros((1,) + w.shape[1:])
    ww = np.concatenate([z, w, z])
    d = np.exp(ww[:-1] - ww[1:])
    n = d.shape[0]
    H = np.zeros(w.shape[1:] + (n, n), dtype=complex)
    idx = np.arange(n)
    H[..., idx, idx] = np.moveaxis(d, 0, -1)
    return H


def metric_to_toda(H):
    """w_k = -log Delta_k(H), k = 1..n-1."""
    return -np.moveaxis(np.log(leading_minors(H))[..., :-1], -1, 0)


def _diagonal_admissible(A_vals, H_bdry, tol=1e-14):
    n = A_vals.shape[-1]
    if n < 2:
        return False
    mask = np.zeros((n, n), dtype=bool)
    mask[np.arange(1, n), np.arange(n - 1)] = True
    mask[0, n - 1] = True
    off = np.abs(A_vals[..., ~mask]).max() if np.any(~mask) else 0.0
    Hoff = np.abs(H_bdry[..., ~np.eye(n, dtype=bool)]).max()
    return off <= tol and Hoff <= tol


# ---------------------------------------------------------------- driver


def solve_dirichlet(A, H_bdry, grid, cfg=None, S=None, blocks=None, H0=None):
    """Harmonic metric on the grid disk with prescribed boundary values.

    ``H_bdry`` is either an array of shape (n_theta, n, n) or a callable of z.
    ``S`` (pairing) and ``blocks`` restrict the iteration to compatible or
    block-diagonal metrics.  Returns (MetricField, SolveReport); on failure the
    best iterate is returned with ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    t0 = time.perf_counter()
    Hb = H_bdry(grid.z_bdry) if callable(H_bdry) else np.asarray(H_bdry, dtype=complex)
    Hb = check_hermitian_pd(Hb, name="boundary metric")
    n = Hb.shape[-1]
    if Hb.shape != (grid.n_theta, n, n):
        raise ValueError("boundary metric does not match the grid")
    if isinstance(S, PairingMatrix):
        S = S.S
    if S is not None:
        from .bundle import compatibility_defect

        d = compatibility_defect(Hb, S).max()
        if d > 1e-8:
            raise ValueError(f"boundary metric is not compatible with the pairing (defect {d:.2e})")
    A_vals = _higgs_values(A, grid.z, n)
    detb = np.linalg.det(Hb).real
    det_one = bool(np.allclose(detb, 1.0, atol=1e-10))
    path = cfg.path
    if path == "auto":
        path = "toda" if _diagonal_admissible(A_vals, Hb) else "matrix"
    if path == "toda":
        if not _diagonal_admissible(A_vals, Hb):
            raise ValueError("Toda path needs a chain (plus corner entry) and diagonal boundary data")
        if not det_one:
            raise ValueError("Toda path needs boundary data with det 1")
        gam = [A_vals[..., k + 1, k].ravel() for k in range(n - 1)]
        gam = [_lookup(g, grid) for g in gam]
        cyc = _lookup(A_vals[..., 0, n - 1].ravel(), grid) if n > 1 else None
        wb = metric_to_toda(Hb)
        w0 = metric_to_toda(H0) if H0 is not None else None
        w, rep = solve_toda_chain(gam, wb, grid, cfg, cyclic=cyc, w0=w0)
        H = toda_to_metric(w)
    else:
        if H0 is None:
            H0 = hx_metric(n, grid.z) if det_one else _harmonic_guess(Hb, grid)
        M0 = np.swapaxes(np.asarray(_values(H0), dtype=complex), -1, -2)
        Mb = np.swapaxes(Hb, -1, -2)
        basis = hermitian_basis(n, S=S, blocks=blocks)
        if not det_one:
            # allow the trace direction when the determinant is not normalized
            extra = np.eye(n, dtype=complex)[None] / np.sqrt(n)
            basis = np.concatenate([basis, extra], axis=0)
        M, hist, it, conv, msg = _matrix_newton(A_vals, M0, Mb, grid, cfg, basis)
        H = np.swapaxes(M, -1, -2).reshape(grid.shape + (n, n))
        rep = SolveReport(iterations=it, converged=bool(conv), path="matrix", history=hist, message=msg)
    field_ = MetricField(grid, H, Hb, det_normalized=det_one)
    R = hitchin_residual(field_, A_vals)
    rep.residual = residual_norm(R)
    rep.seconds = time.perf_counter() - t0
    if det_one and n > 1:
        Hx = hx_metric(n, grid.z)
        v = weak_domination_margins(H, Hx)
        rep.margins_max = [float(x) for x in v.reshape(-1, n - 1).max(axis=0)]
    e = energy_density(field_, A_vals)[0]
    rep.energy_min, rep.energy_max = float(e.min()), float(e.max())
    if not rep.converged:
        warnings.warn(f"Dirichlet solve did not converge: {rep.message}", RuntimeWarning)
    return field_, rep


def _lookup(values, grid):
    """Turn node values into a callable on grid.z (the solver only evaluates there)."""
    values = np.asarray(values)

    def f(z):
        if np.shape(z) == (grid.size,) or np.shape(z) == grid.shape:
            return values.reshape(np.shape(z))
        raise ValueError("sampled coefficient queried off the grid")

    return f


def _harmonic_guess(Hb, grid):
    n = Hb.shape[-1]
    logs = _eig_fun(Hb, np.log)
    L = grid.laplacian_matrix.tocsc()
    lu = spla.splu(L)
    out = np.empty((grid.size, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            rhs = -grid.boundary_vector(logs[:, i, j]).ravel()
            out[:, i, j] = lu.solve(rhs.real) + 1j * lu.solve(rhs.imag)
    return _eig_fun(out, np.exp).reshape(grid.shape + (n, n))


# ---------------------------------------------------------------- diagnostics


def energy_density(H, A):
    """e = 2n |theta|^2_{h, g_X} at the nodes, and its infimum."""
    if isinstance(H, MetricField):
        z = H.grid.z
        vals = H.H
    else:
        raise TypeError("energy_density expects a MetricField")
    n = vals.shape[-1]
    e = 2 * n * higgs_norm_sq(_higgs_values(A, z, n), vals, z)
    return e, float(e.min())


def observation_grid(rho_obs, n_r=12, n_theta=32):
    return PolarGrid(rho_obs, n_r, n_theta, beta=0.0)


def _restrict(field_, obs):
    f = field_.grid.interpolator(field_.H, field_.H_bdry)
    H = _herm(f(obs.z))
    Hb = _herm(f(obs.z_bdry))
    return MetricField(obs, H, Hb, field_.det_normalized)


def exhaust(A, cfg=None, rho_obs=None, grid_shape=(48, 96), boundary=None, S=None, blocks=None, n=None):
    """Solve on the radius schedule and monitor convergence on |z| <= rho_obs.

    ``boundary`` is a callable z -> H used on every circle (default h_X).
    Returns (MetricField on the observation grid, log dict).
    """
    cfg = cfg or SolverConfig()
    rho = cfg.rho_obs if rho_obs is None else rho_obs
    radii = cfg.schedule
    if not rho < radii[0]:
        raise ValueError(f"observation radius {rho} must lie below the first schedule radius {radii[0]}")
    if n is None:
        if isinstance(A, HiggsMatrixField):
            n = A.n
        else:
            n = _higgs_values(A, np.zeros(1)).shape[-1]
    bfun = boundary if boundary is not None else (lambda z: hx_metric(n, z))
    obs = observation_grid(rho)
    log = {"radii": [], "d": [], "residual": [], "iterations": [], "converged": [], "seconds": []}
    prev = None
    restricted = None
    for R in radii:
        g = PolarGrid(float(R), *grid_shape)
        fld, rep = solve_dirichlet(A, bfun, g, cfg, S=S, blocks=blocks)
        log["radii"].append(float(R))
        log["residual"].append(rep.residual)
        log["iterations"].append(rep.iterations)
        log["converged"].append(rep.converged)
        log["seconds"].append(rep.seconds)
        if not rep.converged:
            log["message"] = f"stage at radius {R:.6g} failed: {rep.message}"
            log["status"] = "failed"
            return restricted, log
        restricted = _restrict(fld, obs)
        log.setdefault("fields", []).append(restricted)
        if prev is not None:
            d = max(s_distance(prev.H, restricted.H).max(), s_distance(prev.H_bdry, restricted.H_bdry).max())
            log["d"].append(float(d))
        prev = restricted
        log["last_field"] = fld
    d = log["d"]
    log["status"] = "ok"
    log["monotone"] = bool(all(b < a for a, b in zip(d, d[1:])))
    return restricted, log


def _aitken_limit(seq):
    """Aitken extrapolation of the last three terms; the last term when undefined."""
    if len(seq) < 3:
        return float(seq[-1])
    s0, s1, s2 = seq[-3:]
    den = s2 - 2 * s1 + s0
    if abs(den) <= 1e-15 * max(abs(s2), 1e-300):
        return float(s2)
    return float(s2 - (s2 - s1) ** 2 / den)


def uniqueness_probe(A, boundary_a, boundary_b, cfg=None, grid_shape=(48, 96), S=None, blocks=None, n=None):
    """Exhaust with two boundary families and compare on |z| <= rho_obs.

    Returns the distance of the final fields.  The log also holds the
    distance at every stage (both families share each stage grid) and its
    Aitken extrapolation ``limit_estimate``.
    """
    fa, la = exhaust(A, cfg, grid_shape=grid_shape, boundary=boundary_a, S=S, blocks=blocks, n=n)
    fb, lb = exhaust(A, cfg, grid_shape=grid_shape, boundary=boundary_b, S=S, blocks=blocks, n=n)
    if la["status"] != "ok" or lb["status"] != "ok":
        raise RuntimeError("an exhaustion stage failed: " + la.get("message", "") + lb.get("message", ""))
    stages = [max(s_distance(a.H, b.H).max(), s_distance(a.H_bdry, b.H_bdry).max())
              for a, b in zip(la["fields"], lb["fields"])]
    stages = [float(x) for x in stages]
    ratios = [b / a for a, b in zip(stages, stages[1:]) if a > 0]
    logs = {"a": la, "b": lb, "stage_distances": stages, "ratios": ratios,
            "limit_estimate": _aitken_limit(stages),
            "decreasing": bool(all(b < a for a, b in zip(stages, stages[1:])))}
    return stages[-1], logs


def perturbed_boundary(n, eps=0.1, K=None):
    """z -> h_X^{1/2} exp(eps K) h_X^{1/2}; the default K = diag(1, 0, ..., 0, -1) is kappa-fixed."""
    if K is None:
        K = np.zeros((n, n))
        K[0, 0], K[-1, -1] = 1.0, -1.0
    K = np.asarray(K, dtype=complex)
    E = _eig_fun(eps * K, np.exp)

    def bdry(z):
        Hx = hx_metric(n, z)
        Q = _eig_fun(Hx, np.sqrt)
        return _herm(Q @ E @ Q)

    return bdry


def subharmonicity_check(H1, H2, tol=1e-6):
    """Check that tr s(h1, h2) and log tr s(h1, h2) are discretely subharmonic."""
    if H1.grid is not H2.grid and (H1.grid.shape != H2.grid.shape or H1.grid.radius != H2.grid.radius):
        raise ValueError("both metrics must live on the same grid")
    g = H1.grid
    tr = np.trace(endomorphism_s(H1.H, H2.H), axis1=-2, axis2=-1).real
    trb = np.trace(endomorphism_s(H1.H_bdry, H2.H_bdry), axis1=-2, axis2=-1).real
    lap_tr = g.laplacian(tr, trb)
    lap_log = g.laplacian(np.log(tr), np.log(trb))
    bad_tr = np.argwhere(lap_tr < -tol)
    bad_log = np.argwhere(lap_log < -tol)
    return {
        "ok": bool(len(bad_tr) == 0 and len(bad_log) == 0),
        "min_lap_tr": float(lap_tr.min()),
        "min_lap_log_tr": float(lap_log.min()),
        "violations_tr": [tuple(int(x) for x in v) for v in bad_tr[:20]],
        "violations_log_tr": [tuple(int(x) for x in v) for v in bad_log[:20]],
        "n_violations": int(len(bad_tr) + len(bad_log)),
    }


def maximum_principle_check(u, c, grid, u_bdry, a=0.25, tol=1e-8):
    """Cooperative weakly coupled system  a Lap u_i + sum_j c_ij u_j >= 0.

    ``u`` has shape (m, n_r, n_theta), ``c`` shape (m, m, n_r, n_theta) and
    ``u_bdry`` shape (m, n_theta).  Checks cooperativity (c_ij >= 0 for
    i != j), full coupling of the index graph, that psi = 1 is a
    supersolution (row sums <= 0), the inequality itself and finally the
    conclusion sup u_i <= max(sup_bdry u_i, 0).  Returns a dict with a witness
    for the first failed item.
    """
    u = np.asarray(u, dtype=float)
    c = np.asarray(c, dtype=float)
    ub = np.asarray(u_bdry, dtype=float)
    m = u.shape[0]
    out = {"cooperative": True, "fully_coupled": True, "supersolution": True, "inequality": True,
           "conclusion": True, "witness": None}
    off = ~np.eye(m, dtype=bool)
    if m > 1:
        neg = c[off] < -tol
        if np.any(neg):
            out["cooperative"] = False
            first = np.argwhere(neg)[0]
            i, j = np.argwhere(off)[first[0]]
            out["witness"] = out["witness"] or {"item": "cooperative", "pair": [int(i), int(j)],
                                                "node": [int(x) for x in first[1:]]}
    # strong connectivity of i -> j when c_ij > 0 somewhere
    G = (np.abs(c) > tol).reshape(m, m, -1).any(axis=-1)
    from scipy.sparse.csgraph import connected_components

    ncomp, _ = connected_components(sp.csr_matrix(G & off), directed=True, connection="strong")
    if m > 1 and ncomp != 1:
        out["fully_coupled"] = False
        out["witness"] = out["witness"] or {"item": "fully_coupled", "components": int(ncomp)}
    rows = c.sum(axis=1)
    if np.any(rows > tol):
        out["supersolution"] = False
        node = np.argwhere(rows > tol)[0]
        out["witness"] = out["witness"] or {"item": "supersolution", "node": [int(x) for x in node]}
    lhs = np.array([a * grid.laplacian(u[i], ub[i]) for i in range(m)]) + np.einsum("ij...,j...->i...", c, u)
    if np.any(lhs < -tol):
        out["inequality"] = False
        node = np.argwhere(lhs < -tol)[0]
        out["witness"] = out["witness"] or {"item": "inequality", "node": [int(x) for x in node],
                                            "value": float(lhs[tuple(node)])}
    sup_in = u.reshape(m, -1).max(axis=1)
    bound = np.maximum(ub.max(axis=1), 0.0)
    if np.any(sup_in > bound + tol):
        out["conclusion"] = False
        i = int(np.argmax(sup_in - bound))
        node = np.unravel_index(np.argmax(u[i]), u[i].shape)
        out["witness"] = out["witness"] or {"item": "conclusion", "index": i, "node": [int(x) for x in node],
                                            "value": float(sup_in[i]), "bound": float(bound[i])}
    out["holds"] = all(out[k] for k in ("cooperative", "fully_coupled", "supersolution", "inequality", "conclusion"))
    return out


def domination_system(w, w_x, gammas_sq, grid):
    """Margins v_k = w^X_k - w_k and the coupling fields of the linear system they satisfy.

    For a companion field with w solving the Toda system and w^X the
    reference (all links 1), subtracting the two equations gives
    1/4 Lap v_k + ct_k (v_{k-1} - 2 v_k + v_{k+1}) = T_k >= 0
    with ct_k = E^X_k (e^D - 1)/D, D = v_{k-1} + v_{k+1} - 2 v_k and
    E^X_k = e^{2 w^X_k - w^X_{k-1} - w^X_{k+1}}; ``gammas_sq`` rescales ct_k
    for chains whose reference links are not 1.
    Returns (v, c) in the layout of ``maximum_principle_check``.
    """
    w = np.asarray(w, dtype=float)
    w_x = np.asarray(w_x, dtype=float)
    m = w.shape[0]
    v = w_x - w
    zero = np.zeros((1,) + v.shape[1:])
    vv = np.concatenate([zero, v, zero])
    wwx = np.concatenate([zero, w_x, zero])
    D = vv[:-2] + vv[2:] - 2 * vv[1:-1]
    Ex = np.exp(2 * wwx[1:-1] - wwx[:-2] - wwx[2:])
    with np.errstate(invalid="ignore", divide="ignore"):
        phi = np.where(np.abs(D) > 1e-12, np.expm1(D) / D, 1.0 + D / 2)
    ct = np.asarray(gammas_sq) * Ex * phi
    c = np.zeros((m, m) + v.shape[1:])
    for k in range(m):
        c[k, k] = -2 * ct[k]
        if k > 0:
            c[k, k - 1] = ct[k]
        if k < m - 1:
            c[k, k + 1] = ct[k]
    return v, c


def first_minor_domination_probe(H):
    """b = sup H_11 / (h_X)_11 together with the mutual-boundedness suprema."""
    n = H.n
    Hx = hx_metric(n, H.grid.z)
    b = float(np.max(H.H[..., 0, 0].real / Hx[..., 0, 0].real))
    ev = s_eigenvalues(Hx, H.H)
    return b, float(ev[..., -1].max()), float((1.0 / ev[..., 0]).max())
