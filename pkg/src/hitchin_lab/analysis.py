"""Potential theory on the unit disk and the existence criteria built on it.

Norms in this module use the Euclidean metric g_0 = dx^2 + dy^2, for which
|dz|^2 = 2.  The Green function is G(z, xi) = log|(1 - conj(z) xi)/(z - xi)|
(Delta G = -2 pi delta).
"""

from dataclasses import dataclass
from functools import reduce
import math

import numpy as np
from scipy import integrate
from scipy.special import roots_legendre
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import sympy

from .bundle import _as_poly
from .solver import SolverConfig, SolveReport

IN_AB = "in_Ab"
IN_A_NOT_AB = "in_A_not_Ab"
NOT_IN_A = "not_in_A"
INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class DiskFunction:
    """Nonnegative function on the disk with an optional exact form tag."""

    func: object
    form: str = "custom"
    p: float = None
    poly: object = None

    FORMS = ("power_p", "abs_poly_sq", "custom")

    def __post_init__(self):
        if self.form not in self.FORMS:
            raise ValueError(f"unknown form {self.form!r}")

    @classmethod
    def power(cls, p):
        p = float(p)
        return cls(lambda z: (1 - np.abs(z) ** 2) ** p, "power_p", p=p)

    @classmethod
    def abs_poly_sq(cls, coeffs):
        P = _as_poly(coeffs)
        return cls(lambda z: np.abs(P(z)) ** 2, "abs_poly_sq", poly=P)

    @classmethod
    def custom(cls, func):
        return cls(func, "custom")

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.broadcast_to(np.asarray(self.func(z), dtype=float), z.shape)


def green(z, xi):
    """G(z, xi) = log|(1 - conj(z) xi)/(z - xi)|; +inf where z == xi."""
    z = np.asarray(z, dtype=complex)
    xi = np.asarray(xi, dtype=complex)
    if np.any(np.abs(z) >= 1) or np.any(np.abs(xi) >= 1):
        raise ValueError("points must lie in the open unit disk")
    num = np.abs(1 - np.conj(z) * xi)
    den = np.abs(z - xi)
    with np.errstate(divide="ignore"):
        out = np.where(den > 0, np.log(num / np.where(den > 0, den, 1.0)), np.inf)
    return out[()] if out.ndim == 0 else out


def mean_log_circle(z, r):
    """(1/2pi) int log|z - r e^{it}| dt by adaptive quadrature.

    The interval starts at arg z so a singularity on the circle sits at the
    endpoints, where the adaptive rule handles the log.
    """
    if not r > 0:
        raise ValueError("radius must be positive")
    z = complex(z)
    a = np.angle(z)
    f = lambda t: np.log(abs(z - r * np.exp(1j * t)))
    val, err = integrate.quad(f, a, a + 2 * np.pi, limit=200, epsabs=1e-12, epsrel=1e-12)
    if not np.isfinite(val):
        raise ArithmeticError("quadrature did not converge")
    return val / (2 * np.pi)


# ---------------------------------------------------------------- Green potentials


def _panel_radii(levels):
    return 1.0 - 2.0 ** (-np.arange(0, levels + 1, dtype=float))


def _ring_fourier(f, t, n_theta):
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    vals = f(t[:, None] * np.exp(1j * th)[None, :])
    return np.fft.fft(vals, axis=1) / n_theta


def _ring_green_integral(c, t, zabs, zarg):
    """int_0^{2pi} G(z, t e^{i th}) f dth for rings t and sample points z.

    Uses G = -log max(|z|, t) + sum_k (rho^k - (|z| t)^k)/k cos(k(th - arg z))
    with rho = min/max of |z|, t.
    """
    n_theta = c.shape[1]
    K = n_theta // 2
    k = np.arange(1, K)
    T = t[:, None]
    Z = zabs[None, :]
    mx = np.maximum(T, Z)
    mn = np.minimum(T, Z)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(mx > 0, mn / np.where(mx > 0, mx, 1), 0.0)
    base = -np.log(mx) * c[:, 0].real[:, None]
    series = np.zeros_like(base)
    for kk in k:
        coef = (rho**kk - (Z * T) ** kk) / kk
        phase = np.real(c[:, kk][:, None] * np.exp(1j * kk * zarg)[None, :])
        series += coef * phase
    return 2 * np.pi * (base + series)


def green_potential_levels(f, levels=10, n_gauss=8, n_theta=64, n_z_angles=8):
    """Truncated integrals on |xi| <= rho_m = 1 - 2^{-m}, m = 1..levels.

    Returns (sup_pot, mass): sup over a z-sample of int_{|xi|<rho_m} G f and
    int_{|xi|<rho_m} f (1 - |xi|^2).
    """
    edges = _panel_radii(levels)
    x, wq = roots_legendre(n_gauss)
    zr = np.concatenate([[0.0], edges[1:-1]])
    za = 2 * np.pi * np.arange(n_z_angles) / n_z_angles
    zabs = np.repeat(zr, n_z_angles)
    zarg = np.tile(za, len(zr))
    pot = np.zeros(len(zabs))
    mass = 0.0
    sup_pot, masses = [], []
    for m in range(1, levels + 1):
        a, b = edges[m - 1], edges[m]
        t = 0.5 * (b - a) * x + 0.5 * (b + a)
        wt = 0.5 * (b - a) * wq * t
        c = _ring_fourier(f, t, n_theta)
        pot += (wt[:, None] * _ring_green_integral(c, t, zabs, zarg)).sum(axis=0)
        mass += 2 * np.pi * np.sum(wt * c[:, 0].real * (1 - t**2))
        inside = zabs < b
        sup_pot.append(float(pot[inside].max()))
        masses.append(float(mass))
    return np.array(sup_pot), np.array(masses)


def _diverges(seq, window=4):
    inc = np.diff(seq)
    if len(inc) < window + 1:
        return False
    growth = seq[1:] > 1.10 * seq[:-1]
    if np.all(growth[-window:]) and np.all(seq[-window - 1:] > 0):
        return True
    # additive (logarithmic) growth: increments that stop shrinking
    tail = inc[-window - 1:]
    if np.all(tail > 0):
        ratios = tail[1:] / tail[:-1]
        if np.all(ratios >= 0.98):
            return True
    return False


def _aitken(seq):
    s0, s1, s2 = seq[:-2], seq[1:-1], seq[2:]
    den = s2 - 2 * s1 + s0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.abs(den) > 1e-300, s2 - (s2 - s1) ** 2 / den, s2)
    return out


def _levels_off(seq, rel=0.01):
    if len(seq) < 4:
        return False
    acc = _aitken(seq)
    a, b = acc[-1], acc[-2]
    scale = max(abs(a), abs(seq[-1]), 1e-300)
    return bool(abs(a - b) <= rel * scale or abs(seq[-1] - seq[-2]) <= rel * 1e-3 * scale)


def _classify_sequence(seq):
    if np.all(np.abs(seq) < 1e-14):
        return "bounded"
    if _diverges(seq):
        return "divergent"
    if _levels_off(seq):
        return "bounded"
    return "undecided"


def class_membership(f, levels=10):
    """Verdict on f in A^b, A \\ A^b or outside A.

    Returns a dict with ``verdict``, ``kind`` ("exact" or "numerical
    evidence") and, for the numerical path, the truncation data.
    """
    if not isinstance(f, DiskFunction):
        f = DiskFunction.custom(f)
    if f.form == "power_p":
        verdict = IN_AB if f.p > -2 else NOT_IN_A
        return {"verdict": verdict, "kind": "exact", "p": f.p}
    if f.form == "abs_poly_sq":
        return {"verdict": IN_AB, "kind": "exact", "reason": "bounded on the disk"}
    sup_pot, mass = green_potential_levels(f, levels=levels)
    cm = _classify_sequence(mass)
    cp = _classify_sequence(sup_pot)
    if cm == "divergent":
        verdict = NOT_IN_A
    elif cm == "bounded" and cp == "bounded":
        verdict = IN_AB
    elif cm == "bounded" and cp == "divergent":
        verdict = IN_A_NOT_AB
    else:
        verdict = INCONCLUSIVE
    return {
        "verdict": verdict,
        "kind": "numerical evidence",
        "radii": _panel_radii(levels)[1:].tolist(),
        "mass": mass.tolist(),
        "sup_potential": sup_pot.tolist(),
    }


def in_class(verdict, target):
    """Whether a verdict establishes membership in ``target`` ("A" or "Ab")."""
    if target == "Ab":
        return verdict == IN_AB
    if target == "A":
        return verdict in (IN_AB, IN_A_NOT_AB)
    raise ValueError("target must be 'A' or 'Ab'")


# ---------------------------------------------------------------- curvature equation


def solve_curvature(alpha, grid, cfg=None, u_bdry=None):
    """Newton iteration for 1/4 Lap u = |alpha|^2 e^{2u} with Dirichlet data.

    Starts from the harmonic extension of the boundary data, which is a
    supersolution; the map is concave so the iterates decrease monotonically,
    and this is asserted at every step.
    """
    cfg = cfg or SolverConfig()
    P = alpha if callable(alpha) else _as_poly(alpha)
    z = grid.z.ravel()
    a2 = np.abs(np.broadcast_to(P(z), z.shape)) ** 2
    if u_bdry is None:
        u_bdry = np.zeros(grid.n_theta)
    ub = np.asarray(u_bdry(grid.z_bdry) if callable(u_bdry) else u_bdry, dtype=float)
    if ub.shape != (grid.n_theta,) or not np.all(np.isfinite(ub)):
        raise ValueError("boundary data must be finite with one value per angle")
    L = grid.laplacian_matrix
    bv = grid.boundary_vector(ub).ravel()
    u = spla.splu(L.tocsc()).solve(-bv)

    def F(u):
        return 0.25 * (L @ u + bv) - a2 * np.exp(2 * u)

    Fu = F(u)
    hist = [float(np.abs(Fu).max())]
    it = 0
    while hist[-1] > cfg.tol and it < cfg.max_iter:
        it += 1
        J = (0.25 * L - sp.diags(2 * a2 * np.exp(2 * u))).tocsc()
        new = u + spla.spsolve(J, -Fu)
        if np.any(new > u + 1e-9 * (1 + np.abs(u))):
            raise AssertionError("Newton iterate increased; supersolution monotonicity violated")
        u = new
        Fu = F(u)
        hist.append(float(np.abs(Fu).max()))
    rep = SolveReport(
        residual=hist[-1], iterations=it, converged=hist[-1] <= cfg.tol, path="curvature", history=hist,
        message="" if hist[-1] <= cfg.tol else "maximum iterations reached",
    )
    return u.reshape(grid.shape), rep


# ---------------------------------------------------------------- necessity check


def kraus_necessity_check(u, f, grid, u_bdry, tol=1e-6, n_samples=64, seed=0):
    """Green potentials of f = Lap u against the bound 4 pi M, M = sup|u|.

    The potential int G_R(z, xi) f(xi) dsigma on the grid disk of radius R
    (G_R(z, xi) = G(z/R, xi/R)) equals 2 pi (h - u) with h the harmonic
    extension of the boundary values, hence is bounded by 4 pi M.  The
    self cell of each sample uses the exact mean of -log over a disk of the
    same area.
    """
    u = np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    ub = np.asarray(u_bdry, dtype=float)
    M = float(max(np.abs(u).max(), np.abs(ub).max()))
    R = grid.radius
    area = (grid.cell_area[:, None] * grid.dtheta * np.ones(grid.n_theta)).ravel()
    xi = grid.z.ravel() / R
    fv = f.ravel()
    rng = np.random.default_rng(seed)
    idx = rng.choice(grid.size, size=min(n_samples, grid.size), replace=False)
    idx = np.unique(np.concatenate([idx, np.arange(grid.n_theta)[:1]]))
    pots = []
    for p in idx:
        zz = xi[p]
        G = np.log(np.abs(1 - np.conj(zz) * xi) / np.where(np.arange(grid.size) == p, 1.0, np.abs(zz - xi)))
        # self cell: exact average of -log|w| over a disk of equal area (in scaled units)
        a = math.sqrt(area[p] / math.pi) / R
        G[p] = np.log(abs(1 - abs(zz) ** 2)) + 0.5 - math.log(a)
        pots.append(float(np.sum(G * fv * area)))
    pots = np.array(pots)
    bound = 4 * np.pi * M
    sup = float(np.abs(pots).max())
    return {"sup_potential": sup, "bound": bound, "M": M, "ok": bool(sup <= bound + tol),
            "samples": [complex(grid.z.ravel()[p]) for p in idx][:8]}


# ---------------------------------------------------------------- perturbations


def _h_adjoint(X, H):
    M = np.swapaxes(H, -1, -2)
    return np.linalg.solve(M, np.conj(np.swapaxes(X, -1, -2)) @ M)


def _h_norm(X, H):
    return np.sqrt(np.maximum(np.trace(X @ _h_adjoint(X, H), axis1=-2, axis2=-1).real, 0.0))


def perturbed_existence_conditions(theta0, phi, xi, h1, levels=10, fd_step=1e-6):
    """The four class conditions for (dbar^0 + xi, theta_0 + phi) against h_1.

    All arguments are callables z -> matrix: theta0 = Theta0 dz, phi = Phi dz,
    xi = Xi dzbar and h1 the metric matrix.  With |dz|^2 = 2 the functions are
    2|[Phi, Theta0^*]|, 2|Phi|^2, 2|d_zbar(Xi^*)| and 2|Xi|^2 in the h_1 norm.
    Returns the four verdicts and the conjunctions for A and A^b.
    """

    def comm(z):
        H = h1(z)
        P, T = phi(z), theta0(z)
        Ts = _h_adjoint(T, H)
        return 2 * _h_norm(P @ Ts - Ts @ P, H)

    def phi2(z):
        return 2 * _h_norm(phi(z), h1(z)) ** 2

    def dxi(z):
        e = fd_step
        xs = lambda w: _h_adjoint(xi(w), h1(w))
        dx = (xs(z + e) - xs(z - e)) / (2 * e)
        dy = (xs(z + 1j * e) - xs(z - 1j * e)) / (2 * e)
        D = 0.5 * (dx + 1j * dy)
        return 2 * _h_norm(D, h1(z))

    def xi2(z):
        return 2 * _h_norm(xi(z), h1(z)) ** 2

    names = ("commutator", "phi_sq", "dbar_xi_star", "xi_sq")
    out = {}
    for name, fn in zip(names, (comm, phi2, dxi, xi2)):
        F = DiskFunction.custom(fn)
        probe = F(np.array([0.0, 0.3, 0.5j, -0.7]))
        if np.all(np.abs(probe) < 1e-13):
            zero = green_potential_levels(F, levels=4)
            if np.all(np.abs(zero[0]) < 1e-13):
                out[name] = {"verdict": IN_AB, "kind": "exact", "reason": "identically zero"}
                continue
        out[name] = class_membership(F, levels=levels)
    verdicts = [out[k]["verdict"] for k in names]
    out["existence"] = all(in_class(v, "A") for v in verdicts)
    out["bounded_existence"] = all(in_class(v, "Ab") for v in verdicts)
    out["inconclusive"] = any(v == INCONCLUSIVE for v in verdicts)
    return out


def chain_necessary_condition(gammas):
    """Check prod gamma_i^{i(n-i)} = alpha^{N}, N = n(n^2-1)/6, for polynomial links.

    Returns a dict with ``hypothesis`` (bool), ``alpha`` coefficients when it
    holds, the reduction constants r_i = i(n-i)/2 and the comparison
    coefficient 1/max r_i.
    """
    n = len(gammas) + 1
    N = n * (n * n - 1) // 6
    zs = sympy.Symbol("z")
    polys = []
    for g in gammas:
        c = _as_poly(g).coef
        expr = sum(
            (sympy.nsimplify(complex(ci).real) + sympy.I * sympy.nsimplify(complex(ci).imag)) * zs**k
            for k, ci in enumerate(c)
        )
        polys.append(sympy.expand(expr))
    r = [i * (n - i) / 2 for i in range(1, n)]
    info = {"n": n, "N": N, "r": r, "comparison_coefficient": 1.0 / max(r)}
    if any(sympy.simplify(p) == 0 for p in polys):
        info.update(hypothesis=False, reason="a link vanishes identically")
        return info
    prod = sympy.expand(reduce(lambda a, b: a * b, [p ** (i * (n - i)) for i, p in enumerate(polys, start=1)]))
    lc, factors = sympy.sqf_list(prod, zs)
    if any(e % N for _, e in factors):
        info.update(hypothesis=False, reason="hypothesis not verified: product is not an N-th power")
        return info
    root = sympy.Integer(1)
    for base, e in factors:
        root *= base ** (e // N)
    lc_root = complex(sympy.N(lc)) ** (1.0 / N)
    alpha = sympy.Poly(sympy.expand(root), zs)
    coeffs = [complex(sympy.N(c)) * lc_root for c in reversed(alpha.all_coeffs())]
    info.update(hypothesis=True, alpha=coeffs)
    # f = 1: |alpha|^2 is bounded on the disk for a polynomial alpha
    info["alpha_f1_class"] = IN_AB
    return info
