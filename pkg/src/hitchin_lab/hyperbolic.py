"""Poincare disk background: g_X, the reference metric h_X and Mobius pullback.

g_X = lambda(z) |dz|^2 with lambda = 4 (1 - |z|^2)^{-2} has curvature -1.
With the convention |dz|^2_{g_X} = 2 / lambda, the summand K^{w} of
K_{X,n} (w = (n + 1 - 2k)/2) carries the metric a_{k,n} (lambda / 2)^{-w}.
"""

from dataclasses import dataclass

import numpy as np

from .bundle import DifferentialTuple, MetricField, _values


def conformal_factor(z):
    z = np.asarray(z, dtype=complex)
    return 4.0 / (1.0 - np.abs(z) ** 2) ** 2


def a_kn(k, n):
    """a_{k,n} = prod_{l<k} (l(n-l)/2)^{1/2} * prod_{l>=k} (l(n-l)/2)^{-1/2}."""
    if not (1 <= k <= n):
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    out = 1.0
    for l in range(1, n):
        f = np.sqrt(l * (n - l) / 2.0)
        out = out * f if l < k else out / f
    return out


def frame_weights(n):
    """Weights w_k = (n + 1 - 2k)/2 of the summands K^{w_k}."""
    return (n + 1 - 2 * np.arange(1, n + 1)) / 2.0


def hx_diagonal(n, z):
    lam = conformal_factor(z)
    a = np.array([a_kn(k, n) for k in range(1, n + 1)])
    w = frame_weights(n)
    return a * (lam[..., None] / 2.0) ** (-w)


def hx_metric(n, z):
    """Diagonal reference metric h_X at z; det h_X = 1."""
    d = hx_diagonal(n, z)
    out = np.zeros(d.shape + (n,), dtype=complex)
    idx = np.arange(n)
    out[..., idx, idx] = d
    return out


def hx_field(grid, n):
    return MetricField(grid, hx_metric(n, grid.z), hx_metric(n, grid.z_bdry), det_normalized=True)


def higgs_norm_sq(A, H, z):
    """|theta|^2_{h, g_X} for theta = A dz.

    tr(A A^{*h}) |dz|^2_{g_X} with A^{*h} = M^{-1} A^* M, M = H^T.
    """
    A = np.asarray(A, dtype=complex)
    H = _values(H)
    M = np.swapaxes(H, -1, -2)
    Astar = np.conj(np.swapaxes(A, -1, -2))
    adj = np.linalg.solve(M, Astar @ M)
    val = np.trace(A @ adj, axis1=-2, axis2=-1).real
    return val * 2.0 / conformal_factor(z)


def discrete_curvature(grid):
    """-(1/(2 lambda)) Delta_h log lambda at the interior nodes."""
    loglam = np.log(conformal_factor(grid.z))
    lap = grid.laplacian(loglam, np.log(conformal_factor(grid.z_bdry)))
    return -lap / (2.0 * conformal_factor(grid.z))


@dataclass(frozen=True)
class MobiusMap:
    """z -> e^{i phi} (z - a) / (1 - conj(a) z)."""

    a: complex = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if abs(self.a) >= 1:
            raise ValueError("Mobius parameter must satisfy |a| < 1")
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "phi", float(self.phi))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return np.exp(1j * self.phi) * (z - self.a) / (1 - np.conj(self.a) * z)

    def derivative(self, z):
        return self.sqrt_derivative(z) ** 2

    def sqrt_derivative(self, z):
        """Continuous square root of m'(z) on the disk, equal to the principal one at 0 when a = 0."""
        z = np.asarray(z, dtype=complex)
        return np.exp(0.5j * self.phi) * np.sqrt(1 - abs(self.a) ** 2) / (1 - np.conj(self.a) * z)

    def inverse(self):
        # w = e^{i phi}(z - a)/(1 - conj(a) z)  <=>  z = (e^{-i phi} w + a)/(1 + conj(a) e^{-i phi} w)
        b = -self.a * np.exp(1j * self.phi)
        return MobiusMap(b, -self.phi)

    def compose(self, other):
        """self after other, returned as a single Mobius map."""
        a = other.inverse()(self.inverse()(0.0))
        w0 = self(other(0.0))
        # the composite sends a to 0; its rotation is fixed by the image of 0
        trial = MobiusMap(complex(a), 0.0)
        rot = w0 / trial(0.0) if abs(trial(0.0)) > 1e-14 else None
        if rot is None:
            z1 = 0.5 if abs(a) < 0.25 else 0.0
            rot = self(other(z1)) / trial(z1)
        return MobiusMap(complex(a), float(np.angle(rot)))


class PulledBackDifferentials:
    """Differentials z -> Q_j(m(z)) m'(z)^j; same evaluation interface as DifferentialTuple."""

    def __init__(self, q, m):
        self.n = q.n
        self.q = q
        self.m = m

    def evaluate(self, j, z):
        z = np.asarray(z, dtype=complex)
        return self.q.evaluate(j, self.m(z)) * self.m.derivative(z) ** j

    def is_zero(self):
        return self.q.is_zero()


def mobius_pullback(obj, m, method="cubic"):
    """Pull back differentials or a sampled metric along a Mobius map.

    For metrics the frame dz^{w} pulls back to m'^{w} dz^{w}, so in the fixed
    frame H'(z) = D^{-1} H(m(z)) conj(D)^{-1} with D = diag(m'(z)^{w_i}); this
    is the weight that leaves h_X invariant.  Returns (field, flags) where
    flags marks nodes whose image left the grid disk.
    """
    if isinstance(obj, DifferentialTuple):
        if abs(m.a) < 1e-15:
            rot = np.exp(1j * m.phi)
            coeffs = {}
            for j, p in obj.coeffs.items():
                c = p.coef * rot ** (j + np.arange(len(p.coef)))
                coeffs[j] = c
            return DifferentialTuple(obj.n, coeffs)
        return PulledBackDifferentials(obj, m)
    if isinstance(obj, PulledBackDifferentials):
        return PulledBackDifferentials(obj, m)
    if not isinstance(obj, MetricField):
        raise TypeError("expected DifferentialTuple or MetricField")
    g = obj.grid
    n = obj.n
    w2 = (2 * frame_weights(n)).astype(int)
    interp = g.interpolator(obj.H, obj.H_bdry, method=method)

    def pull(z):
        zi = m(z)
        outside = np.abs(zi) > g.radius
        zc = np.where(outside, zi / np.abs(zi) * g.radius, zi)
        Hm = interp(zc)
        sq = m.sqrt_derivative(z)
        D = sq[..., None] ** w2
        Hp = Hm / D[..., :, None] / np.conj(D)[..., None, :]
        return Hp, outside

    H, flags = pull(g.z)
    Hb, flags_b = pull(g.z_bdry)
    return MetricField(g, H, Hb, obj.det_normalized), flags
