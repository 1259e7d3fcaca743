"""Input validation helpers in the spirit of sklearn.utils.validation."""

import numbers

import numpy as np


def check_square_batch(A, name="matrix"):
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"{name} must be square in its last two axes, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} contains non-finite entries")
    return A


def check_hermitian_pd(H, tol=1e-8, grid=None, name="metric"):
    """Raise with the first offending node if H is not Hermitian PD."""
    from .bundle import PDViolation

    H = check_square_batch(np.asarray(H, dtype=complex), name)
    asym = np.abs(H - np.conj(np.swapaxes(H, -1, -2))).max(axis=(-2, -1))
    scale = np.abs(H).max(axis=(-2, -1)) + 1.0
    if np.any(asym > tol * scale):
        loc = tuple(np.argwhere(asym > tol * scale)[0])
        raise PDViolation(f"{name} is not Hermitian at node {_describe(loc, grid)}", loc)
    ev = np.linalg.eigvalsh(0.5 * (H + np.conj(np.swapaxes(H, -1, -2))))[..., 0]
    if np.any(~(ev > 0)):
        loc = tuple(np.argwhere(~(ev > 0))[0])
        raise PDViolation(f"{name} is not positive definite at node {_describe(loc, grid)}", loc)
    return H


def _describe(loc, grid):
    if grid is not None and len(loc) >= 2:
        i, j = loc[0], loc[1]
        return f"{loc} (r={grid.r[i]:.4g}, theta={grid.theta[j]:.4g})"
    return str(loc)


def check_points(z, radius=1.0, strict=True):
    """Complex array of points inside the disk of the given radius."""
    z = np.asarray(z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("points must be finite")
    bad = np.abs(z) >= radius if strict else np.abs(z) > radius
    if np.any(bad):
        raise ValueError(f"points must lie in the open disk of radius {radius}")
    return z


def check_positive(x, name, allow_zero=False):
    if not isinstance(x, numbers.Real) or not np.isfinite(x):
        raise ValueError(f"{name} must be a finite real number, got {x!r}")
    if x < 0 or (x == 0 and not allow_zero):
        raise ValueError(f"{name} must be positive, got {x!r}")
    return float(x)


def check_radius(r, name="radius"):
    r = check_positive(r, name)
    if r >= 1:
        raise ValueError(f"{name} must lie in (0, 1), got {r}")
    return r


def check_grid_shape(n_r, n_theta):
    if int(n_r) != n_r or n_r < 2:
        raise ValueError(f"n_r must be an integer >= 2, got {n_r!r}")
    if int(n_theta) != n_theta or n_theta < 4 or n_theta % 2:
        raise ValueError(f"n_theta must be an even integer >= 4, got {n_theta!r}")
    return int(n_r), int(n_theta)


def check_differentials(q, n=None):
    from .bundle import DifferentialTuple

    if isinstance(q, DifferentialTuple):
        out = q
    elif isinstance(q, dict) and "n" in q:
        out = DifferentialTuple.from_json(q)
    elif isinstance(q, dict):
        if n is None:
            raise ValueError("rank n required when q is a bare coefficient dict")
        out = DifferentialTuple(n, q)
    else:
        raise TypeError(f"cannot interpret {type(q).__name__} as differentials")
    if n is not None and out.n != n:
        raise ValueError(f"expected rank {n}, got {out.n}")
    return out
