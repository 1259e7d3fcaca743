"""Polar grid on a sub-disk with boundary-clustered rings.

Rings sit at s_i = (i - 1/2) h, i = 1..n_r, with h = 1/(n_r + 1/2) so the
boundary ring is s = 1.  Physical radii are r = R phi(s) with the odd map
phi(s) = (1 + beta) s - beta s^3.  There is no node at the origin; the
innermost cell has a closed inner face and radial differences there reach
across the center to the opposite node of ring 1.
"""

from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from ._validation import check_grid_shape, check_radius


class PolarGrid:
    def __init__(self, radius, n_r, n_theta, beta=0.4):
        self.radius = check_radius(radius)
        self.n_r, self.n_theta = check_grid_shape(n_r, n_theta)
        if not 0 <= beta < 0.5:
            raise ValueError("beta must lie in [0, 0.5) to keep the map monotone")
        self.beta = float(beta)
        self.h = 1.0 / (self.n_r + 0.5)
        self.dtheta = 2 * np.pi / self.n_theta

    def __repr__(self):
        return f"PolarGrid(radius={self.radius}, n_r={self.n_r}, n_theta={self.n_theta})"

    def phi(self, s):
        b = self.beta
        return (1 + b) * s - b * s**3

    def inverse_phi(self, t):
        t = np.asarray(t, dtype=float)
        s = t.copy()
        b = self.beta
        for _ in range(50):
            f = (1 + b) * s - b * s**3 - t
            s = s - f / ((1 + b) - 3 * b * s**2)
        return s

    @cached_property
    def s(self):
        return (np.arange(1, self.n_r + 1) - 0.5) * self.h

    @cached_property
    def r(self):
        return self.radius * self.phi(self.s)

    @cached_property
    def r_ext(self):
        """Radii of ring 0 (reflected ring 1), rings 1..n_r and the boundary."""
        s = (np.arange(0, self.n_r + 2) - 0.5) * self.h
        return self.radius * self.phi(s)

    @cached_property
    def r_faces(self):
        return self.radius * self.phi(np.arange(0, self.n_r + 1) * self.h)

    @cached_property
    def theta(self):
        return np.arange(self.n_theta) * self.dtheta

    @cached_property
    def z(self):
        return self.r[:, None] * np.exp(1j * self.theta)[None, :]

    @cached_property
    def z_bdry(self):
        return self.radius * np.exp(1j * self.theta)

    @property
    def shape(self):
        return (self.n_r, self.n_theta)

    @property
    def size(self):
        return self.n_r * self.n_theta

    @cached_property
    def cell_area(self):
        """Area per unit angle of each ring's control volume."""
        rf = self.r_faces
        return 0.5 * (rf[1:] ** 2 - rf[:-1] ** 2)

    @cached_property
    def weights(self):
        """Stencil weights (outer, inner, angular) per ring.

        The Laplacian at ring i is w_out (u_{i+1} - u_i) + w_in (u_{i-1} - u_i)
        + w_ang (u_{j+1} + u_{j-1} - 2 u_j).
        """
        re = self.r_ext
        rf = self.r_faces
        A = self.cell_area
        c_out = rf[1:] / (re[2:] - re[1:-1])
        c_in = rf[:-1] / (re[1:-1] - re[:-2])
        w_out = c_out / A
        w_in = c_in / A
        w_in[0] = 0.0
        w_ang = 1.0 / (self.r**2 * self.dtheta**2)
        return w_out, w_in, w_ang

    def index(self, i, j):
        return i * self.n_theta + j

    @cached_property
    def laplacian_matrix(self):
        """Sparse interior Laplacian; boundary enters through ``boundary_vector``."""
        nr, nt = self.shape
        w_out, w_in, w_ang = self.weights
        I, J = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
        p = (I * nt + J).ravel()
        Ii, Jj = I.ravel(), J.ravel()
        rows, cols, vals = [], [], []
        diag = -(w_out[Ii] + w_in[Ii] + 2 * w_ang[Ii])
        rows.append(p), cols.append(p), vals.append(diag)
        m = Ii < nr - 1
        rows.append(p[m]), cols.append(p[m] + nt), vals.append(w_out[Ii[m]])
        m = Ii > 0
        rows.append(p[m]), cols.append(p[m] - nt), vals.append(w_in[Ii[m]])
        rows.append(p), cols.append(Ii * nt + (Jj + 1) % nt), vals.append(w_ang[Ii])
        rows.append(p), cols.append(Ii * nt + (Jj - 1) % nt), vals.append(w_ang[Ii])
        L = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.size, self.size),
        )
        return L

    def boundary_vector(self, u_bdry):
        """Contribution of boundary values to the Laplacian at interior nodes."""
        u_bdry = np.asarray(u_bdry)
        out = np.zeros((self.n_r, self.n_theta) + u_bdry.shape[1:], dtype=u_bdry.dtype)
        out[-1] = self.weights[0][-1] * u_bdry
        return out

    def laplacian(self, u, u_bdry):
        """Discrete Laplacian of a scalar field with Dirichlet data."""
        u = np.asarray(u)
        flat = self.laplacian_matrix @ u.reshape(self.size, -1)
        return flat.reshape(u.shape) + self.boundary_vector(u_bdry)

    @cached_property
    def stencil(self):
        """Neighbour node indices (east, west, north, south) with -1 for boundary.

        The west neighbour of ring 0 (0-based) is the opposite node of the
        same ring, reached through the center.
        """
        nr, nt = self.shape
        I, J = np.meshgrid(np.arange(nr), np.arange(nt), indexing="ij")
        east = np.where(I < nr - 1, (I + 1) * nt + J, -1)
        west = np.where(I > 0, (I - 1) * nt + J, (J + nt // 2) % nt)
        north = I * nt + (J + 1) % nt
        south = I * nt + (J - 1) % nt
        return np.stack([east.ravel(), west.ravel(), north.ravel(), south.ravel()], axis=1)

    @cached_property
    def coloring(self):
        """Colouring such that no stencil contains two nodes of one colour."""
        nbr = self.stencil
        N = self.size
        # adjacency of the column-intersection graph: nodes sharing a stencil
        groups = np.column_stack([np.arange(N), nbr])
        adj = [set() for _ in range(N)]
        for row in groups:
            members = [int(x) for x in row if x >= 0]
            for a in members:
                adj[a].update(members)
        color = -np.ones(N, dtype=int)
        for v in range(N):
            used = {color[u] for u in adj[v] if color[u] >= 0}
            c = 0
            while c in used:
                c += 1
            color[v] = c
        return color

    def polar_of(self, z):
        z = np.asarray(z, dtype=complex)
        return np.abs(z), np.mod(np.angle(z), 2 * np.pi)

    def interpolator(self, values, values_bdry, method="cubic"):
        """Interpolant in (s, theta) covering the closed sub-disk.

        ``values`` has shape (n_r, n_theta, ...) and may be complex.
        """
        values = np.asarray(values)
        values_bdry = np.asarray(values_bdry)
        nr, nt = self.shape
        tail = values.shape[2:]
        pad = 3
        center = np.roll(values[0], nt // 2, axis=0)[None]
        block = np.concatenate([center, values, values_bdry[None]], axis=0)
        block = np.concatenate([block[:, -pad:], block, block[:, :pad]], axis=1)
        s_ax = (np.arange(0, nr + 2) - 0.5) * self.h
        t_ax = (np.arange(-pad, nt + pad)) * self.dtheta
        cplx = np.iscomplexobj(block)
        if cplx:
            data = np.stack([block.real, block.imag], axis=-1)
        else:
            data = block
        data = data.reshape(block.shape[0], block.shape[1], -1)
        interp = RegularGridInterpolator((s_ax, t_ax), data, method=method)

        def evaluate(z):
            r, t = self.polar_of(z)
            if np.any(r > self.radius * (1 + 1e-12)):
                raise ValueError("interpolation point outside the grid disk")
            s = np.minimum(self.inverse_phi(np.minimum(r / self.radius, 1.0)), 1.0)
            pts = np.stack([s.ravel(), t.ravel()], axis=-1)
            out = interp(pts)
            if cplx:
                out = out.reshape(-1, *tail, 2)
                out = out[..., 0] + 1j * out[..., 1]
            return out.reshape(np.shape(r) + tail)

        return evaluate
