"""1D P1 finite-element space on a uniform mesh with homogeneous Dirichlet data.

A nodal field is a plain float array holding the values at the ``node_count``
interior nodes; the boundary values are implicitly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg.lapack import dgtsv

from . import kernels
from .errors import ConfigurationError, DataError, NumericError

GAUSS3_S = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
GAUSS3_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


@dataclass(frozen=True)
class SpatialMesh:
    node_count: int
    a: float = 0.0
    b: float = 1.0

    @property
    def h(self) -> float:
        return (self.b - self.a) / (self.node_count + 1)

    @property
    def length(self) -> float:
        return self.b - self.a

    @cached_property
    def nodes(self) -> np.ndarray:
        """Coordinates of the interior nodes."""
        return self.a + self.h * np.arange(1, self.node_count + 1)

    @cached_property
    def all_nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.node_count + 2)

    def interpolate(self, fn) -> np.ndarray:
        return np.asarray(fn(self.nodes), dtype=float).copy()

    def pad(self, f: np.ndarray) -> np.ndarray:
        """Nodal field with the two zero boundary values attached."""
        full = np.zeros(self.node_count + 2)
        full[1:-1] = f
        return full

    def mass_bands(self, lumped: bool = False):
        m = self.node_count
        h = self.h
        if lumped:
            return np.zeros(m - 1), np.full(m, h), np.zeros(m - 1)
        off = np.full(m - 1, h / 6.0)
        return off, np.full(m, 2.0 * h / 3.0), off.copy()

    def stiffness_bands(self):
        m = self.node_count
        h = self.h
        off = np.full(m - 1, -1.0 / h)
        return off, np.full(m, 2.0 / h), off.copy()

    def mass_dense(self, lumped: bool = False) -> np.ndarray:
        return tridiag_dense(*self.mass_bands(lumped))

    def stiffness_dense(self) -> np.ndarray:
        return tridiag_dense(*self.stiffness_bands())

    def mass_apply(self, f: np.ndarray, lumped: bool = False) -> np.ndarray:
        return tri_matvec(*self.mass_bands(lumped), f)

    def inner(self, f: np.ndarray, g: np.ndarray, lumped: bool = False) -> float:
        """L2 inner product of the P1 interpolants."""
        return float(np.dot(f, self.mass_apply(g, lumped)))

    def l2_norm_sq(self, f: np.ndarray) -> float:
        return self.inner(f, f)

    def quadrature_values(self, f: np.ndarray):
        """Points, weights (already scaled by h) and interpolant values, 3-point Gauss."""
        full = self.pad(f)
        s = GAUSS3_S[None, :]
        vals = full[:-1, None] * (1.0 - s) + full[1:, None] * s
        x = self.a + (np.arange(self.node_count + 1)[:, None] + s) * self.h
        w = np.broadcast_to(self.h * GAUSS3_W[None, :], vals.shape)
        return x, w, vals

    def integrate(self, fn, f: np.ndarray) -> float:
        """3-point Gauss quadrature of ``fn(x, f_h(x))`` over the domain."""
        x, w, vals = self.quadrature_values(f)
        return float(np.sum(w * fn(x, vals)))


def build_mesh(node_count: int, endpoints=(0.0, 1.0)) -> SpatialMesh:
    a, b = (float(v) for v in endpoints)
    if int(node_count) != node_count or node_count < 2:
        raise ConfigurationError(f"node_count must be an integer >= 2, got {node_count!r}")
    if not (np.isfinite(a) and np.isfinite(b)) or not a < b:
        raise ConfigurationError(f"endpoints must satisfy a < b, got ({a}, {b})")
    return SpatialMesh(int(node_count), a, b)


def tridiag_dense(lower, diag, upper) -> np.ndarray:
    return np.diag(diag) + np.diag(lower, -1) + np.diag(upper, 1)


def tri_matvec(lower, diag, upper, x):
    y = diag * x
    y[1:] += lower * x[:-1]
    y[:-1] += upper * x[1:]
    return y


def tri_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system with partial pivoting (LAPACK gtsv)."""
    _, _, _, x, info = dgtsv(lower, diag, upper, rhs)
    if info != 0:
        raise NumericError(f"singular tridiagonal system (gtsv info={info})")
    return x


def _check_field(mesh: SpatialMesh, f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (mesh.node_count,):
        raise DataError(f"field has shape {f.shape}, mesh expects ({mesh.node_count},)")
    return f


def _power_integral(A, B, q, length):
    """Integral over [0, length] of the q-th power of the linear function from A to B (A, B >= 0)."""
    out = np.empty_like(A)
    diff = B - A
    scale = np.maximum(A, B)
    near = np.abs(diff) <= 1e-3 * scale
    near |= scale == 0.0
    # 6-point Gauss is exact to rounding for nearly constant integrands
    if np.any(near):
        xs, ws = np.polynomial.legendre.leggauss(6)
        s = 0.5 * (xs + 1.0)
        vals = A[near, None] * (1.0 - s) + B[near, None] * s
        out[near] = length[near] * (vals**q @ (0.5 * ws))
    far = ~near
    if np.any(far):
        out[far] = length[far] * (B[far] ** (q + 1) - A[far] ** (q + 1)) / ((q + 1) * diff[far])
    return out


def lq_norm(mesh: SpatialMesh, f, q: float = 2.0) -> float:
    """L^q norm of the P1 interpolant of ``f``.

    Elements are split where the interpolant changes sign; on each piece the
    integrand is a power of a non-negative linear function and is integrated
    in closed form (Gauss-Legendre when the piece is nearly constant).
    """
    if not q >= 1.0:
        raise ValueError(f"q must be >= 1, got {q}")
    f = _check_field(mesh, f)
    full = mesh.pad(f)
    f0, f1 = full[:-1], full[1:]
    h = mesh.h
    if float(q).is_integer() and int(q) % 2 == 0:
        n = int(q) // 2 + 1
        xs, ws = np.polynomial.legendre.leggauss(n)
        s = 0.5 * (xs + 1.0)
        vals = f0[:, None] * (1.0 - s) + f1[:, None] * s
        total = h * np.sum(vals**q @ (0.5 * ws))
        return float(total ** (1.0 / q))
    same = f0 * f1 >= 0.0
    total = 0.0
    if np.any(same):
        A, B = np.abs(f0[same]), np.abs(f1[same])
        total += np.sum(_power_integral(A, B, q, np.full(A.shape, h)))
    cross = ~same
    if np.any(cross):
        A, B = np.abs(f0[cross]), np.abs(f1[cross])
        root = A / (A + B)
        zeros = np.zeros_like(A)
        total += np.sum(_power_integral(A, zeros, q, h * root))
        total += np.sum(_power_integral(zeros, B, q, h * (1.0 - root)))
    return float(total ** (1.0 / q))


def l1_norm(mesh: SpatialMesh, f) -> float:
    return lq_norm(mesh, f, 1.0)


def grad_lp_norm(mesh: SpatialMesh, f, p: float) -> float:
    """``||grad f_h||_{L^p}^p``; the gradient is constant on each element."""
    if not p > 1.0:
        raise ValueError(f"p must be > 1, got {p}")
    f = _check_field(mesh, f)
    slopes = np.diff(mesh.pad(f)) / mesh.h
    return float(mesh.h * np.sum(np.abs(slopes) ** p))


def assemble_weak_flux(model, f, want_jacobian: bool = False):
    """Vector with entries ``int (A(x, f, f') + F(f)) phi_i' dx``.

    With ``want_jacobian`` the tridiagonal Jacobian bands ``(lower, diag,
    upper)`` are returned as well.
    """
    mesh = model.mesh
    f = _check_field(mesh, f)
    if not np.all(np.isfinite(f)):
        raise NumericError("non-finite nodal values in flux assembly")
    flux, lower, diag, upper = kernels.flux_assemble(
        np.ascontiguousarray(f), mesh.h, model.flux_params(), want_jacobian
    )
    if want_jacobian:
        return flux, (lower, diag, upper)
    return flux
