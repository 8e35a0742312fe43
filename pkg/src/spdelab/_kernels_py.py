"""Pure-numpy weak-flux kernels (fallback for the compiled ``_kernels`` module).

Both implementations share one parameter layout, see ``FLUX_PARAMS``:

    p, eps_reg, c0, amp_x, amp_lambda, sign, conv_mode, conv_b, conv_s, x_left, length

The flux density on an element is

    Q(x, u, u') = sign * c(x, u) * (eps^2 + u'^2)^((p-2)/2) * u' + F(u)
    c(x, lam)   = c0 * (1 + amp_x * sin(2 pi (x - x_left) / length)) * (1 + amp_lambda * tanh(lam))
    F(u)        = b*u  (conv_mode 0)   or   b*s*tanh(u/s)  (conv_mode 1)

and node ``i`` receives the 3-point Gauss quadrature of ``Q * phi_i'`` over the
two elements that touch it.
"""

from __future__ import annotations

import numpy as np

FLUX_PARAMS = (
    "p",
    "eps_reg",
    "c0",
    "amp_x",
    "amp_lambda",
    "sign",
    "conv_mode",
    "conv_b",
    "conv_s",
    "x_left",
    "length",
)

GAUSS_S = np.array([0.5 - 0.5 * np.sqrt(0.6), 0.5, 0.5 + 0.5 * np.sqrt(0.6)])
GAUSS_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


def _padded(u):
    full = np.zeros(u.size + 2)
    full[1:-1] = u
    return full


def flux_assemble(u, h, params, want_jacobian=True):
    """Weak flux vector and (optionally) its tridiagonal Jacobian.

    Returns ``(flux, lower, diag, upper)``; the bands are ``None`` when
    ``want_jacobian`` is false.
    """
    u = np.asarray(u, dtype=float)
    p, eps, c0, amp_x, amp_l, sign, mode, cb, cs, x_left, length = (float(v) for v in params)
    m = u.size
    full = _padded(u)
    ul = full[:-1, None]
    ur = full[1:, None]
    slope = (ur - ul) / h  # (m+1, 1)
    s = GAUSS_S[None, :]
    lam = ul * (1.0 - s) + ur * s
    x = x_left + (np.arange(m + 1)[:, None] + s) * h

    cx = c0 * (1.0 + amp_x * np.sin(2.0 * np.pi * (x - x_left) / length))
    th = np.tanh(lam)
    c = cx * (1.0 + amp_l * th)
    r2 = eps * eps + slope * slope
    pw = r2 ** (0.5 * (p - 2.0))
    a_z = pw * slope
    if int(mode) == 0:
        conv = cb * lam
    else:
        conv = cb * cs * np.tanh(lam / cs)
    q = sign * c * a_z + conv
    qi = q @ GAUSS_W  # element integral of Q divided by h

    flux = qi[:-1] - qi[1:]
    if not want_jacobian:
        return flux, None, None, None

    dc = cx * amp_l * (1.0 - th * th)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        da = pw / r2 * ((p - 1.0) * slope * slope + eps * eps)
    if np.any(r2 == 0.0):
        da = np.where(r2 == 0.0, 1.0 if p == 2.0 else 0.0, da)
    if int(mode) == 0:
        dconv = cb * np.ones_like(lam)
    else:
        tl = np.tanh(lam / cs)
        dconv = cb * (1.0 - tl * tl)
    dq_dl = sign * (dc * (1.0 - s) * a_z - c * da / h) + dconv * (1.0 - s)
    dq_dr = sign * (dc * s * a_z + c * da / h) + dconv * s
    jl = dq_dl @ GAUSS_W  # per element
    jr = dq_dr @ GAUSS_W
    # element e couples left node e-1 (flux -= Qi) and right node e (flux += Qi)
    diag = -jl[1:] + jr[:-1]
    upper = -jr[1:-1]
    lower = jl[1:-1]
    return flux, lower, diag, upper
