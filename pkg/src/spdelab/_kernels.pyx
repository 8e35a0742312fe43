# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled weak-flux kernels; same contract as ``_kernels_py.flux_assemble``."""

import numpy as np

from libc.math cimport pow, tanh, sqrt

cdef double[3] GS
cdef double[3] GW
GS[0] = 0.5 - 0.5 * sqrt(0.6)
GS[1] = 0.5
GS[2] = 0.5 + 0.5 * sqrt(0.6)
GW[0] = 5.0 / 18.0
GW[1] = 8.0 / 18.0
GW[2] = 5.0 / 18.0


_CX_CACHE = {}


def _position_coefficient(Py_ssize_t m, double h, double c0, double amp_x, double length):
    """c0 (1 + amp_x sin(2 pi x / L)) at the quadrature points; depends on the mesh only."""
    key = (m, h, c0, amp_x, length)
    table = _CX_CACHE.get(key)
    if table is None:
        gs = np.array([GS[0], GS[1], GS[2]])
        pts = (np.arange(m + 1)[:, None] + gs[None, :]) * h
        table = np.ascontiguousarray(c0 * (1.0 + amp_x * np.sin(2.0 * np.pi * pts / length)))
        if len(_CX_CACHE) >= 32:
            _CX_CACHE.clear()
        _CX_CACHE[key] = table
    return table


def flux_assemble(const double[::1] u, double h, params, bint want_jacobian=True):
    cdef double[::1] prm = np.ascontiguousarray(params, dtype=np.float64)
    cdef double p = prm[0], eps = prm[1], c0 = prm[2], amp_x = prm[3]
    cdef double amp_l = prm[4], sign = prm[5]
    cdef int mode = <int>prm[6]
    cdef double cb = prm[7], cs = prm[8], x_left = prm[9], length = prm[10]
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t e, q
    cdef double ul, ur, slope, r2, az, da, s, lam, cx, th, c, dc, conv, dconv, tl
    cdef double qi, jl, jr, pw

    cdef double[:, ::1] cxq = _position_coefficient(m, h, c0, amp_x, length)

    flux_a = np.zeros(m)
    cdef double[::1] flux = flux_a
    lower_a = np.zeros(m - 1 if m > 0 else 0)
    diag_a = np.zeros(m)
    upper_a = np.zeros(m - 1 if m > 0 else 0)
    cdef double[::1] lower = lower_a
    cdef double[::1] diag = diag_a
    cdef double[::1] upper = upper_a

    for e in range(m + 1):
        ul = u[e - 1] if e >= 1 else 0.0
        ur = u[e] if e < m else 0.0
        slope = (ur - ul) / h
        r2 = eps * eps + slope * slope
        pw = pow(r2, 0.5 * (p - 2.0))
        az = pw * slope
        da = 0.0
        if want_jacobian:
            if r2 == 0.0:
                da = 1.0 if p == 2.0 else 0.0
            else:
                da = pw / r2 * ((p - 1.0) * slope * slope + eps * eps)
        qi = 0.0
        jl = 0.0
        jr = 0.0
        for q in range(3):
            s = GS[q]
            lam = ul * (1.0 - s) + ur * s
            cx = cxq[e, q]
            th = tanh(lam) if amp_l != 0.0 else 0.0
            c = cx * (1.0 + amp_l * th)
            if mode == 0:
                conv = cb * lam
                dconv = cb
            else:
                tl = tanh(lam / cs)
                conv = cb * cs * tl
                dconv = cb * (1.0 - tl * tl)
            qi += GW[q] * (sign * c * az + conv)
            if want_jacobian:
                dc = cx * amp_l * (1.0 - th * th)
                jl += GW[q] * (sign * (dc * (1.0 - s) * az - c * da / h) + dconv * (1.0 - s))
                jr += GW[q] * (sign * (dc * s * az + c * da / h) + dconv * s)
        if e < m:
            flux[e] += qi
            if want_jacobian:
                diag[e] += jr
                if e >= 1:
                    lower[e - 1] = jl
        if e >= 1:
            flux[e - 1] -= qi
            if want_jacobian:
                diag[e - 1] -= jl
                if e < m:
                    upper[e - 1] = -jr
    if not want_jacobian:
        return flux_a, None, None, None
    return flux_a, lower_a, diag_a, upper_a
