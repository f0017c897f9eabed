# cython: language_level=3
"""Compiled stencil and shooting kernels.

Semantics (including operation order, clamping and the crossing flag) match
``leflab.kernels.pyref`` exactly; the test suite asserts agreement.
"""

from libc.math cimport fmax, fmin, isfinite, pow

import numpy as np

BACKEND = "cython"

cdef double _CAP = 1e100


cpdef void neg_laplacian_1d(const double[::1] u, double inv_h2, double[::1] out):
    cdef Py_ssize_t i, n = u.shape[0]
    out[0] = 0.0
    out[n - 1] = 0.0
    for i in range(1, n - 1):
        out[i] = (2.0 * u[i] - u[i - 1] - u[i + 1]) * inv_h2


cpdef void neg_laplacian_2d(const double[:, ::1] u, double inv_hx2, double inv_hy2,
                            double[:, ::1] out):
    cdef Py_ssize_t i, j, ny = u.shape[0], nx = u.shape[1]
    for i in range(nx):
        out[0, i] = 0.0
        out[ny - 1, i] = 0.0
    for j in range(ny):
        out[j, 0] = 0.0
        out[j, nx - 1] = 0.0
    for j in range(1, ny - 1):
        for i in range(1, nx - 1):
            out[j, i] = (2.0 * u[j, i] - u[j, i - 1] - u[j, i + 1]) * inv_hx2 + \
                        (2.0 * u[j, i] - u[j - 1, i] - u[j + 1, i]) * inv_hy2


cdef inline double _rhs(double u, double lam, double q, double p, double sign) nogil:
    cdef double up = u if u > 0.0 else 0.0
    return -(lam * pow(up, q) + sign * pow(up, p))


cdef inline double _clamp(double v) nogil:
    if not isfinite(v):
        # -inf -> -CAP; +inf and nan -> +CAP (mirrors pyref's nan_to_num).
        return -_CAP if v < 0.0 else _CAP
    return fmin(fmax(v, -_CAP), _CAP)


def rk4_terminal(double lam, double q, double p, double sign, slopes, int steps):
    """Batched RK4 for u'' = -(lam*u+^q + sign*u+^p); see pyref.rk4_terminal."""
    cdef double[::1] s = np.ascontiguousarray(slopes, dtype=np.float64)
    cdef Py_ssize_t m = s.shape[0], j, k
    terminal = np.empty(m, dtype=np.float64)
    crossed = np.zeros(m, dtype=bool)
    cdef double[::1] term_v = terminal
    cdef unsigned char[::1] cross_v = crossed.view(np.uint8)
    cdef double h = 1.0 / steps
    cdef double u, v, k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v
    with nogil:
        for j in range(m):
            u = 0.0
            v = s[j]
            for k in range(steps):
                k1u = v
                k1v = _rhs(u, lam, q, p, sign)
                k2u = v + 0.5 * h * k1v
                k2v = _rhs(u + 0.5 * h * k1u, lam, q, p, sign)
                k3u = v + 0.5 * h * k2v
                k3v = _rhs(u + 0.5 * h * k2u, lam, q, p, sign)
                k4u = v + h * k3v
                k4v = _rhs(u + h * k3u, lam, q, p, sign)
                u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
                v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
                u = _clamp(u)
                v = _clamp(v)
                if u < 0.0:
                    cross_v[j] = 1
            term_v[j] = u
    return terminal, crossed


def rk4_profile(double lam, double q, double p, double sign, double s, int steps,
                double[::1] out, rhs=None):
    """Single-trajectory RK4 recording u at every node; see pyref.rk4_profile.

    A Python-callable ``rhs`` override falls back to the reference loop.
    """
    if rhs is not None:
        from . import pyref
        return pyref.rk4_profile(lam, q, p, sign, s, steps, np.asarray(out), rhs=rhs)
    cdef double h = 1.0 / steps
    cdef double u = 0.0, v = s
    cdef double k1u, k1v, k2u, k2v, k3u, k3v, k4u, k4v
    cdef Py_ssize_t i
    cdef bint crossed = False
    out[0] = 0.0
    with nogil:
        for i in range(steps):
            k1u = v
            k1v = _rhs(u, lam, q, p, sign)
            k2u = v + 0.5 * h * k1v
            k2v = _rhs(u + 0.5 * h * k1u, lam, q, p, sign)
            k3u = v + 0.5 * h * k2v
            k3v = _rhs(u + 0.5 * h * k2u, lam, q, p, sign)
            k4u = v + h * k3v
            k4v = _rhs(u + h * k3u, lam, q, p, sign)
            u = u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u)
            v = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
            u = _clamp(u)
            v = _clamp(v)
            if u < 0.0:
                crossed = True
            out[i + 1] = u
    return crossed