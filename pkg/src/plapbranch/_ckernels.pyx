# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled flux kernels; drop-in replacement for ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, fabs, log

cnp.import_array()


def flux_divergence(const double[::1] u, double p, const double[::1] sh, double h):
    cdef Py_ssize_t n = u.shape[0], i
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef double du, f, pm2 = p - 2.0
    cdef bint linear = p == 2.0
    with nogil:
        for i in range(n - 1):
            du = (u[i + 1] - u[i]) / h
            if du == 0.0:
                continue
            if linear:
                f = sh[i] * du
            else:
                f = sh[i] * exp(pm2 * log(fabs(du))) * du
            out[i] -= f
            out[i + 1] += f
    return out_arr


def flux_jacobian(const double[::1] u, double p, const double[::1] sh, double h):
    cdef Py_ssize_t n = u.shape[0], i
    lo_arr = np.empty(n - 1)
    up_arr = np.empty(n - 1)
    dg_arr = np.zeros(n)
    cdef double[::1] lo = lo_arr, up = up_arr, dg = dg_arr
    cdef double du, eps, k, gmax = 0.0, half = (p - 2.0) / 2.0
    cdef bint linear = p == 2.0
    with nogil:
        for i in range(n - 1):
            du = fabs(u[i + 1] - u[i]) / h
            if du > gmax:
                gmax = du
        if gmax == 0.0:
            gmax = 1.0
        for i in range(n - 1):
            du = (u[i + 1] - u[i]) / h
            eps = 1e-10 * (gmax + fabs(du))
            if eps < 1e-150:
                eps = 1e-150
            if linear:
                k = sh[i] / h
            else:
                k = sh[i] * (p - 1.0) * exp(half * log(du * du + eps * eps)) / h
            lo[i] = -k
            up[i] = -k
            dg[i] += k
            dg[i + 1] += k
    return lo_arr, dg_arr, up_arr


def solve_tridiagonal(const double[::1] lower, const double[::1] diag,
                      const double[::1] upper, const double[::1] rhs):
    """Thomas algorithm; no pivoting, callers fall back on non-finite output."""
    cdef Py_ssize_t n = diag.shape[0], i
    x_arr = np.empty(n)
    cp_arr = np.empty(n)
    cdef double[::1] x = x_arr, cp = cp_arr
    cdef double m
    with nogil:
        cp[0] = upper[0] / diag[0] if n > 1 else 0.0
        x[0] = rhs[0] / diag[0]
        for i in range(1, n):
            m = diag[i] - lower[i - 1] * cp[i - 1]
            if i < n - 1:
                cp[i] = upper[i] / m
            x[i] = (rhs[i] - lower[i - 1] * x[i - 1]) / m
        for i in range(n - 2, -1, -1):
            x[i] -= cp[i] * x[i + 1]
    return x_arr
