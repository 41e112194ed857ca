# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pixel power-flow kernel.

Must stay numerically identical to ``_kernels_py.pixel_powers``: same
operation order, fourth powers as (x*x)*(x*x), no FMA contraction.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def pixel_powers(const double[:, ::1] T, const cnp.intp_t[:, ::1] mat,
                 const double[:, ::1] C, const double[::1] eps,
                 double h, double r, double t_amb,
                 bint convective, bint radiative):
    cdef Py_ssize_t H = T.shape[0], W = T.shape[1]
    cdef Py_ssize_t i, j
    cdef cnp.intp_t m0
    cdef double t0, s, v, q, t2
    out_arr = np.full((H, W), np.nan, dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    q = t_amb * t_amb
    q = q * q
    for i in range(1, H - 1):
        for j in range(1, W - 1):
            t0 = T[i, j]
            m0 = mat[i, j]
            s = C[m0, mat[i - 1, j]] * (T[i - 1, j] - t0)
            s = s + C[m0, mat[i + 1, j]] * (T[i + 1, j] - t0)
            s = s + C[m0, mat[i, j - 1]] * (T[i, j - 1] - t0)
            s = s + C[m0, mat[i, j + 1]] * (T[i, j + 1] - t0)
            v = -s
            if convective:
                v = v - h * (t_amb - t0)
            if radiative:
                t2 = t0 * t0
                v = v - r * eps[m0] * (q - t2 * t2)
            out[i, j] = v
    return out_arr
