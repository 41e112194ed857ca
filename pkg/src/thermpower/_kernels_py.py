"""Pure-numpy pixel power-flow kernel (fallback for the compiled one)."""

import numpy as np


def pixel_powers(T, mat, C, eps, h, r, t_amb, convective, radiative):
    """Per-cell electrical power on interior cells; NaN on the border ring.

    All flows are counted as power received by the cell and the electrical
    power is their negated sum.
    """
    T = np.asarray(T, dtype=np.float64)
    out = np.full(T.shape, np.nan)
    t0 = T[1:-1, 1:-1]
    m0 = mat[1:-1, 1:-1]
    s = C[m0, mat[:-2, 1:-1]] * (T[:-2, 1:-1] - t0)
    s = s + C[m0, mat[2:, 1:-1]] * (T[2:, 1:-1] - t0)
    s = s + C[m0, mat[1:-1, :-2]] * (T[1:-1, :-2] - t0)
    s = s + C[m0, mat[1:-1, 2:]] * (T[1:-1, 2:] - t0)
    v = -s
    if convective:
        v = v - h * (t_amb - t0)
    if radiative:
        q = t_amb * t_amb
        q = q * q
        t2 = t0 * t0
        v = v - r * eps[m0] * (q - t2 * t2)
    out[1:-1, 1:-1] = v
    return out
