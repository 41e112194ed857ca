"""Ambient estimation, emissivity compensation and inpainting of low-emissivity regions."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import ComponentLayout, TemperatureMap, ThermError, ValidationError


class EmissivityError(ThermError):
    """Compensation radicand went negative (inconsistent emissivity or box temperature)."""


class InpaintError(ThermError):
    pass


def _pow4(x):
    x2 = x * x
    return x2 * x2


# --------------------------------------------------------------------------
# Ambient temperature
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AmbientEstimate:
    t_amb: float
    bin_width: float
    peak_bin: int


def estimate_ambient(tmap: TemperatureMap | np.ndarray, bins: int = 100) -> AmbientEstimate:
    """Ambient temperature from the histogram peak of a map.

    The centers of the most populated bin and its two neighbours (clipped at
    the histogram edges) are averaged with their counts as weights.
    """
    if bins < 3:
        raise ValidationError("ambient histogram needs at least 3 bins")
    v = np.ravel(tmap.values if isinstance(tmap, TemperatureMap) else tmap)
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        return AmbientEstimate(lo, 0.0, 0)
    counts, edges = np.histogram(v, bins=bins, range=(lo, hi))
    centers = 0.5 * (edges[:-1] + edges[1:])
    peak = int(np.argmax(counts))
    sel = slice(max(peak - 1, 0), min(peak + 2, bins))
    c = counts[sel].astype(np.float64)
    t = float(np.dot(centers[sel], c) / c.sum())
    # rounding in the weighted mean must not leave the data range
    t = min(max(t, lo), hi)
    return AmbientEstimate(t, float(edges[1] - edges[0]), peak)


# --------------------------------------------------------------------------
# Emissivity
# --------------------------------------------------------------------------


def cell_emissivity(layout: ComponentLayout, emissivity) -> np.ndarray:
    e = np.asarray(emissivity, dtype=np.float64)
    if e.shape != (layout.mu,):
        raise ValidationError(f"emissivity vector must have length {layout.mu}, got {e.shape}")
    if not np.all((e > 0.0) & (e <= 1.0)):
        raise ValidationError("emissivities must lie in (0, 1]")
    return e[layout.material_map]


def compensate_array(t_in: np.ndarray, eps: np.ndarray, t_box: float) -> np.ndarray:
    """True temperature from apparent temperature: T^4 = (T_in^4 - (1-eps) T_box^4) / eps."""
    if not t_box > 0.0:
        raise ValidationError("box temperature must be positive")
    out = np.array(t_in, dtype=np.float64, copy=True)
    grey = eps != 1.0
    if not np.any(grey):
        return out
    e = eps[grey]
    rad = _pow4(out[grey]) - (1.0 - e) * _pow4(t_box)
    if np.any(rad < 0.0):
        k = int(np.flatnonzero(rad < 0.0)[0])
        cell = tuple(int(i) for i in np.argwhere(grey)[k])
        raise EmissivityError(
            f"negative radicand at cell {cell}: apparent {out[grey][k]:.6g} K is below "
            f"what emissivity {e[k]:.4g} allows at box temperature {t_box:.6g} K"
        )
    out[grey] = np.sqrt(np.sqrt(rad / e))
    return out


def observe_array(t_true: np.ndarray, eps: np.ndarray, t_box: float) -> np.ndarray:
    """Apparent temperature of a grey body in a box at ``t_box`` (inverse of compensate_array)."""
    out = np.array(t_true, dtype=np.float64, copy=True)
    grey = eps != 1.0
    if np.any(grey):
        e = eps[grey]
        out[grey] = np.sqrt(np.sqrt(e * _pow4(out[grey]) + (1.0 - e) * _pow4(t_box)))
    return out


def compensate_emissivity(
    tmap: TemperatureMap, layout: ComponentLayout, emissivity, t_box: float
) -> TemperatureMap:
    if tmap.shape != layout.shape:
        raise ValidationError(f"map shape {tmap.shape} differs from layout {layout.shape}")
    eps = cell_emissivity(layout, emissivity)
    return TemperatureMap(compensate_array(tmap.values, eps, t_box))


# --------------------------------------------------------------------------
# Inpainting
# --------------------------------------------------------------------------


def unknown_region(layout: ComponentLayout, materials: Iterable[int]) -> np.ndarray:
    """Cells of the given (1-based) materials plus their 4-neighbours."""
    mats = np.array(sorted({int(m) - 1 for m in materials}), dtype=np.intp)
    core = np.isin(layout.material_map, mats)
    grown = core.copy()
    grown[1:, :] |= core[:-1, :]
    grown[:-1, :] |= core[1:, :]
    grown[:, 1:] |= core[:, :-1]
    grown[:, :-1] |= core[:, 1:]
    return grown


def _second_diff(n: int) -> sp.csr_matrix:
    return sp.diags([1.0, -2.0, 1.0], [0, 1, 2], shape=(n - 2, n), format="csr")


def _first_diff(n: int) -> sp.csr_matrix:
    return sp.diags([-1.0, 1.0], [0, 1], shape=(n - 1, n), format="csr")


@lru_cache(maxsize=8)
def _smoothness_operator(h: int, w: int) -> sp.csr_matrix:
    # discrete thin-plate energy u_xx^2 + 2 u_xy^2 + u_yy^2; its null space is the affine fields
    dxx = sp.kron(sp.identity(h), _second_diff(w))
    dyy = sp.kron(_second_diff(h), sp.identity(w))
    dxy = sp.kron(_first_diff(h), _first_diff(w))
    a = dxx.T @ dxx + dyy.T @ dyy + 2.0 * (dxy.T @ dxy)
    return sp.csr_matrix(a)


@lru_cache(maxsize=32)
def _inpaint_factor(h: int, w: int, mask_bytes: bytes):
    unknown = np.frombuffer(mask_bytes, dtype=bool).reshape(h, w)
    u = np.flatnonzero(unknown.ravel())
    k = np.flatnonzero(~unknown.ravel())
    a = _smoothness_operator(h, w)
    a_uu = sp.csc_matrix(a[u][:, u])
    a_uk = sp.csr_matrix(a[u][:, k])
    try:
        lu = spla.splu(a_uu)
    except RuntimeError as exc:
        raise InpaintError(f"inpainting system is singular ({exc})") from None
    return lu, a_uk, u, k


def inpaint_array(values: np.ndarray, unknown: np.ndarray) -> np.ndarray:
    """Fill ``unknown`` cells with the minimum thin-plate-energy surface through the known cells.

    Known cells are returned bit-exactly and only known values enter the
    solve, so the operation is idempotent.
    """
    values = np.asarray(values, dtype=np.float64)
    unknown = np.asarray(unknown, dtype=bool)
    if values.shape != unknown.shape:
        raise ValidationError("mask and map shapes differ")
    if not unknown.any():
        return values.copy()
    h, w = values.shape
    border = np.ones((h, w), dtype=bool)
    border[1:-1, 1:-1] = False
    if not np.any(border & ~unknown):
        raise InpaintError("unknown region covers the whole border ring; no known frame exists")
    known_pts = np.argwhere(~unknown).astype(np.float64)
    if len(known_pts) < 3 or np.linalg.matrix_rank(known_pts - known_pts.mean(axis=0)) < 2:
        raise InpaintError("known cells are collinear; the fill is not determined")
    lu, a_uk, u, k = _inpaint_factor(h, w, np.ascontiguousarray(unknown).tobytes())
    flat = values.ravel()
    fill = lu.solve(-(a_uk @ flat[k]))
    if not np.all(np.isfinite(fill)):
        raise InpaintError("inpainting produced non-finite values")
    out = flat.copy()
    out[u] = fill
    return out.reshape(h, w)


def inpaint_low_emissivity(
    tmap: TemperatureMap,
    layout: ComponentLayout,
    low_emissivity_materials: Iterable[int] | None = None,
) -> TemperatureMap:
    """Replace wire cells and their 4-neighbours by a smooth fill from the surrounding cells.

    ``low_emissivity_materials`` are 1-based material classes; by default the
    materials of the layout's wire components.
    """
    if tmap.shape != layout.shape:
        raise ValidationError(f"map shape {tmap.shape} differs from layout {layout.shape}")
    mats = layout.wire_materials if low_emissivity_materials is None else set(low_emissivity_materials)
    if not mats:
        return tmap
    unknown = unknown_region(layout, mats)
    if not unknown.any():
        return tmap
    return TemperatureMap(inpaint_array(tmap.values, unknown))
