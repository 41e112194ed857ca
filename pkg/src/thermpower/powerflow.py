"""Pixel-wise temperature-to-power conversion.

Each interior cell balances conduction to its four neighbours, convection and
radiation to the ambient, and the unknown electrical power. All flows are
counted as power received by the cell; the electrical power is their negated
sum, so a cell that is hotter than its surroundings dissipates positive power.
"""

from __future__ import annotations

import os

import numpy as np

from .core import (
    ComponentLayout,
    ModelParams,
    PowerMap,
    TemperatureMap,
    ThermError,
    ValidationError,
    Variant,
)
from .preprocess import compensate_array, inpaint_low_emissivity

if os.environ.get("THERMPOWER_PURE"):
    from ._kernels_py import pixel_powers as _pixel_powers

    BACKEND = "numpy"
else:
    try:
        from ._kernels import pixel_powers as _pixel_powers

        BACKEND = "cython"
    except ImportError:
        from ._kernels_py import pixel_powers as _pixel_powers

        BACKEND = "numpy"


def conductance_fields(layout: ComponentLayout, params: ModelParams):
    """Per-cell conductances towards the top, bottom, left and right neighbour.

    Edges leaving the grid carry 0.
    """
    if layout.mu != params.mu:
        raise ValidationError(f"layout has mu={layout.mu}, params have mu={params.mu}")
    m = layout.material_map
    c = params.conductance
    ct = np.zeros(m.shape)
    cb = np.zeros(m.shape)
    cl = np.zeros(m.shape)
    cr = np.zeros(m.shape)
    ct[1:, :] = c[m[1:, :], m[:-1, :]]
    cb[:-1, :] = c[m[:-1, :], m[1:, :]]
    cl[:, 1:] = c[m[:, 1:], m[:, :-1]]
    cr[:, :-1] = c[m[:, :-1], m[:, 1:]]
    return ct, cb, cl, cr


def raw_pixel_powers(
    values: np.ndarray,
    material_map: np.ndarray,
    conductance: np.ndarray,
    emissivity: np.ndarray,
    h: float,
    r: float,
    t_amb: float,
    convective: bool = True,
    radiative: bool = True,
) -> np.ndarray:
    """Array-level kernel call on already-prepared temperatures; NaN border."""
    return _pixel_powers(
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(material_map, dtype=np.intp),
        np.ascontiguousarray(conductance, dtype=np.float64),
        np.ascontiguousarray(emissivity, dtype=np.float64),
        float(h),
        float(r),
        float(t_amb),
        bool(convective),
        bool(radiative),
    )


def effective_temperatures(
    tmap: TemperatureMap, layout: ComponentLayout, params: ModelParams, t_amb: float
) -> np.ndarray:
    """Temperatures entering the balance: emissivity-compensated for FULL, as given otherwise."""
    if params.variant is Variant.FULL:
        eps = params.emissivity[layout.material_map]
        return compensate_array(tmap.values, eps, t_amb)
    return np.asarray(tmap.values)


def estimate_pixel_powers(
    tmap: TemperatureMap,
    layout: ComponentLayout,
    params: ModelParams,
    t_amb: float,
    variant: Variant | str | None = None,
) -> PowerMap:
    """Electrical power per interior cell.

    The map must already be preprocessed for the variant (inpainted for
    INT/NORAD/NOFLUX); FULL compensates emissivity here with the box at
    ``t_amb``.
    """
    if not t_amb > 0.0:
        raise ValidationError("ambient temperature must be positive")
    if tmap.shape != layout.shape:
        raise ValidationError(f"map shape {tmap.shape} differs from layout {layout.shape}")
    p = params.pinned(variant)
    v = p.variant
    t = effective_temperatures(tmap, layout, p, t_amb)
    out = raw_pixel_powers(
        t, layout.material_map, p.conductance, p.emissivity, p.h, p.r, t_amb,
        convective=v.convective, radiative=v.radiative,
    )
    inner = out[1:-1, 1:-1]
    if not np.all(np.isfinite(inner)):
        cell = tuple(int(i) + 1 for i in np.argwhere(~np.isfinite(inner))[0])
        raise ThermError(f"non-finite power at cell {cell}")
    return PowerMap(out)


def prepare_map(
    tmap: TemperatureMap,
    layout: ComponentLayout,
    variant: Variant | str,
    low_emissivity_materials=None,
) -> TemperatureMap:
    """Variant-dependent preprocessing that does not depend on trained parameters."""
    if Variant.parse(variant).inpaints:
        return inpaint_low_emissivity(tmap, layout, low_emissivity_materials)
    return tmap
