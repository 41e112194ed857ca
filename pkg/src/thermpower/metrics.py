"""Component-wise aggregation and estimation-error metrics.

Errors are averaged first within a configuration (over voltages and
components), then over configurations, so every configuration weighs the
same regardless of its resistor count.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import ComponentLayout, PowerMap, ThermError, ValidationError


class NoSamplesError(ThermError):
    """No samples survive the minimum-power filter."""


def aggregate(power_map: PowerMap, layout: ComponentLayout, cid: int) -> float:
    """Sum of interior-cell power over the cells of component ``cid``."""
    layout.component(cid)
    mask = layout.ids[1:-1, 1:-1] == cid
    return math.fsum(power_map.interior[mask])


def aggregate_all(power_map: PowerMap | np.ndarray, layout: ComponentLayout) -> dict[int, float]:
    """Per-component sums over interior cells for every manifest id."""
    vals = power_map.values if isinstance(power_map, PowerMap) else np.asarray(power_map)
    ids = layout.ids[1:-1, 1:-1].ravel()
    sums = np.bincount(ids, weights=vals[1:-1, 1:-1].ravel(), minlength=max(layout.component_ids) + 1)
    return {c: float(sums[c]) for c in layout.component_ids}


@dataclass(frozen=True)
class ComponentPowerReport:
    powers: Mapping[int, float]  # every manifest id, W
    board: float
    wire: float
    config: str = ""
    voltage: float | None = None


def component_report(
    power_map: PowerMap, layout: ComponentLayout, config: str = "", voltage: float | None = None
) -> ComponentPowerReport:
    sums = aggregate_all(power_map, layout)
    return ComponentPowerReport(
        powers=sums,
        board=sums[0],
        wire=math.fsum(sums[k] for k in layout.wire_ids),
        config=config,
        voltage=voltage,
    )


# --------------------------------------------------------------------------
# Error metrics
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorSummary:
    e_std: float | None  # W; None when no sample survives the filter
    e_rel: float | None  # fraction
    n: int
    p_min: float = 0.0

    @property
    def empty(self) -> bool:
        return self.n == 0


def _grouped(estimates, truths, configs, p_min: float):
    est = np.asarray(estimates, dtype=np.float64).ravel()
    tru = np.asarray(truths, dtype=np.float64).ravel()
    if est.shape != tru.shape:
        raise ValidationError("estimates and truths differ in length")
    if configs is None:
        cfg = [""] * len(est)
    else:
        cfg = list(configs)
        if len(cfg) != len(est):
            raise ValidationError("configs and estimates differ in length")
    groups: dict = defaultdict(list)
    for e, t, c in zip(est, tru, cfg):
        if t >= p_min:
            groups[c].append((e, t))
    return [groups[c] for c in sorted(groups, key=str)]


def error_std(estimates, truths, configs=None, p_min: float = 0.0) -> float:
    """Root of the configuration-averaged mean squared error (W)."""
    groups = _grouped(estimates, truths, configs, p_min)
    if not groups:
        raise NoSamplesError(f"no samples with true power >= {p_min!r} W")
    per_cfg = [math.fsum((e - t) ** 2 for e, t in g) / len(g) for g in groups]
    return math.sqrt(math.fsum(per_cfg) / len(per_cfg))


def error_rel(estimates, truths, configs=None, p_min: float = 0.0) -> float:
    """Configuration-averaged mean of |estimate - truth| / truth."""
    groups = _grouped(estimates, truths, configs, p_min)
    if not groups:
        raise NoSamplesError(f"no samples with true power >= {p_min!r} W")
    per_cfg = []
    for g in groups:
        if any(t <= 0.0 for _, t in g):
            raise ValidationError("relative error needs strictly positive true powers")
        per_cfg.append(math.fsum(abs((e - t) / t) for e, t in g) / len(g))
    return math.fsum(per_cfg) / len(per_cfg)


def summarize(estimates, truths, configs=None, p_min: float = 0.0) -> ErrorSummary:
    groups = _grouped(estimates, truths, configs, p_min)
    n = sum(len(g) for g in groups)
    if n == 0:
        return ErrorSummary(None, None, 0, p_min)
    return ErrorSummary(
        error_std(estimates, truths, configs, p_min),
        error_rel(estimates, truths, configs, p_min),
        n,
        p_min,
    )


def min_power_sweep(estimates, truths, p_min_grid: Sequence[float], configs=None) -> list[ErrorSummary]:
    """Error summaries restricted to samples whose true power is at least each grid value."""
    grid = [float(x) for x in p_min_grid]
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValidationError("P_min grid must be sorted ascending")
    return [summarize(estimates, truths, configs, p) for p in grid]


# --------------------------------------------------------------------------
# Spread across repeated readings
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpreadSummary:
    stds: np.ndarray = field(repr=False)
    mean: float
    max: float


def spread(readings: Sequence[Sequence[float]]) -> SpreadSummary:
    """Sample standard deviation of each sample's repeated estimates, plus mean and max."""
    stds = []
    for i, r in enumerate(readings):
        r = np.asarray(r, dtype=np.float64)
        if r.size < 2:
            raise ValidationError(f"sample {i} has {r.size} reading(s); spread needs >= 2")
        stds.append(float(np.std(r, ddof=1)))
    if not stds:
        raise ValidationError("spread needs at least one sample")
    stds = np.array(stds)
    return SpreadSummary(stds, math.fsum(stds) / len(stds), float(stds.max()))


def sample_rms_error(readings: Sequence[float], truth: float) -> float:
    """RMS deviation of repeated estimates from the true power."""
    r = np.asarray(readings, dtype=np.float64)
    return math.sqrt(math.fsum((r - truth) ** 2) / r.size)
