"""Forward steady-state heat solver and synthetic camera observations.

Serves as the ground truth for validating the estimator: the solver finds the
temperatures for which the estimator's per-cell balance returns exactly the
injected power.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import (
    ComponentLayout,
    MeasurementInstance,
    ModelParams,
    TemperatureMap,
    ThermError,
    ValidationError,
)
from .powerflow import conductance_fields, raw_pixel_powers
from .preprocess import observe_array


class SolverError(ThermError):
    def __init__(self, msg: str, max_residual: float = float("nan")):
        super().__init__(msg)
        self.max_residual = max_residual


def ohmic_power(voltage: float, resistance: float, series_resistance: float = 0.0) -> float:
    """Power dissipated in ``resistance`` at supply ``voltage``.

    With a series (lead) resistance the supply divides; at the default of
    zero this is V**2 / R.
    """
    if not resistance > 0.0:
        raise ValidationError(f"resistance must be positive, got {resistance!r}")
    if series_resistance < 0.0:
        raise ValidationError("series resistance must be >= 0")
    if series_resistance == 0.0:
        return voltage * voltage / resistance
    i = voltage / (resistance + series_resistance)
    return i * i * resistance


@dataclass(frozen=True, eq=False)
class Scenario:
    layout: ComponentLayout
    params: ModelParams  # generating values; emissivity is the true surface emissivity
    t_amb: float
    injections: Mapping[int, float] = field(default_factory=dict)  # W per component id
    sigma: float = 0.1  # camera noise, K
    readings: int = 1
    seed: int = 0

    def __post_init__(self):
        if not self.t_amb > 0.0:
            raise ValidationError("ambient temperature must be positive")
        if self.sigma < 0.0:
            raise ValidationError("noise sigma must be >= 0")
        if self.readings < 1:
            raise ValidationError("readings must be >= 1")
        inj = {int(k): float(v) for k, v in dict(self.injections).items()}
        for k, v in inj.items():
            self.layout.component(k)
            if v < 0.0:
                raise ValidationError(f"injection for component {k} is negative")
        if self.layout.mu != self.params.mu:
            raise ValidationError("layout and params disagree on the material count")
        object.__setattr__(self, "injections", inj)

    def with_injections(self, injections: Mapping[int, float]) -> "Scenario":
        return Scenario(
            self.layout, self.params, self.t_amb, injections, self.sigma, self.readings, self.seed
        )


def injection_field(layout: ComponentLayout, injections: Mapping[int, float]) -> np.ndarray:
    """Spread each component's power uniformly over its cells."""
    p = np.zeros(layout.shape)
    border = np.ones(layout.shape, dtype=bool)
    border[1:-1, 1:-1] = False
    for k, watts in injections.items():
        mask = layout.ids == k
        n = int(mask.sum())
        if watts == 0.0:
            continue
        if n == 0:
            raise ValidationError(f"component {k} has no cells")
        if np.any(mask & border):
            raise ValidationError(f"component {k} touches the fixed border ring; cannot inject")
        p[mask] = watts / n
    return p


def _conduction_operator(layout: ComponentLayout, params: ModelParams):
    """Sparse conduction matrix on interior cells and the border coupling vector."""
    hh, ww = layout.shape
    ni, nj = hh - 2, ww - 2
    idx = np.arange(ni * nj).reshape(ni, nj)
    ct, cb, cl, cr = conductance_fields(layout, params)
    diag = np.zeros((ni, nj))
    coupling = np.zeros((ni, nj))
    rows, cols, vals = [], [], []
    for cfield, di, dj in ((ct, -1, 0), (cb, 1, 0), (cl, 0, -1), (cr, 0, 1)):
        c = cfield[1:-1, 1:-1]
        diag += c
        ii, jj = np.meshgrid(np.arange(ni), np.arange(nj), indexing="ij")
        ti, tj = ii + di, jj + dj
        inside = (ti >= 0) & (ti < ni) & (tj >= 0) & (tj < nj)
        rows.append(idx[inside])
        cols.append(idx[ti[inside], tj[inside]])
        vals.append(-c[inside])
        coupling[~inside] += c[~inside]
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    lap = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ni * nj,) * 2
    )
    return lap, coupling.ravel()


def steady_state_residual(temps: np.ndarray, scenario: Scenario) -> np.ndarray:
    """Injected minus balance-implied power on interior cells (W)."""
    lay, p = scenario.layout, scenario.params
    est = raw_pixel_powers(
        temps, lay.material_map, p.conductance, p.emissivity, p.h, p.r, scenario.t_amb
    )
    return injection_field(lay, scenario.injections)[1:-1, 1:-1] - est[1:-1, 1:-1]


def solve_steady_state(
    scenario: Scenario, tol: float = 1e-10, max_iter: int = 100
) -> TemperatureMap:
    """Steady-state surface temperatures with the border ring held at ambient.

    The radiation-free system is solved directly; radiation is then handled by
    Newton iteration on the cell balance until the largest residual is below
    ``tol`` watts.
    """
    lay, p, t_amb = scenario.layout, scenario.params, scenario.t_amb
    hh, ww = lay.shape
    inj = injection_field(lay, scenario.injections)[1:-1, 1:-1].ravel()
    if not np.any(inj):
        return TemperatureMap(np.full(lay.shape, t_amb))
    lap, coupling = _conduction_operator(lay, p)
    eps = p.emissivity[lay.material_map[1:-1, 1:-1]].ravel()
    lin = lap + sp.diags(np.full(lap.shape[0], p.h), format="csc")
    try:
        lin_lu = spla.splu(lin)
    except RuntimeError:
        raise SolverError("steady state undefined: injected heat has no path to a sink") from None

    temps = np.full(lay.shape, t_amb)
    x = lin_lu.solve(inj + p.h * t_amb + coupling * t_amb)
    if not np.all(np.isfinite(x)):
        raise SolverError("linear solve produced non-finite temperatures")
    temps[1:-1, 1:-1] = x.reshape(hh - 2, ww - 2)

    radiative = p.r > 0.0
    worst = np.inf
    for _ in range(max_iter + 1):
        res = steady_state_residual(temps, scenario).ravel()
        worst = float(np.max(np.abs(res)))
        if worst < tol:
            return TemperatureMap(temps)
        x = temps[1:-1, 1:-1].ravel()
        if radiative:
            jac = lin + sp.diags(4.0 * p.r * eps * x * x * x, format="csc")
            dx = spla.spsolve(jac, res)
        else:
            dx = lin_lu.solve(res)
        if not np.all(np.isfinite(dx)):
            break
        temps[1:-1, 1:-1] = (x + dx).reshape(hh - 2, ww - 2)
    raise SolverError(
        f"steady-state solve did not converge: max residual {worst:.3e} W", max_residual=worst
    )


def synthesize_observation(
    true_t: TemperatureMap,
    layout: ComponentLayout,
    emissivity,
    t_box: float,
    sigma: float = 0.0,
    seed=None,
) -> TemperatureMap:
    """What the camera reports: reflected box radiation mixed in by emissivity, plus Gaussian noise."""
    if sigma < 0.0:
        raise ValidationError("noise sigma must be >= 0")
    eps = np.asarray(emissivity, dtype=np.float64)[layout.material_map]
    obs = observe_array(true_t.values, eps, t_box)
    if sigma > 0.0:
        rng = np.random.default_rng(seed)
        obs = obs + rng.normal(0.0, sigma, size=obs.shape)
    return TemperatureMap(obs)


def generate_dataset(
    scenarios: Sequence[Scenario],
    voltages: Sequence[float],
    resistances: Sequence[Mapping[int, float]],
    labels: Sequence[str] | None = None,
    series_resistance: float = 0.0,
) -> list[MeasurementInstance]:
    """One instance per (configuration, voltage), each with ``scenario.readings`` noisy maps.

    Noise streams are keyed by (seed, instance index, reading index).
    """
    if len(resistances) != len(scenarios):
        raise ValidationError("need one resistance table per scenario")
    labels = list(labels) if labels is not None else [chr(ord("A") + j) for j in range(len(scenarios))]
    out = []
    n_v = len(voltages)
    for j, (sc, res) in enumerate(zip(scenarios, resistances)):
        missing = sorted(set(sc.layout.active_ids) - {int(k) for k in res})
        if missing:
            raise ValidationError(f"configuration {labels[j]} lacks resistances for {missing}")
        for i, volt in enumerate(voltages):
            truth = {int(k): ohmic_power(volt, ohm, series_resistance) for k, ohm in res.items()}
            scen = sc.with_injections(truth)
            true_t = solve_steady_state(scen)
            inst_index = j * n_v + i
            maps = []
            for rd in range(sc.readings):
                seq = np.random.SeedSequence([sc.seed, inst_index, rd])
                maps.append(
                    synthesize_observation(
                        true_t, sc.layout, sc.params.emissivity, sc.t_amb, sc.sigma, seq
                    )
                )
            out.append(
                MeasurementInstance(
                    maps=tuple(maps),
                    layout=sc.layout,
                    voltage=float(volt),
                    truth=truth,
                    config=labels[j],
                    voltage_index=i,
                    t_amb=sc.t_amb,
                )
            )
    return out
