"""Training of model parameters by box-constrained nonlinear least squares.

The objective sums, over every (configuration, voltage) instance, the squared
component errors plus the squared power estimated on each board and wire
cell (which should dissipate nothing).
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import (
    ComponentLayout,
    MeasurementInstance,
    ModelParams,
    TemperatureMap,
    ThermError,
    ValidationError,
    Variant,
    sort_instances,
    trained_parameter_count,
)
from .metrics import ErrorSummary, summarize
from .powerflow import prepare_map, raw_pixel_powers
from .preprocess import compensate_array, estimate_ambient

log = logging.getLogger(__name__)

TYPICAL = {"conductance": 1e-2, "h": 1e-3, "r": 1e-11, "emissivity": 1.0}
DEFAULT_BOUNDS = {
    "conductance": (0.0, np.inf),
    "h": (0.0, np.inf),
    "r": (0.0, np.inf),
    "emissivity": (0.01, 1.0),
}


class RankWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# Parameter packing
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParamLayout:
    """Order of the free parameters of a variant in the optimizer vector."""

    mu: int
    variant: Variant

    @property
    def n_conductance(self) -> int:
        return self.mu * (self.mu + 1) // 2

    @property
    def names(self) -> list[str]:
        out = [f"C{i + 1}{j + 1}" for i in range(self.mu) for j in range(i, self.mu)]
        if self.variant is Variant.FULL:
            out += [f"eps{i + 1}" for i in range(self.mu)]
        if self.variant.convective:
            out.append("h")
        if self.variant.radiative:
            out.append("r")
        return out

    @property
    def kinds(self) -> list[str]:
        out = ["conductance"] * self.n_conductance
        if self.variant is Variant.FULL:
            out += ["emissivity"] * self.mu
        if self.variant.convective:
            out.append("h")
        if self.variant.radiative:
            out.append("r")
        return out

    @property
    def size(self) -> int:
        return len(self.kinds)

    def pack(self, p: ModelParams) -> np.ndarray:
        iu = np.triu_indices(self.mu)
        parts = [p.conductance[iu]]
        if self.variant is Variant.FULL:
            parts.append(p.emissivity)
        if self.variant.convective:
            parts.append([p.h])
        if self.variant.radiative:
            parts.append([p.r])
        return np.concatenate([np.asarray(x, dtype=float) for x in parts])

    def unpack(self, x: np.ndarray) -> ModelParams:
        mu, n = self.mu, self.n_conductance
        c = np.zeros((mu, mu))
        iu = np.triu_indices(mu)
        c[iu] = x[:n]
        c = c + np.triu(c, 1).T
        pos = n
        eps = np.ones(mu)
        if self.variant is Variant.FULL:
            eps = np.array(x[pos : pos + mu])
            pos += mu
        h = r = 0.0
        if self.variant.convective:
            h = float(x[pos])
            pos += 1
        if self.variant.radiative:
            r = float(x[pos])
        return ModelParams(c, eps, h, r, self.variant)

    def bounds(self, overrides: Mapping[str, tuple[float, float]] | None = None):
        b = dict(DEFAULT_BOUNDS)
        b.update(overrides or {})
        lo = np.array([b[k][0] for k in self.kinds], dtype=float)
        hi = np.array([b[k][1] for k in self.kinds], dtype=float)
        return lo, hi

    def typical(self) -> np.ndarray:
        return np.array([TYPICAL[k] for k in self.kinds])


def initial_params(layout: ComponentLayout, variant: Variant | str = Variant.INT) -> ModelParams:
    """Order-of-magnitude starting point: wires at emissivity 0.2, everything else 0.95."""
    mu = layout.mu
    eps = np.full(mu, 0.95)
    for m in layout.wire_materials:
        eps[m - 1] = 0.2
    return ModelParams(np.full((mu, mu), 1e-2), eps, 1e-3, 1e-11, Variant.parse(variant)).pinned()


# --------------------------------------------------------------------------
# Prepared data and residuals
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PreparedInstance:
    source: MeasurementInstance
    temps: np.ndarray  # mean reading after variant preprocessing
    t_amb: float
    active: tuple[int, ...]
    truth: np.ndarray


def _instance_ambient(inst: MeasurementInstance, tmap: TemperatureMap, ambient: str, bins: int) -> float:
    if ambient == "known":
        if inst.t_amb is None:
            raise ValidationError(f"instance {inst.key} has no recorded ambient temperature")
        return float(inst.t_amb)
    if ambient != "estimate":
        raise ValidationError(f"ambient mode must be 'estimate' or 'known', got {ambient!r}")
    return estimate_ambient(tmap, bins).t_amb


def prepare_map_stack(
    maps: Sequence[TemperatureMap],
    inst: MeasurementInstance,
    variant: Variant,
    ambient: str = "estimate",
    bins: int = 100,
    low_emissivity_materials=None,
):
    out = []
    for m in maps:
        t_amb = _instance_ambient(inst, m, ambient, bins)
        out.append((prepare_map(m, inst.layout, variant, low_emissivity_materials).values, t_amb))
    return out


def prepare_instances(
    instances: Sequence[MeasurementInstance],
    variant: Variant | str,
    ambient: str = "estimate",
    bins: int = 100,
    low_emissivity_materials=None,
) -> list[PreparedInstance]:
    """Average readings, estimate the ambient and apply the variant's preprocessing."""
    variant = Variant.parse(variant)
    out = []
    for inst in instances:
        mean = inst.mean_map()
        [(temps, t_amb)] = prepare_map_stack(
            [mean], inst, variant, ambient, bins, low_emissivity_materials
        )
        active = tuple(inst.layout.active_ids)
        out.append(
            PreparedInstance(
                inst, temps, t_amb, active, np.array([inst.truth[k] for k in active], dtype=float)
            )
        )
    return out


def component_sums(
    temps: np.ndarray, layout: ComponentLayout, params: ModelParams, t_amb: float
) -> tuple[np.ndarray, np.ndarray]:
    """(per-id power sums, full power map) for prepared temperatures."""
    v = params.variant
    if v is Variant.FULL:
        temps = compensate_array(temps, params.emissivity[layout.material_map], t_amb)
    pmap = raw_pixel_powers(
        temps, layout.material_map, params.conductance, params.emissivity, params.h, params.r,
        t_amb, convective=v.convective, radiative=v.radiative,
    )
    ids = layout.ids[1:-1, 1:-1].ravel()
    sums = np.bincount(ids, weights=pmap[1:-1, 1:-1].ravel(), minlength=max(layout.component_ids) + 1)
    return sums, pmap


def prepared_residuals(
    params: ModelParams,
    prepared: Sequence[PreparedInstance],
    regularizer_weight: float = 1.0,
    pixelwise: bool = True,
) -> np.ndarray:
    parts = []
    for pi in prepared:
        lay = pi.source.layout
        sums, pmap = component_sums(pi.temps, lay, params, pi.t_amb)
        parts.append(sums[list(pi.active)] - pi.truth)
        wires = lay.wire_ids
        if pixelwise:
            inner = pmap[1:-1, 1:-1]
            ids = lay.ids[1:-1, 1:-1]
            parts.append(regularizer_weight * inner[ids == 0])
            parts.append(regularizer_weight * inner[np.isin(ids, wires)])
        else:
            parts.append([regularizer_weight * sums[0], regularizer_weight * math.fsum(sums[wires])])
    return np.concatenate([np.asarray(p, dtype=float) for p in parts])


def residuals(
    params: ModelParams,
    dataset: Sequence[MeasurementInstance],
    variant: Variant | str | None = None,
    ambient: str = "estimate",
    regularizer_weight: float = 1.0,
    pixelwise: bool = True,
) -> np.ndarray:
    """Residual vector whose squared sum is the training objective.

    Per instance: one entry per active component (estimate minus truth),
    then one entry per board cell and per wire cell, so inactive regions are
    pushed towards zero power cell by cell. With ``pixelwise=False`` those
    cell entries collapse to the board total and the wire total.
    """
    p = params.pinned(variant)
    prepared = prepare_instances(dataset, p.variant, ambient)
    return prepared_residuals(p, prepared, regularizer_weight, pixelwise)


# --------------------------------------------------------------------------
# Optimizer
# --------------------------------------------------------------------------


@dataclass
class LMResult:
    x: np.ndarray
    fun: np.ndarray
    cost: float  # sum of squares
    iterations: int
    converged: bool
    message: str
    trace: list[float] = field(default_factory=list)
    jac: np.ndarray | None = None


def _fd_jacobian(f, z, r0, lo, hi, rel_step):
    n = z.size
    jac = np.empty((r0.size, n))
    for j in range(n):
        step = rel_step * max(abs(z[j]), 1.0)
        for sgn in (1.0, -1.0):
            zj = z[j] + sgn * step
            if zj > hi[j] or zj < lo[j]:
                continue
            zt = z.copy()
            zt[j] = zj
            rt = f(zt)
            if rt is not None:
                jac[:, j] = (rt - r0) / (sgn * step)
                break
        else:
            jac[:, j] = 0.0
    return jac


def projected_lm(
    fun: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    scale: np.ndarray | None = None,
    max_iter: int = 500,
    ftol: float = 1e-10,
    gtol: float = 1e-10,
    rel_step: float = 1e-6,
    lam0: float = 1e-3,
) -> LMResult:
    """Levenberg-Marquardt with Marquardt diagonal damping and projection onto box bounds.

    ``fun`` may raise ThermError for infeasible points; such trial steps are
    rejected. Variables sitting on a bound with the gradient pushing outward
    are frozen for the step.
    """
    scale = np.ones_like(x0, dtype=float) if scale is None else np.asarray(scale, dtype=float)
    lo, hi = lower / scale, upper / scale
    z = np.clip(np.asarray(x0, dtype=float) / scale, lo, hi)

    def f(zz):
        try:
            out = np.asarray(fun(zz * scale), dtype=float)
        except ThermError:
            return None
        return out if np.all(np.isfinite(out)) else None

    r = f(z)
    if r is None:
        raise ValidationError("objective is not defined at the initial point")
    cost = float(r @ r)
    trace = [cost]
    lam, nu = lam0, 2.0
    jac = _fd_jacobian(f, z, r, lo, hi, rel_step)
    converged, message, it = False, "iteration budget exhausted", 0
    while it < max_iter:
        g = jac.T @ r
        pg = z - np.clip(z - g, lo, hi)
        if cost == 0.0 or np.max(np.abs(pg)) < gtol:
            converged, message = True, "projected gradient below tolerance"
            break
        a = jac.T @ jac
        d = np.maximum(np.diag(a), 1e-10 * max(1e-300, float(np.max(np.diag(a)))))
        free = ~(((z <= lo) & (g > 0)) | ((z >= hi) & (g < 0)))
        accepted = False
        while lam < 1e20:
            step = np.zeros_like(z)
            af = a[np.ix_(free, free)] + lam * np.diag(d[free])
            try:
                step[free] = np.linalg.solve(af, -g[free])
            except np.linalg.LinAlgError:
                step[free] = np.linalg.lstsq(af, -g[free], rcond=None)[0]
            zt = np.clip(z + step, lo, hi)
            s = zt - z
            pred = -(g @ s + 0.5 * s @ a @ s)
            rt = f(zt)
            if rt is not None and pred > 0.0:
                ct = float(rt @ rt)
                rho = (cost - ct) / pred
                if ct < cost and rho > 1e-4:
                    accepted = True
                    break
            lam *= nu
            nu *= 2.0
        it += 1
        if not accepted:
            converged, message = True, "no further decrease possible"
            break
        decrease = cost - ct
        z, r, cost = zt, rt, ct
        trace.append(cost)
        lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
        nu = 2.0
        if decrease <= ftol * trace[-2]:
            converged, message = True, "relative decrease below tolerance"
            break
        jac = _fd_jacobian(f, z, r, lo, hi, rel_step)
    return LMResult(z * scale, r, cost, it, converged, message, trace, jac / scale)


# --------------------------------------------------------------------------
# Fitting and cross-validation
# --------------------------------------------------------------------------


@dataclass
class FitProblem:
    dataset: Sequence[MeasurementInstance]
    variant: Variant | str = Variant.INT
    initial: ModelParams | None = None
    bounds: Mapping[str, tuple[float, float]] | None = None
    folds: int = 10
    seed: int = 0
    ambient: str = "estimate"  # or "known" to use the ambient recorded with each instance
    regularizer_weight: float = 1.0
    pixelwise_regularizer: bool = True
    max_iter: int = 500

    def __post_init__(self):
        self.variant = Variant.parse(self.variant)
        self.dataset = sort_instances(self.dataset)
        if not self.dataset:
            raise ValidationError("empty dataset")
        mus = {inst.layout.mu for inst in self.dataset}
        if len(mus) != 1:
            raise ValidationError("all layouts must share the material count")

    @property
    def mu(self) -> int:
        return self.dataset[0].layout.mu

    @property
    def n_free(self) -> int:
        return trained_parameter_count(self.variant, self.mu)


@dataclass
class Prediction:
    config: str
    voltage: float
    voltage_index: int
    component: int
    truth: float
    estimate: float


@dataclass
class FoldResult:
    index: int
    train: list[tuple[str, int]]
    validate: list[tuple[str, int]]
    params: ModelParams
    objective: float
    summary: ErrorSummary
    predictions: list[Prediction]


@dataclass
class FitResult:
    params: ModelParams
    objective: float
    residuals: np.ndarray
    iterations: int
    converged: bool
    message: str = ""
    trace: list[float] = field(default_factory=list)
    folds: list[FoldResult] = field(default_factory=list)
    pooled: ErrorSummary | None = None


def _check_count(n_instances: int, variant: Variant, mu: int, what: str = "dataset") -> None:
    need = trained_parameter_count(variant, mu)
    if n_instances < need:
        raise ValidationError(
            f"{what} has {n_instances} instances but variant {variant.value} trains "
            f"{need} parameters; at least {need} are needed"
        )


def _fit_prepared(problem: FitProblem, prepared: Sequence[PreparedInstance]) -> FitResult:
    variant = problem.variant
    _check_count(len(prepared), variant, problem.mu)
    lay = ParamLayout(problem.mu, variant)
    init = problem.initial or initial_params(prepared[0].source.layout, variant)
    x0 = lay.pack(init.pinned(variant))
    lo, hi = lay.bounds(problem.bounds)
    x0 = np.clip(x0, lo, hi)
    scale = np.maximum(np.abs(x0), lay.typical())

    def fun(x):
        return prepared_residuals(
            lay.unpack(x), prepared, problem.regularizer_weight, problem.pixelwise_regularizer
        )

    res = projected_lm(fun, x0, lo, hi, scale=scale, max_iter=problem.max_iter)
    if res.jac is not None and res.jac.size:
        sv = np.linalg.svd(res.jac * scale, compute_uv=False)
        rank = int(np.sum(sv > sv[0] * 1e-10)) if sv.size and sv[0] > 0 else 0
        if rank < lay.size:
            warnings.warn(
                f"Jacobian rank {rank} < {lay.size} free parameters; fit is not unique",
                RankWarning,
                stacklevel=3,
            )
    log.debug("fit %s: cost %.6g after %d iterations (%s)", variant.value, res.cost, res.iterations, res.message)
    return FitResult(
        params=lay.unpack(res.x),
        objective=res.cost,
        residuals=res.fun,
        iterations=res.iterations,
        converged=res.converged,
        message=res.message,
        trace=res.trace,
    )


def fit_parameters(problem: FitProblem) -> FitResult:
    """Fit the free parameters of ``problem.variant`` on the whole dataset."""
    prepared = prepare_instances(problem.dataset, problem.variant, problem.ambient)
    return _fit_prepared(problem, prepared)


def predict_prepared(params: ModelParams, prepared: Sequence[PreparedInstance]) -> list[Prediction]:
    out = []
    for pi in prepared:
        sums, _ = component_sums(pi.temps, pi.source.layout, params, pi.t_amb)
        inst = pi.source
        for k, t in zip(pi.active, pi.truth):
            out.append(Prediction(inst.config, inst.voltage, inst.voltage_index, k, float(t), float(sums[k])))
    return out


def predict(
    params: ModelParams,
    instances: Sequence[MeasurementInstance],
    ambient: str = "estimate",
) -> list[Prediction]:
    """Component estimates from each instance's averaged reading."""
    prepared = prepare_instances(sort_instances(instances), params.variant, ambient)
    return predict_prepared(params, prepared)


def predict_readings(
    params: ModelParams,
    instances: Sequence[MeasurementInstance],
    ambient: str = "estimate",
) -> list[tuple[Prediction, np.ndarray]]:
    """Per-component estimates for every individual reading (for spread analysis)."""
    out = []
    for inst in sort_instances(instances):
        stack = prepare_map_stack(inst.maps, inst, params.variant, ambient)
        per = [component_sums(t, inst.layout, params, ta)[0] for t, ta in stack]
        for k in inst.layout.active_ids:
            vals = np.array([s[k] for s in per])
            pred = Prediction(inst.config, inst.voltage, inst.voltage_index, k, inst.truth[k], float(vals.mean()))
            out.append((pred, vals))
    return out


def summarize_predictions(preds: Sequence[Prediction], p_min: float = 0.0) -> ErrorSummary:
    return summarize(
        [p.estimate for p in preds], [p.truth for p in preds], [p.config for p in preds], p_min
    )


def fold_assignment(keys: Sequence[tuple[str, int]], folds: int, seed: int) -> list[list[int]]:
    """Partition instance indices into folds; depends only on the set of keys and the seed."""
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    perm = np.random.default_rng(seed).permutation(len(keys))
    shuffled = [order[i] for i in perm]
    return [sorted(chunk.tolist(), key=lambda i: keys[i]) for chunk in np.array_split(np.array(shuffled, dtype=int), folds)]


@dataclass
class CrossValResult:
    folds: list[FoldResult]
    pooled: ErrorSummary
    predictions: list[Prediction]


def cross_validate(problem: FitProblem) -> CrossValResult:
    """k-fold cross-validation over instances; readings of one instance never split."""
    n = len(problem.dataset)
    if problem.folds < 2 or problem.folds > n:
        raise ValidationError(f"fold count must be in 2..{n}, got {problem.folds}")
    prepared = prepare_instances(problem.dataset, problem.variant, problem.ambient)
    keys = [inst.key for inst in problem.dataset]
    if len(set(keys)) != len(keys):
        raise ValidationError("instance keys (config, voltage index) must be unique")
    assignment = fold_assignment(keys, problem.folds, problem.seed)
    results = []
    for fi, val_idx in enumerate(assignment):
        val_set = set(val_idx)
        train = [prepared[i] for i in range(n) if i not in val_set]
        _check_count(len(train), problem.variant, problem.mu, what=f"training split of fold {fi}")
        fit = _fit_prepared(problem, train)
        preds = predict_prepared(fit.params, [prepared[i] for i in val_idx])
        results.append(
            FoldResult(
                index=fi,
                train=[prepared[i].source.key for i in range(n) if i not in val_set],
                validate=[prepared[i].source.key for i in val_idx],
                params=fit.params,
                objective=fit.objective,
                summary=summarize_predictions(preds),
                predictions=preds,
            )
        )
    pooled_preds = sorted(
        (p for f in results for p in f.predictions), key=lambda p: (p.config, p.voltage_index, p.component)
    )
    return CrossValResult(results, summarize_predictions(pooled_preds), pooled_preds)
