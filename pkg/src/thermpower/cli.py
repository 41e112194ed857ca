"""Command-line front end.

Subcommands::

    thermpower scenario --out DIR           write configurations A-D and a scenario file
    thermpower simulate SCENARIO --out DIR  generate maps and an instance manifest
    thermpower estimate MAP LAYOUT PARAMS   per-component powers of one map
    thermpower fit DATASET                  train a variant on a whole dataset
    thermpower crossval DATASET             k-fold cross-validation
    thermpower sweep PREDICTIONS            errors versus minimum true power

Exit codes: 0 success, 1 computation failure, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .core import (
    ParseError,
    PowerMap,
    ThermError,
    ValidationError,
    Variant,
    load_layout,
    load_params,
    load_temperature_map,
    save_power_map,
)
from .dataset import load_dataset, load_scenario, save_dataset, simulate_scenario, write_reference_scenario
from .fit import FitProblem, Prediction, cross_validate, fit_parameters
from .metrics import ErrorSummary, component_report, min_power_sweep
from .powerflow import estimate_pixel_powers, prepare_map
from .preprocess import estimate_ambient

log = logging.getLogger("thermpower")

REPORT_HEADER = ["config", "voltage_V", "component_id", "p_true_mW", "p_est_mW"]
SWEEP_HEADER = ["p_min_mW", "e_rel_percent", "e_std_mW"]


class UsageError(ThermError):
    """Bad input: exit code 2."""


# --------------------------------------------------------------------------
# Formatting helpers
# --------------------------------------------------------------------------


def _num(x: float | None) -> str:
    return "NA" if x is None or not math.isfinite(x) else repr(float(x))


def parse_grid(spec: str) -> list[float]:
    """``a:b:step`` in mW, end inclusive -> list of mW values."""
    try:
        a, b, step = (float(p) for p in spec.split(":"))
    except ValueError:
        raise UsageError(f"P_min grid must look like a:b:step, got {spec!r}") from None
    if not step > 0.0 or b < a:
        raise UsageError(f"P_min grid {spec!r} needs step > 0 and b >= a")
    n = int(math.floor((b - a) / step + 1e-9)) + 1
    return [a + k * step for k in range(n)]


def write_report(path: Path, preds: Sequence[Prediction]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for p in preds:
            w.writerow(
                [p.config, _num(p.voltage), p.component, _num(p.truth * 1e3), _num(p.estimate * 1e3)]
            )


def read_report(path: Path) -> list[Prediction]:
    out = []
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != REPORT_HEADER:
        raise ParseError(f"{path}: expected header {','.join(REPORT_HEADER)}")
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            cfg, volt, cid, tru, est = row
            if tru == "NA":
                continue  # no ground truth for this row
            out.append(
                Prediction(
                    cfg,
                    float("nan") if volt == "NA" else float(volt),
                    0,
                    int(cid),
                    float(tru) * 1e-3,
                    float(est) * 1e-3,
                )
            )
        except ValueError as exc:
            raise ParseError(f"{path}: line {i}: {exc}") from None
    if not out:
        raise ParseError(f"{path}: no rows with a true power")
    return out


def write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _summary_dict(s: ErrorSummary) -> dict:
    return {
        "n": s.n,
        "e_std_mW": None if s.e_std is None else s.e_std * 1e3,
        "e_rel_percent": None if s.e_rel is None else s.e_rel * 100.0,
    }


# --------------------------------------------------------------------------
# SVG output (no external renderer)
# --------------------------------------------------------------------------


def _color(t: float) -> str:
    """Blue-white-red ramp for t in [-1, 1]."""
    t = max(-1.0, min(1.0, t))
    if t >= 0:
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    else:
        r, g, b = int(255 * (1 + t)), int(255 * (1 + t)), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def powermap_svg(pmap: PowerMap, cell: int = 8) -> str:
    """Heatmap of per-cell power; border cells (undefined) are drawn grey."""
    v = pmap.values
    hh, ww = v.shape
    scale = float(np.nanmax(np.abs(pmap.interior))) or 1.0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{ww * cell}" height="{hh * cell + 20}">',
        f'<text x="2" y="{hh * cell + 15}" font-size="11">cell power, full scale +/- {scale * 1e3:.4g} mW</text>',
    ]
    for i in range(hh):
        for j in range(ww):
            x = v[i, j]
            fill = "#cccccc" if not math.isfinite(x) else _color(x / scale)
            parts.append(f'<rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" fill="{fill}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def sweep_svg(grid_mw: Sequence[float], rows: Sequence[ErrorSummary]) -> str:
    """Relative error on the left axis, standard error on the right; gaps where a filter is empty."""
    w, h, pad = 520, 320, 60
    x0, x1 = grid_mw[0], grid_mw[-1] if grid_mw[-1] > grid_mw[0] else grid_mw[0] + 1.0
    rel = [None if s.e_rel is None else s.e_rel * 100 for s in rows]
    std = [None if s.e_std is None else s.e_std * 1e3 for s in rows]
    rmax = max([v for v in rel if v is not None] or [1.0]) or 1.0
    smax = max([v for v in std if v is not None] or [1.0]) or 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (w - 2 * pad)

    def py(y, top):
        return h - pad - y / top * (h - 2 * pad)

    def segments(vals, top):
        segs, cur = [], []
        for x, y in zip(grid_mw, vals):
            if y is None:
                if cur:
                    segs.append(cur)
                cur = []
            else:
                cur.append(f"{px(x):.2f},{py(y, top):.2f}")
        if cur:
            segs.append(cur)
        return segs

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{pad}" y1="{h - pad}" x2="{w - pad}" y2="{h - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{h - pad}" stroke="#1f77b4"/>',
        f'<line x1="{w - pad}" y1="{pad}" x2="{w - pad}" y2="{h - pad}" stroke="#d62728"/>',
        f'<text x="{w / 2:.0f}" y="{h - 20}" text-anchor="middle" font-size="12">P_min [mW]</text>',
        f'<text x="10" y="{pad - 10}" font-size="12" fill="#1f77b4">e_rel [%] (max {rmax:.4g})</text>',
        f'<text x="{w - 10}" y="{pad - 10}" text-anchor="end" font-size="12" fill="#d62728">'
        f"e_std [mW] (max {smax:.4g})</text>",
        f'<text x="{pad}" y="{h - pad + 15}" text-anchor="middle" font-size="10">{x0:g}</text>',
        f'<text x="{w - pad}" y="{h - pad + 15}" text-anchor="middle" font-size="10">{grid_mw[-1]:g}</text>',
    ]
    for segs, top, color in ((segments(rel, rmax), rmax, "#1f77b4"), (segments(std, smax), smax, "#d62728")):
        for seg in segs:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(seg)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_scenario(args) -> int:
    path = write_reference_scenario(args.out, sigma=args.sigma, readings=args.readings, seed=args.seed)
    print(f"scenario written to {path}")
    return 0


def cmd_simulate(args) -> int:
    sf = load_scenario(args.scenario)
    if args.seed is not None:
        sf = dataclasses.replace(sf, seed=args.seed)
    if args.sigma is not None:
        sf = dataclasses.replace(sf, sigma=args.sigma)
    instances = simulate_scenario(sf)
    save_dataset(_out_dir(args), instances)
    n_maps = sum(len(i.maps) for i in instances)
    n_samples = sum(len(i.truth) for i in instances)
    print(f"{len(instances)} instances ({n_samples} component samples), {n_maps} maps written")
    return 0


def cmd_estimate(args) -> int:
    tmap = load_temperature_map(args.map)
    layout = load_layout(args.layout)
    params = load_params(args.params)
    variant = Variant.parse(args.variant) if args.variant else params.variant
    t_amb = args.t_amb if args.t_amb is not None else estimate_ambient(tmap).t_amb
    prepared = prepare_map(tmap, layout, variant)
    pmap = estimate_pixel_powers(prepared, layout, params, t_amb, variant)
    rep = component_report(pmap, layout)
    out = _out_dir(args)
    preds = [
        Prediction("", float("nan"), 0, k, float("nan"), rep.powers[k]) for k in layout.component_ids
    ]
    write_report(out / "report.csv", preds)
    if args.emit_powermap:
        save_power_map(out / "powermap.csv", pmap)
    if args.emit_svg:
        (out / "powermap.svg").write_text(powermap_svg(pmap))
    print(f"ambient {t_amb:.3f} K; {len(preds)} components written to {out / 'report.csv'}")
    return 0


def _problem(args, dataset) -> FitProblem:
    return FitProblem(
        dataset,
        variant=args.variant or "int",
        folds=args.folds,
        seed=args.seed,
        ambient=args.ambient,
    )


def cmd_fit(args) -> int:
    dataset = load_dataset(args.dataset)
    res = fit_parameters(_problem(args, dataset))
    out = _out_dir(args)
    write_json(
        out / "fit.json",
        {
            "variant": res.params.variant.value,
            "params": res.params.to_dict(),
            "objective": res.objective,
            "iterations": res.iterations,
            "converged": res.converged,
            "message": res.message,
            "objective_trace": res.trace,
            "instances": len(dataset),
        },
    )
    print(f"fit {res.params.variant.value}: objective {res.objective:.6g} after {res.iterations} iterations")
    return 0 if res.converged else 1


def cmd_crossval(args) -> int:
    dataset = load_dataset(args.dataset)
    cv = cross_validate(_problem(args, dataset))
    out = _out_dir(args)
    folds = []
    with open(out / "folds.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "train", "validate", "objective", "e_std_mW", "e_rel_percent"])
        for f in cv.folds:
            s = _summary_dict(f.summary)
            w.writerow([f.index, len(f.train), len(f.validate), _num(f.objective), _num(s["e_std_mW"]), _num(s["e_rel_percent"])])
            folds.append(
                {
                    "fold": f.index,
                    "train": len(f.train),
                    "validate": len(f.validate),
                    "validate_keys": [list(k) for k in f.validate],
                    "objective": f.objective,
                    "params": f.params.to_dict(),
                    **s,
                }
            )
            print(f"fold {f.index}: train={len(f.train)} validate={len(f.validate)}")
    write_report(out / "predictions.csv", cv.predictions)
    write_json(
        out / "crossval.json",
        {"variant": Variant.parse(args.variant or "int").value, "folds": folds, "pooled": _summary_dict(cv.pooled)},
    )
    p = cv.pooled
    print(f"pooled: e_std {p.e_std * 1e3:.4f} mW, e_rel {p.e_rel * 100:.3f} %")
    return 0


def cmd_sweep(args) -> int:
    preds = read_report(Path(args.predictions))
    grid = parse_grid(args.pmin_grid)
    rows = min_power_sweep(
        [p.estimate for p in preds],
        [p.truth for p in preds],
        [g * 1e-3 for g in grid],
        [p.config for p in preds],
    )
    out = _out_dir(args)
    with open(out / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for g, s in zip(grid, rows):
            w.writerow(
                [
                    _num(g),
                    "NA" if s.empty else _num(s.e_rel * 100.0),
                    "NA" if s.empty else _num(s.e_std * 1e3),
                ]
            )
    if args.emit_svg:
        (out / "sweep.svg").write_text(sweep_svg(grid, rows))
    empty = sum(s.empty for s in rows)
    print(f"{len(rows)} rows written to {out / 'sweep.csv'}" + (f" ({empty} empty)" if empty else ""))
    return 0


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="thermpower", description="Estimate component power from thermal maps.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    variants = [v.value for v in Variant]

    p = sub.add_parser("scenario", help="write the four resistor configurations and a scenario file")
    p.add_argument("--out", required=True)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--readings", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("simulate", help="generate temperature maps from a scenario file")
    p.add_argument("scenario")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--sigma", type=float, default=None, help="override the scenario noise (K)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="per-component power of one temperature map")
    p.add_argument("map")
    p.add_argument("layout")
    p.add_argument("params")
    p.add_argument("--variant", choices=variants, default=None)
    p.add_argument("--t-amb", type=float, default=None, help="ambient in K (default: estimated)")
    p.add_argument("--out", required=True)
    p.add_argument("--emit-powermap", action="store_true")
    p.add_argument("--emit-svg", action="store_true")
    p.set_defaults(func=cmd_estimate)

    for name, func, hlp in (
        ("fit", cmd_fit, "train a variant on a dataset"),
        ("crossval", cmd_crossval, "k-fold cross-validation"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("dataset", help="instance manifest (instances.json)")
        p.add_argument("--variant", choices=variants, default="int")
        p.add_argument("--folds", type=int, default=10)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--ambient", choices=["estimate", "known"], default="estimate")
        p.add_argument("--out", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="errors versus minimum true power")
    p.add_argument("predictions", help="report CSV with true and estimated powers")
    p.add_argument("--pmin-grid", default="0:500:50", help="a:b:step in mW, end inclusive")
    p.add_argument("--out", required=True)
    p.add_argument("--emit-svg", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with 2 on usage errors
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return 2
    except (UsageError, ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ThermError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
