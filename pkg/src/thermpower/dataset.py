"""On-disk datasets: scenario files in, instance manifests and map CSVs out.

A scenario JSON names one or more configurations (layout file plus either a
resistance table or fixed injections), a parameter block, supply voltages,
noise sigma, reading count and seed. The instance manifest lists every
generated instance with its truth and the relative paths of its map files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .boards import VOLTAGES, default_params, reference_configurations
from .core import (
    ComponentLayout,
    MeasurementInstance,
    ModelParams,
    ParseError,
    ValidationError,
    load_layout,
    load_temperature_map,
    save_layout,
    save_temperature_map,
)
from .simulator import Scenario, generate_dataset, solve_steady_state, synthesize_observation


def _read_json(path: Path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from None


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")


@dataclass(frozen=True)
class ConfigSpec:
    label: str
    layout: ComponentLayout
    layout_path: str  # as written in the scenario, relative to it
    resistances: dict[int, float] | None
    injections: dict[int, float] | None


@dataclass(frozen=True)
class ScenarioFile:
    configs: list[ConfigSpec]
    params: ModelParams
    t_amb: float
    voltages: tuple[float, ...]
    sigma: float
    readings: int
    seed: int
    series_resistance: float = 0.0


def write_reference_scenario(
    out_dir: str | Path, sigma: float = 0.1, readings: int = 5, seed: int = 0, t_amb: float = 300.15
) -> Path:
    """Write layouts A-D and a scenario JSON using the default generating parameters."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    configs = []
    for label, (layout, res) in reference_configurations().items():
        name = f"layout_{label}.json"
        save_layout(out / name, layout)
        configs.append(
            {"label": label, "layout": name, "resistances": {str(k): v for k, v in res.items()}}
        )
    doc = {
        "t_amb": t_amb,
        "sigma": sigma,
        "readings": readings,
        "seed": seed,
        "voltages": list(VOLTAGES),
        "params": default_params().to_dict(),
        "configurations": configs,
    }
    path = out / "scenario.json"
    _write_json(path, doc)
    return path


def _id_table(d, what: str, path: Path) -> dict[int, float]:
    try:
        return {int(k): float(v) for k, v in dict(d).items()}
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed {what} table ({exc})") from None


def load_scenario(path: str | Path) -> ScenarioFile:
    path = Path(path)
    doc = _read_json(path)
    try:
        params = ModelParams.from_dict(doc["params"])
        raw_cfgs = doc["configurations"]
        t_amb = float(doc.get("t_amb", 300.15))
        voltages = tuple(float(v) for v in doc.get("voltages", ()))
        sigma = float(doc.get("sigma", 0.0))
        readings = int(doc.get("readings", 1))
        seed = int(doc.get("seed", 0))
        series = float(doc.get("series_resistance", 0.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed scenario ({exc})") from None
    configs = []
    for j, c in enumerate(raw_cfgs):
        label = str(c.get("label", chr(ord("A") + j)))
        if "layout" not in c:
            raise ParseError(f"{path}: configuration {label} has no layout")
        layout = load_layout(path.parent / c["layout"])
        res = _id_table(c["resistances"], "resistance", path) if "resistances" in c else None
        inj = _id_table(c["injections"], "injection", path) if "injections" in c else None
        if (res is None) == (inj is None):
            raise ValidationError(
                f"configuration {label} needs exactly one of 'resistances' or 'injections'"
            )
        if res is not None and not voltages:
            raise ValidationError("a resistance table needs a non-empty 'voltages' list")
        configs.append(ConfigSpec(label, layout, str(c["layout"]), res, inj))
    if not configs:
        raise ValidationError(f"{path}: no configurations")
    return ScenarioFile(configs, params, t_amb, voltages, sigma, readings, seed, series)


def simulate_scenario(sf: ScenarioFile) -> list[MeasurementInstance]:
    """Generate every instance of a scenario; noise streams depend only on the seed."""
    out: list[MeasurementInstance] = []
    res_cfgs = [c for c in sf.configs if c.resistances is not None]
    if res_cfgs:
        scen = [
            Scenario(c.layout, sf.params, sf.t_amb, sigma=sf.sigma, readings=sf.readings, seed=sf.seed)
            for c in res_cfgs
        ]
        out += generate_dataset(
            scen,
            sf.voltages,
            [c.resistances for c in res_cfgs],
            labels=[c.label for c in res_cfgs],
            series_resistance=sf.series_resistance,
        )
    for j, c in enumerate(c for c in sf.configs if c.injections is not None):
        sc = Scenario(c.layout, sf.params, sf.t_amb, c.injections, sf.sigma, sf.readings, sf.seed)
        true_t = solve_steady_state(sc)
        maps = []
        for rd in range(sf.readings):
            seq = np.random.SeedSequence([sf.seed, 1_000_000 + j, rd])
            maps.append(
                synthesize_observation(true_t, c.layout, sf.params.emissivity, sf.t_amb, sf.sigma, seq)
            )
        truth = {k: c.injections.get(k, 0.0) for k in c.layout.active_ids}
        out.append(MeasurementInstance(tuple(maps), c.layout, 0.0, truth, c.label, 0, sf.t_amb))
    return out


def save_dataset(
    out_dir: str | Path,
    instances: Sequence[MeasurementInstance],
    layout_files: dict[str, str] | None = None,
) -> Path:
    """Write map CSVs under ``maps/`` and ``instances.json``; returns the manifest path.

    Layouts are written once per configuration unless ``layout_files`` maps a
    configuration label to an existing layout path (relative to ``out_dir``).
    """
    out = Path(out_dir)
    (out / "maps").mkdir(parents=True, exist_ok=True)
    layout_files = dict(layout_files or {})
    records = []
    for inst in instances:
        if inst.config not in layout_files:
            name = f"layout_{inst.config or 'X'}.json"
            save_layout(out / name, inst.layout)
            layout_files[inst.config] = name
        names = []
        for rd, m in enumerate(inst.maps):
            name = f"maps/{inst.config or 'X'}_v{inst.voltage_index:02d}_r{rd}.csv"
            save_temperature_map(out / name, m)
            names.append(name)
        records.append(
            {
                "config": inst.config,
                "voltage_index": inst.voltage_index,
                "voltage": inst.voltage,
                "t_amb": inst.t_amb,
                "layout": layout_files[inst.config],
                "truth": {str(k): v for k, v in sorted(inst.truth.items())},
                "maps": names,
            }
        )
    path = out / "instances.json"
    _write_json(path, {"instances": records})
    return path


def load_dataset(path: str | Path) -> list[MeasurementInstance]:
    path = Path(path)
    doc = _read_json(path)
    layouts: dict[str, ComponentLayout] = {}
    out = []
    try:
        recs = doc["instances"]
    except (KeyError, TypeError):
        raise ParseError(f"{path}: manifest lacks an 'instances' list") from None
    for i, rec in enumerate(recs):
        try:
            lay_name = rec["layout"]
            if lay_name not in layouts:
                layouts[lay_name] = load_layout(path.parent / lay_name)
            maps = tuple(load_temperature_map(path.parent / m) for m in rec["maps"])
            t_amb = rec.get("t_amb")
            out.append(
                MeasurementInstance(
                    maps=maps,
                    layout=layouts[lay_name],
                    voltage=float(rec["voltage"]),
                    truth=_id_table(rec["truth"], "truth", path),
                    config=str(rec.get("config", "")),
                    voltage_index=int(rec.get("voltage_index", i)),
                    t_amb=None if t_amb is None else float(t_amb),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: instance {i} is malformed ({exc})") from None
    return out


__all__ = [
    "ConfigSpec",
    "ScenarioFile",
    "write_reference_scenario",
    "load_scenario",
    "simulate_scenario",
    "save_dataset",
    "load_dataset",
]
