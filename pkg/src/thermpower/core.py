"""Domain types and file I/O for temperature maps, component layouts and model parameters."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

KELVIN_OFFSET = 273.15

# Default material palette (1-based material classes).
BOARD = 1
WIRE = 2
COMPONENT = 3


class ThermError(Exception):
    """Base class for all package errors."""


class ParseError(ThermError):
    pass


class ValidationError(ThermError):
    pass


class Variant(str, enum.Enum):
    FULL = "full"
    INT = "int"
    NORAD = "norad"
    NOFLUX = "noflux"

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        if isinstance(value, Variant):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown variant {value!r}") from None

    @property
    def compensates(self) -> bool:
        return self is Variant.FULL

    @property
    def inpaints(self) -> bool:
        return self is not Variant.FULL

    @property
    def radiative(self) -> bool:
        return self in (Variant.FULL, Variant.INT)

    @property
    def convective(self) -> bool:
        return self is not Variant.NOFLUX


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# Temperature maps
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TemperatureMap:
    """H x W grid of absolute temperatures in kelvin."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValidationError(f"temperature map must be 2-D, got shape {v.shape}")
        if v.shape[0] < 3 or v.shape[1] < 3:
            raise ValidationError(f"temperature map must be at least 3x3, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("temperature map contains non-finite values")
        if np.any(v <= 0.0):
            idx = tuple(int(i) for i in np.argwhere(v <= 0.0)[0])
            raise ValidationError(f"non-positive temperature {v[idx]!r} K at cell {idx}")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class PowerMap:
    """Per-cell electrical power in watts. Border cells hold NaN (undefined)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] < 3:
            raise ValidationError(f"power map must be 2-D and at least 3x3, got {v.shape}")
        if not np.all(np.isfinite(v[1:-1, 1:-1])):
            raise ValidationError("power map has non-finite interior cells")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def interior(self) -> np.ndarray:
        return self.values[1:-1, 1:-1]


def _parse_header(line: str, path) -> dict[str, str]:
    if not line.startswith("#"):
        raise ParseError(f"{path}: missing '# unit=... height=... width=...' header")
    fields = {}
    for tok in line[1:].split():
        if "=" not in tok:
            raise ParseError(f"{path}: malformed header token {tok!r}")
        k, v = tok.split("=", 1)
        fields[k.strip().lower()] = v.strip()
    for k in ("unit", "height", "width"):
        if k not in fields:
            raise ParseError(f"{path}: header lacks {k!r}")
    return fields


def read_grid(path: str | Path) -> tuple[np.ndarray, str]:
    """Read a headed CSV grid; return (values, unit) without unit conversion."""
    path = Path(path)
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        raise ParseError(f"{path}: empty file")
    head = _parse_header(lines[0], path)
    try:
        height, width = int(head["height"]), int(head["width"])
    except ValueError:
        raise ParseError(f"{path}: height/width must be integers") from None
    rows = lines[1:]
    if len(rows) != height:
        raise ParseError(f"{path}: header declares {height} rows, found {len(rows)}")
    out = np.empty((height, width), dtype=np.float64)
    for i, row in enumerate(rows):
        cells = row.split(",")
        if len(cells) != width:
            raise ParseError(f"{path}: row {i} has {len(cells)} values, expected {width}")
        try:
            out[i] = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"{path}: row {i}: {exc}") from None
    return out, head["unit"]


def write_grid(path: str | Path, values: np.ndarray, unit: str) -> None:
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    with open(path, "w") as fh:
        fh.write(f"# unit={unit} height={h} width={w}\n")
        for row in values:
            # repr() of a float is the shortest string that round-trips exactly
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def load_temperature_map(path: str | Path) -> TemperatureMap:
    values, unit = read_grid(path)
    unit = unit.upper()
    if unit == "C":
        values = values + KELVIN_OFFSET
    elif unit != "K":
        raise ParseError(f"{path}: temperature unit must be K or C, got {unit!r}")
    return TemperatureMap(values)


def save_temperature_map(path: str | Path, tmap: TemperatureMap) -> None:
    write_grid(path, tmap.values, "K")


def save_power_map(path: str | Path, pmap: PowerMap) -> None:
    write_grid(path, pmap.values, "W")


def load_power_map(path: str | Path) -> PowerMap:
    values, unit = read_grid(path)
    if unit.upper() != "W":
        raise ParseError(f"{path}: power map unit must be W, got {unit!r}")
    return PowerMap(values)


# --------------------------------------------------------------------------
# Component layouts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    id: int
    name: str
    material: int  # 1-based material class

    @property
    def is_board(self) -> bool:
        return self.id == 0

    @property
    def is_wire(self) -> bool:
        return self.name.lower().startswith("wire")

    @property
    def is_active(self) -> bool:
        return not (self.is_board or self.is_wire)


@dataclass(frozen=True, eq=False)
class ComponentLayout:
    """Grid of component ids plus the manifest mapping ids to names and materials.

    Components whose name starts with ``wire`` are treated as wiring: they are
    excluded from the active set and form the wire regularization mask.
    """

    ids: np.ndarray
    components: tuple[Component, ...]
    mu: int

    def __post_init__(self):
        ids = np.asarray(self.ids)
        if ids.ndim != 2:
            raise ValidationError(f"layout grid must be 2-D, got shape {ids.shape}")
        if ids.size and not np.issubdtype(ids.dtype, np.integer):
            if not np.all(ids == np.round(ids)):
                raise ValidationError("layout grid must hold integer ids")
        ids = ids.astype(np.int64)
        if np.any(ids < 0):
            raise ValidationError("layout ids must be non-negative")
        comps = tuple(self.components)
        mu = int(self.mu)
        if mu < 1:
            raise ValidationError("mu must be >= 1")
        seen: dict[int, Component] = {}
        for c in comps:
            if c.id in seen:
                raise ValidationError(f"duplicate component id {c.id} in manifest")
            if not 1 <= c.material <= mu:
                raise ValidationError(
                    f"component {c.id} ({c.name!r}) has material {c.material} outside 1..{mu}"
                )
            seen[c.id] = c
        if 0 not in seen:
            raise ValidationError("manifest lacks id 0 (board)")
        if seen[0].name != "board":
            raise ValidationError(f"id 0 must be named 'board', got {seen[0].name!r}")
        unknown = sorted(set(np.unique(ids).tolist()) - set(seen))
        if unknown:
            raise ValidationError(f"grid contains ids absent from manifest: {unknown}")
        object.__setattr__(self, "ids", _readonly(ids))
        object.__setattr__(self, "components", tuple(sorted(comps, key=lambda c: c.id)))
        object.__setattr__(self, "mu", mu)
        lut = np.zeros(max(seen) + 1, dtype=np.intp)
        for c in comps:
            lut[c.id] = c.material - 1
        object.__setattr__(self, "_material_map", _readonly(lut[ids]))

    @property
    def shape(self) -> tuple[int, int]:
        return self.ids.shape

    @property
    def material_map(self) -> np.ndarray:
        """0-based material index per cell."""
        return self._material_map

    @property
    def board_material(self) -> int:
        return self.component(0).material

    def component(self, cid: int) -> Component:
        for c in self.components:
            if c.id == cid:
                return c
        raise ValidationError(f"unknown component id {cid}")

    @property
    def component_ids(self) -> list[int]:
        return [c.id for c in self.components]

    @property
    def active_ids(self) -> list[int]:
        return [c.id for c in self.components if c.is_active]

    @property
    def wire_ids(self) -> list[int]:
        return [c.id for c in self.components if c.is_wire]

    @property
    def wire_materials(self) -> set[int]:
        return {c.material for c in self.components if c.is_wire}

    @property
    def materials_in_use(self) -> set[int]:
        return {int(m) + 1 for m in np.unique(self.material_map)}


def component_mask(layout: ComponentLayout, cid: int) -> np.ndarray:
    """Binary H x W mask, 1 where the layout carries ``cid``."""
    layout.component(cid)  # raises on unknown id
    return (layout.ids == cid).astype(np.int8)


def load_layout(path: str | Path) -> ComponentLayout:
    path = Path(path)
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    try:
        mu = int(doc["mu"])
        comps = [
            Component(int(c["id"]), str(c["name"]), int(c["material"]))
            for c in doc["components"]
        ]
        grid_path = Path(doc["grid"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: malformed layout manifest ({exc})") from None
    if not grid_path.is_absolute():
        grid_path = path.parent / grid_path
    ids = _read_id_grid(grid_path)
    return ComponentLayout(ids, tuple(comps), mu)


def _read_id_grid(path: Path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ParseError(f"{path}: empty id grid")
    rows = []
    for i, ln in enumerate(lines):
        try:
            rows.append([int(c) for c in ln.split(",")])
        except ValueError as exc:
            raise ParseError(f"{path}: row {i}: {exc}") from None
        if len(rows[-1]) != len(rows[0]):
            raise ParseError(f"{path}: row {i} has {len(rows[-1])} ids, expected {len(rows[0])}")
    return np.array(rows, dtype=np.int64)


def save_layout(path: str | Path, layout: ComponentLayout, grid_name: str | None = None) -> None:
    """Write the JSON manifest at ``path`` and the id grid CSV next to it."""
    path = Path(path)
    grid_name = grid_name or path.with_suffix(".grid.csv").name
    with open(path.parent / grid_name, "w") as fh:
        for row in layout.ids:
            fh.write(",".join(str(int(x)) for x in row))
            fh.write("\n")
    doc = {
        "mu": layout.mu,
        "components": [
            {"id": c.id, "name": c.name, "material": c.material} for c in layout.components
        ],
        "grid": grid_name,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# Model parameters
# --------------------------------------------------------------------------

_VARIANT_EXTRA = {Variant.FULL: None, Variant.INT: 2, Variant.NORAD: 1, Variant.NOFLUX: 0}


def trained_parameter_count(variant: Variant | str, mu: int = 3) -> int:
    """Free parameters per variant: FULL/INT/NORAD/NOFLUX -> 11/8/7/6 for three materials."""
    variant = Variant.parse(variant)
    n = mu * (mu + 1) // 2
    extra = _VARIANT_EXTRA[variant]
    return n + (mu + 2 if extra is None else extra)


@dataclass(frozen=True, eq=False)
class ModelParams:
    conductance: np.ndarray  # (mu, mu) symmetric, W/K per cell edge
    emissivity: np.ndarray  # (mu,)
    h: float  # W/K per cell
    r: float  # W/K^4 per cell
    variant: Variant = Variant.INT

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.conductance, dtype=np.float64))
        e = np.atleast_1d(np.asarray(self.emissivity, dtype=np.float64))
        mu = c.shape[0]
        if c.shape != (mu, mu):
            raise ValidationError(f"conductance must be square, got {c.shape}")
        if not np.array_equal(c, c.T):
            raise ValidationError("conductance matrix must be symmetric")
        if e.shape != (mu,):
            raise ValidationError(f"emissivity must have length {mu}, got {e.shape}")
        if not (np.all(np.isfinite(c)) and np.all(c >= 0.0)):
            raise ValidationError("conductances must be finite and >= 0")
        if not np.all((e > 0.0) & (e <= 1.0)):
            raise ValidationError("emissivities must lie in (0, 1]")
        h, r = float(self.h), float(self.r)
        if not (np.isfinite(h) and h >= 0.0 and np.isfinite(r) and r >= 0.0):
            raise ValidationError("h and r must be finite and >= 0")
        object.__setattr__(self, "conductance", _readonly(c))
        object.__setattr__(self, "emissivity", _readonly(e))
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "variant", Variant.parse(self.variant))

    @property
    def mu(self) -> int:
        return self.conductance.shape[0]

    def replace(self, **kw) -> "ModelParams":
        d = dict(
            conductance=self.conductance,
            emissivity=self.emissivity,
            h=self.h,
            r=self.r,
            variant=self.variant,
        )
        d.update(kw)
        return ModelParams(**d)

    def pinned(self, variant: Variant | str | None = None) -> "ModelParams":
        """Copy with the values a variant does not train pinned (emissivity 1, r 0, h 0)."""
        v = self.variant if variant is None else Variant.parse(variant)
        kw: dict = {"variant": v}
        if v is not Variant.FULL:
            kw["emissivity"] = np.ones(self.mu)
        if not v.radiative:
            kw["r"] = 0.0
        if not v.convective:
            kw["h"] = 0.0
        return self.replace(**kw)

    def scaled(self, factor: float) -> "ModelParams":
        return self.replace(
            conductance=self.conductance * factor, h=self.h * factor, r=self.r * factor
        )

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "conductance": self.conductance.tolist(),
            "emissivity": self.emissivity.tolist(),
            "h": self.h,
            "r": self.r,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelParams":
        try:
            return cls(
                conductance=np.array(d["conductance"], dtype=float),
                emissivity=np.array(d["emissivity"], dtype=float),
                h=float(d["h"]),
                r=float(d["r"]),
                variant=Variant.parse(d.get("variant", "int")),
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"malformed parameter block ({exc})") from None


def load_params(path: str | Path) -> ModelParams:
    with open(path) as fh:
        doc = json.load(fh)
    if "params" in doc and isinstance(doc["params"], Mapping):
        doc = doc["params"]
    return ModelParams.from_dict(doc)


def save_params(path: str | Path, params: ModelParams) -> None:
    with open(path, "w") as fh:
        json.dump(params.to_dict(), fh, indent=2)
        fh.write("\n")


# --------------------------------------------------------------------------
# Measurement instances
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MeasurementInstance:
    """One (configuration, voltage) sample with its repeated readings."""

    maps: tuple[TemperatureMap, ...]
    layout: ComponentLayout
    voltage: float
    truth: Mapping[int, float]
    config: str = ""
    voltage_index: int = 0
    t_amb: float | None = None  # known ambient, if the generator recorded one

    def __post_init__(self):
        maps = tuple(self.maps)
        if not maps:
            raise ValidationError("instance needs at least one temperature map")
        for m in maps:
            if m.shape != self.layout.shape:
                raise ValidationError(
                    f"map shape {m.shape} differs from layout shape {self.layout.shape}"
                )
        truth = {int(k): float(v) for k, v in dict(self.truth).items()}
        missing = sorted(set(self.layout.active_ids) - set(truth))
        if missing:
            raise ValidationError(f"truth lacks active components {missing}")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "truth", truth)

    @property
    def key(self) -> tuple[str, int]:
        return (self.config, self.voltage_index)

    def mean_map(self) -> TemperatureMap:
        if len(self.maps) == 1:
            return self.maps[0]
        return TemperatureMap(np.mean([m.values for m in self.maps], axis=0))


def sort_instances(instances: Iterable[MeasurementInstance]) -> list[MeasurementInstance]:
    return sorted(instances, key=lambda inst: inst.key)


__all__ = [
    "BOARD",
    "WIRE",
    "COMPONENT",
    "KELVIN_OFFSET",
    "ThermError",
    "ParseError",
    "ValidationError",
    "Variant",
    "TemperatureMap",
    "PowerMap",
    "Component",
    "ComponentLayout",
    "ModelParams",
    "MeasurementInstance",
    "component_mask",
    "load_temperature_map",
    "save_temperature_map",
    "load_power_map",
    "save_power_map",
    "load_layout",
    "save_layout",
    "load_params",
    "save_params",
    "read_grid",
    "write_grid",
    "trained_parameter_count",
    "sort_instances",
]
