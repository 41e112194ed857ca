"""Synthetic carrier-board layouts and a default parameter set for simulation.

Configurations A-D carry four or eight resistors with fixed resistance
tables, each resistor with a wire lead above and below. Geometry and thermal
constants are synthetic choices.
"""

from __future__ import annotations

import numpy as np

from .core import BOARD, COMPONENT, WIRE, Component, ComponentLayout, ModelParams, Variant

RESISTANCES = {
    "A": (27.0, 27.0, 10.0, 10.0),
    "B": (12.0, 15.0, 18.0, 22.0, 10.0, 10.0, 27.0, 27.0),
    "C": (1000.0, 1000.0, 100.0, 100.0),
    "D": (150.0, 150.0, 220.0, 220.0),
}

VOLTAGES = tuple(round(0.25 * k, 2) for k in range(1, 11))  # 0.25 .. 2.50 V

BOARD_SHAPE = (48, 60)

# Body sizes (rows, cols); default cycle when no resistances are given.
BODIES = ((8, 5), (5, 3), (6, 4), (4, 3))


def body_for_resistance(ohms: float) -> tuple[int, int]:
    """Low resistances carry more power at equal voltage and get larger packages."""
    if ohms <= 12.0:
        return (8, 5)
    if ohms <= 22.0:
        return (6, 4)
    if ohms <= 150.0:
        return (5, 3)
    return (4, 3)


def resistor_board(
    n_resistors: int,
    shape: tuple[int, int] = BOARD_SHAPE,
    per_row: int = 4,
    bodies=BODIES,
    lead: int = 4,
) -> ComponentLayout:
    """Resistor bodies (ids 1..n) in rows of ``per_row``, each with a one-cell
    wide lead going up and down from the body centre; all leads share one
    wire id (n + 1). ``bodies`` is cycled if shorter than ``n_resistors``."""
    hh, ww = shape
    n_rows = -(-n_resistors // per_row)
    size = [bodies[k % len(bodies)] for k in range(n_resistors)]
    row_h = max(b[0] for b in BODIES + tuple(size)) + 2 * lead
    col_w = max(b[1] for b in BODIES + tuple(size))
    row_gap = (hh - n_rows * row_h) // (n_rows + 1)
    col_gap = (ww - per_row * col_w) // (per_row + 1)
    if row_gap < 2 or col_gap < 2:
        raise ValueError("board too small for the requested resistor grid")
    ids = np.zeros(shape, dtype=np.int64)
    wire = n_resistors + 1
    for k, (bh, bw) in enumerate(size):
        row, col = divmod(k, per_row)
        cy = row_gap + row * (row_h + row_gap) + row_h // 2
        cx = col_gap + col * (col_w + col_gap) + col_w // 2
        top, left = cy - bh // 2, cx - bw // 2
        ids[top : top + bh, left : left + bw] = k + 1
        ids[top - lead : top, cx] = wire
        ids[top + bh : top + bh + lead, cx] = wire
    comps = [Component(0, "board", BOARD)]
    comps += [Component(k + 1, f"R{k + 1}", COMPONENT) for k in range(n_resistors)]
    comps.append(Component(wire, "wire", WIRE))
    return ComponentLayout(ids, tuple(comps), 3)


def reference_configurations(shape: tuple[int, int] = BOARD_SHAPE):
    """Layouts and resistance tables for configurations A-D."""
    out = {}
    for label, res in RESISTANCES.items():
        layout = resistor_board(len(res), shape, bodies=[body_for_resistance(x) for x in res])
        out[label] = (layout, {k + 1: ohm for k, ohm in enumerate(res)})
    return out


def default_params(variant: Variant | str = Variant.FULL) -> ModelParams:
    """Synthetic generating parameters (materials: board, wire, resistor).

    The hottest resistor at 2.5 V rises about 90 K above ambient. Board and
    resistor bodies are treated as black; the bare wire leads reflect most
    of the box radiation.
    """
    c = np.array(
        [
            [2.0e-3, 4.0e-3, 3.0e-3],
            [4.0e-3, 2.0e-2, 8.0e-3],
            [3.0e-3, 8.0e-3, 1.0e-2],
        ]
    ) / 15.0
    return ModelParams(
        conductance=c,
        emissivity=np.array([1.0, 0.2, 1.0]),
        h=8.0e-5,
        r=2.0e-13,
        variant=variant,
    )
