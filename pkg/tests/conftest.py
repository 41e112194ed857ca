import numpy as np
import pytest

from thermpower.boards import VOLTAGES, default_params, reference_configurations, resistor_board
from thermpower.core import BOARD, COMPONENT, WIRE, Component, ComponentLayout, ModelParams, Variant
from thermpower.simulator import Scenario, generate_dataset

T_AMB = 300.15


def block_layout(shape=(24, 32), blocks=((4, 4, 6, 5), (4, 14, 5, 6), (14, 5, 6, 6), (13, 19, 7, 8)), wire=False):
    """Board with rectangular components (top, left, height, width); optional wire stripe."""
    ids = np.zeros(shape, dtype=np.int64)
    comps = [Component(0, "board", BOARD)]
    for k, (t, l, hh, ww) in enumerate(blocks, start=1):
        ids[t : t + hh, l : l + ww] = k
        comps.append(Component(k, f"R{k}", COMPONENT))
    if wire:
        wid = len(blocks) + 1
        t, l, hh, ww = blocks[0]
        ids[t + hh : t + hh + 4, l + ww // 2] = wid
        comps.append(Component(wid, "wire", WIRE))
    return ComponentLayout(ids, tuple(comps), 3)


def black_params(variant=Variant.INT, r=2e-13):
    p = default_params()
    return ModelParams(p.conductance, np.ones(3), p.h, r, variant)


@pytest.fixture(scope="session")
def configs():
    return reference_configurations()


def reference_dataset(sigma=0.1, readings=5, seed=0, params=None):
    cfg = reference_configurations()
    p = params or default_params()
    scen = [Scenario(lay, p, T_AMB, sigma=sigma, readings=readings, seed=seed) for lay, _ in cfg.values()]
    return generate_dataset(scen, VOLTAGES, [res for _, res in cfg.values()], labels=list(cfg))


@pytest.fixture(scope="session")
def noiseless_dataset():
    return reference_dataset(sigma=0.0, readings=1)


@pytest.fixture(scope="session")
def noisy_dataset():
    return reference_dataset(sigma=0.1, readings=5)


@pytest.fixture
def small_board():
    return resistor_board(4, shape=(40, 40), per_row=2)
