import numpy as np
import pytest

from thermpower import _kernels_py
from thermpower.core import BOARD, COMPONENT, WIRE, Component, ComponentLayout, ModelParams, TemperatureMap, Variant
from thermpower.metrics import aggregate
from thermpower.powerflow import BACKEND, conductance_fields, estimate_pixel_powers, raw_pixel_powers
from thermpower.simulator import Scenario, solve_steady_state

from conftest import T_AMB, black_params, block_layout


def uniform_layout(shape, material=1):
    return ComponentLayout(np.zeros(shape, dtype=int), (Component(0, "board", material),), 3)


def test_hand_example_center_and_neighbours():
    lay = uniform_layout((5, 5))
    p = ModelParams(np.full((3, 3), 0.01), np.ones(3), 0.005, 0.0)
    t = np.full((5, 5), 300.0)
    t[2, 2] = 310.0
    pm = estimate_pixel_powers(TemperatureMap(t), lay, p, 300.0, Variant.INT).values
    assert pm[2, 2] == pytest.approx(0.45, abs=1e-12)
    for i, j in ((1, 2), (3, 2), (2, 1), (2, 3)):
        assert pm[i, j] == pytest.approx(-0.1, abs=1e-12)
    assert pm[1, 1] == 0.0
    assert np.all(np.isnan(pm[0])) and np.all(np.isnan(pm[:, -1]))


@pytest.mark.parametrize("variant", list(Variant))
def test_ambient_map_gives_zero(variant):
    lay = block_layout(wire=True)
    p = ModelParams(np.full((3, 3), 0.01), np.array([0.9, 0.2, 0.9]), 1e-3, 1e-11, Variant.FULL)
    pm = estimate_pixel_powers(TemperatureMap(np.full(lay.shape, T_AMB)), lay, p, T_AMB, variant)
    assert np.all(pm.interior == 0.0)


def test_conductance_fields_uniform_and_split():
    c = np.array([[0.02, 0.005, 0.0], [0.005, 0.03, 0.0], [0.0, 0.0, 0.01]])
    p = ModelParams(c, np.ones(3), 0.0, 0.0)
    ct, cb, cl, cr = conductance_fields(uniform_layout((5, 5)), p)
    for f in (ct, cb, cl, cr):
        assert np.all(f[1:-1, 1:-1] == 0.02)
    ids = np.zeros((5, 6), dtype=int)
    ids[:, 3:] = 1
    lay = ComponentLayout(ids, (Component(0, "board", 1), Component(1, "R1", 2)), 3)
    ct, cb, cl, cr = conductance_fields(lay, p)
    assert np.all(cr[:, 2] == 0.005) and np.all(cl[:, 3] == 0.005)
    assert np.all(cr[:, :2] == 0.02) and np.all(cr[:, 3:5] == 0.03)


def test_conductance_fields_opposing_edges_agree():
    rng = np.random.default_rng(0)
    ids = rng.integers(0, 3, size=(9, 11))
    comps = (Component(0, "board", BOARD), Component(1, "R1", COMPONENT), Component(2, "wire", WIRE))
    lay = ComponentLayout(ids, comps, 3)
    a = rng.random((3, 3))
    p = ModelParams(a + a.T, np.ones(3), 0.0, 0.0)
    ct, cb, cl, cr = conductance_fields(lay, p)
    assert np.array_equal(cb[:-1, :], ct[1:, :])
    assert np.array_equal(cr[:, :-1], cl[:, 1:])


def random_map(shape, seed=0):
    return 300.0 + 30.0 * np.random.default_rng(seed).random(shape)


def test_variant_nesting_bit_equal():
    lay = block_layout(wire=True)
    t = TemperatureMap(random_map(lay.shape))
    c = black_params().conductance
    p0 = ModelParams(c, np.ones(3), 8e-5, 0.0, Variant.FULL)
    full = estimate_pixel_powers(t, lay, p0, T_AMB, Variant.FULL).values
    intv = estimate_pixel_powers(t, lay, p0, T_AMB, Variant.INT).values
    norad = estimate_pixel_powers(t, lay, p0, T_AMB, Variant.NORAD).values
    assert np.array_equal(full, intv, equal_nan=True)
    assert np.array_equal(intv, norad, equal_nan=True)
    p00 = p0.replace(h=0.0)
    outs = [estimate_pixel_powers(t, lay, p00, T_AMB, v).values for v in Variant]
    for o in outs[1:]:
        assert np.array_equal(o, outs[0], equal_nan=True)


@pytest.mark.parametrize("variant", list(Variant))
def test_doubling_parameters_doubles_power(variant):
    lay = block_layout(wire=True)
    t = TemperatureMap(random_map(lay.shape, 1))
    p = black_params(Variant.FULL, r=3e-13)
    one = estimate_pixel_powers(t, lay, p, T_AMB, variant).values
    two = estimate_pixel_powers(t, lay, p.scaled(2.0), T_AMB, variant).values
    assert np.array_equal(two, 2.0 * one, equal_nan=True)


@pytest.mark.parametrize("variant", [Variant.NORAD, Variant.NOFLUX])
def test_offset_invariance(variant):
    lay = block_layout()
    v = random_map(lay.shape, 2)
    p = black_params()
    a = estimate_pixel_powers(TemperatureMap(v), lay, p, T_AMB, variant).interior
    b = estimate_pixel_powers(TemperatureMap(v + 7.0), lay, p, T_AMB + 7.0, variant).interior
    assert np.allclose(a, b, rtol=0, atol=1e-12)


def test_interior_sum_equals_border_flux():
    lay = block_layout()
    p = black_params().replace(h=0.0, r=0.0)
    v = random_map(lay.shape, 3)
    v[0, :] = v[-1, :] = v[:, 0] = v[:, -1] = T_AMB
    pm = estimate_pixel_powers(TemperatureMap(v), lay, p, T_AMB, Variant.NOFLUX).interior
    ct, cb, cl, cr = conductance_fields(lay, p)
    flux = 0.0
    flux += np.sum(ct[1, 1:-1] * (v[1, 1:-1] - T_AMB))
    flux += np.sum(cb[-2, 1:-1] * (v[-2, 1:-1] - T_AMB))
    flux += np.sum(cl[1:-1, 1] * (v[1:-1, 1] - T_AMB))
    flux += np.sum(cr[1:-1, -2] * (v[1:-1, -2] - T_AMB))
    assert pm.sum() == pytest.approx(flux, rel=1e-10)


def test_backends_bit_identical():
    lay = block_layout(wire=True)
    v = random_map(lay.shape, 4)
    p = ModelParams(black_params().conductance, np.array([0.95, 0.2, 0.9]), 8e-5, 2e-13)
    args = (v, lay.material_map, p.conductance, p.emissivity, p.h, p.r, T_AMB, True, True)
    ref = _kernels_py.pixel_powers(*args)
    got = raw_pixel_powers(*args)
    assert np.array_equal(ref, got, equal_nan=True)
    if BACKEND == "cython":
        from thermpower import _kernels

        for conv in (True, False):
            for rad in (True, False):
                a = args[:7] + (conv, rad)
                assert np.array_equal(_kernels.pixel_powers(*a), _kernels_py.pixel_powers(*a), equal_nan=True)


def oracle_map(lay, inj, params):
    return solve_steady_state(Scenario(lay, params, T_AMB, inj, sigma=0.0))


def test_round_trip_cells():
    lay = block_layout()
    p = black_params()
    inj = {1: 0.05, 2: 0.1, 3: 0.3, 4: 1.0}
    t = oracle_map(lay, inj, p)
    pm = estimate_pixel_powers(t, lay, p, T_AMB, Variant.INT)
    want = np.zeros(lay.shape)
    for k, w in inj.items():
        mask = lay.ids == k
        want[mask] = w / mask.sum()
    assert np.max(np.abs(pm.interior - want[1:-1, 1:-1])) <= 1e-6
    assert aggregate(pm, lay, 3) == pytest.approx(0.3, abs=1e-6)


def test_norad_underestimates_hot_components():
    # dropping the radiative loss removes a positive term for cells above ambient
    lay = block_layout()
    p = black_params(r=2e-13)
    inj = {1: 0.2, 2: 0.2, 3: 0.4, 4: 0.8}
    t = oracle_map(lay, inj, p)
    intv = estimate_pixel_powers(t, lay, p, T_AMB, Variant.INT)
    norad = estimate_pixel_powers(t, lay, p, T_AMB, Variant.NORAD)
    for k in inj:
        assert aggregate(norad, lay, k) < aggregate(intv, lay, k)


def test_fallback_selected_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, THERMPOWER_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "import thermpower.powerflow as p; print(p.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "numpy"
