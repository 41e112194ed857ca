import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from thermpower.core import ModelParams, TemperatureMap, Variant
from thermpower.metrics import error_rel, error_std
from thermpower.powerflow import estimate_pixel_powers
from thermpower.preprocess import compensate_array, estimate_ambient, inpaint_array, observe_array

from conftest import T_AMB, block_layout

temps = st.floats(280.0, 400.0, allow_nan=False)
LAYOUT = block_layout(wire=True)


@given(t=temps, eps=st.floats(0.05, 1.0), box=st.floats(280.0, 320.0))
def test_observe_compensate_inverse(t, eps, box):
    back = compensate_array(observe_array(np.array([t]), np.array([eps]), box), np.array([eps]), box)
    assert abs(back[0] - t) < 1e-9


@given(arrays(np.float64, (6, 7), elements=temps), st.integers(3, 120))
def test_ambient_within_range(v, bins):
    est = estimate_ambient(v, bins=bins).t_amb
    assert v.min() <= est <= v.max()


@given(
    a=st.floats(-2, 2), b=st.floats(-2, 2), c=st.floats(290, 310),
    top=st.integers(2, 10), left=st.integers(2, 12), hh=st.integers(1, 5), ww=st.integers(1, 5),
)
@settings(max_examples=40, deadline=None)
def test_inpaint_reproduces_affine(a, b, c, top, left, hh, ww):
    i, j = np.mgrid[0:16, 0:18]
    v = c + a * i + b * j
    unknown = np.zeros(v.shape, bool)
    unknown[top : top + hh, left : left + ww] = True
    broken = np.where(unknown, 0.0, v)
    out = inpaint_array(broken, unknown)
    assert np.max(np.abs(out - v)) < 1e-6


def params_strategy():
    pos = st.floats(1e-5, 5e-2)
    return st.builds(
        lambda c1, c2, c3, c4, c5, c6, h, r: ModelParams(
            np.array([[c1, c2, c3], [c2, c4, c5], [c3, c5, c6]]), np.ones(3), h, r
        ),
        pos, pos, pos, pos, pos, pos, st.floats(0, 1e-3), st.floats(0, 1e-11),
    )


@given(params_strategy(), st.integers(0, 2**31 - 1), st.sampled_from(list(Variant)))
@settings(max_examples=30, deadline=None)
def test_parameter_linearity(p, seed, variant):
    v = 300 + 30 * np.random.default_rng(seed).random(LAYOUT.shape)
    t = TemperatureMap(v)
    one = estimate_pixel_powers(t, LAYOUT, p, T_AMB, variant).values
    two = estimate_pixel_powers(t, LAYOUT, p.scaled(2.0), T_AMB, variant).values
    assert np.array_equal(two, 2 * one, equal_nan=True)


@given(params_strategy(), st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_nesting_without_radiation(p, seed):
    t = TemperatureMap(300 + 30 * np.random.default_rng(seed).random(LAYOUT.shape))
    p = p.replace(r=0.0)
    outs = [estimate_pixel_powers(t, LAYOUT, p, T_AMB, v).values for v in (Variant.FULL, Variant.INT, Variant.NORAD)]
    assert np.array_equal(outs[0], outs[1], equal_nan=True) and np.array_equal(outs[1], outs[2], equal_nan=True)


@given(st.lists(st.tuples(st.floats(0.001, 1.0), st.floats(-0.1, 0.1)), min_size=1, max_size=30), st.randoms())
def test_metrics_permutation_invariant(pairs, rnd):
    tru = [t for t, _ in pairs]
    est = [t + d for t, d in pairs]
    idx = list(range(len(pairs)))
    rnd.shuffle(idx)
    e2, t2 = [est[i] for i in idx], [tru[i] for i in idx]
    assert error_std(est, tru) == error_std(e2, t2)
    assert error_rel(est, tru) == error_rel(e2, t2)
