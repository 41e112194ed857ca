from decimal import Decimal, getcontext
from fractions import Fraction

import numpy as np
import pytest

from thermpower.core import PowerMap, ValidationError
from thermpower.metrics import (
    NoSamplesError,
    aggregate,
    aggregate_all,
    component_report,
    error_rel,
    error_std,
    min_power_sweep,
    sample_rms_error,
    spread,
    summarize,
)

from conftest import block_layout

# (true, estimated) mW for resistors 2 and 8 of configuration B, 0.25 .. 2.50 V
TABLE_K2 = [("3.69", "3.94"), ("14.8", "12.8"), ("33.2", "26.7"), ("58.9", "49.5"), ("92.2", "83.9"),
            ("132", "123"), ("180", "176"), ("235", "241"), ("298", "311"), ("368", "383")]
TABLE_K8 = [("2.05", "-0.35"), ("8.20", "3.27"), ("18.4", "12.5"), ("32.7", "24.4"), ("51.2", "43.3"),
            ("73.5", "65.1"), ("100", "93.9"), ("131", "129"), ("165", "165"), ("204", "200")]
PAIRS = TABLE_K2 + TABLE_K8


def oracle():
    tru = [Fraction(t) / 1000 for t, _ in PAIRS]
    est = [Fraction(e) / 1000 for _, e in PAIRS]
    mse = sum((e - t) ** 2 for e, t in zip(est, tru)) / len(tru)
    getcontext().prec = 40
    e_std = float((Decimal(mse.numerator) / Decimal(mse.denominator)).sqrt())
    e_rel = float(sum(abs(e - t) / t for e, t in zip(est, tru)) / len(tru))
    return e_std, e_rel


def table_arrays():
    tru = np.array([float(t) for t, _ in PAIRS]) * 1e-3
    est = np.array([float(e) for _, e in PAIRS]) * 1e-3
    return est, tru


def test_table_pairs_against_exact_arithmetic():
    est, tru = table_arrays()
    want_std, want_rel = oracle()
    assert error_std(est, tru, ["B"] * 20) == pytest.approx(want_std, rel=1e-12)
    assert error_rel(est, tru, ["B"] * 20) == pytest.approx(want_rel, rel=1e-12)


def test_single_pair_relative_error():
    assert error_rel([0.311], [0.298]) == pytest.approx(13 / 298, rel=1e-12)
    assert round(error_rel([0.311], [0.298]) * 100, 2) == 4.36


def test_trivial_cases():
    assert error_std([0.1, 0.2], [0.1, 0.2]) == 0.0
    assert error_rel([0.1, 0.2], [0.1, 0.2]) == 0.0
    assert error_std([0.11], [0.1]) == pytest.approx(0.01, rel=1e-12)


def test_pmin_filter():
    assert error_rel([0.09, 0.36], [0.1, 0.4], p_min=0.3) == pytest.approx(0.1, rel=1e-12)
    with pytest.raises(NoSamplesError):
        error_rel([0.09, 0.36], [0.1, 0.4], p_min=1.0)
    assert summarize([0.09], [0.1], p_min=1.0).empty


def test_nested_configuration_weighting():
    # config X: one sample error 0.1; config Y: three samples error 0 -> mean over configs 0.05
    est = [1.1, 1.0, 2.0, 3.0]
    tru = [1.0, 1.0, 2.0, 3.0]
    cfg = ["X", "Y", "Y", "Y"]
    assert error_rel(est, tru, cfg) == pytest.approx(0.05, rel=1e-12)
    assert error_std(est, tru, cfg) == pytest.approx(np.sqrt(0.01 / 2), rel=1e-12)


def test_permutation_invariance_within_configuration():
    est, tru = table_arrays()
    perm = np.random.default_rng(0).permutation(20)
    assert error_std(est, tru) == error_std(est[perm], tru[perm])


def test_relative_error_needs_positive_truth():
    with pytest.raises(ValidationError):
        error_rel([0.1], [0.0])


def test_sweep_grid_zero_matches_unfiltered():
    est, tru = table_arrays()
    [s] = min_power_sweep(est, tru, [0.0])
    assert s.e_std == error_std(est, tru) and s.e_rel == error_rel(est, tru)
    rows = min_power_sweep(est, tru, [0.0, 0.3, 0.5])
    assert rows[1].n == 1 and rows[2].empty and rows[2].e_rel is None
    with pytest.raises(ValidationError):
        min_power_sweep(est, tru, [0.3, 0.1])


def test_aggregation_and_partition():
    lay = block_layout(wire=True)
    v = np.full(lay.shape, np.nan)
    v[1:-1, 1:-1] = 1e-3
    pm = PowerMap(v)
    n1 = int((lay.ids[1:-1, 1:-1] == 1).sum())
    assert aggregate(pm, lay, 1) == pytest.approx(n1 * 1e-3)
    rng = np.random.default_rng(1)
    v[1:-1, 1:-1] = rng.normal(size=(lay.shape[0] - 2, lay.shape[1] - 2))
    sums = aggregate_all(PowerMap(v), lay)
    assert sum(sums.values()) == pytest.approx(v[1:-1, 1:-1].sum(), rel=1e-12)
    rep = component_report(PowerMap(v), lay, "A", 1.0)
    assert rep.board == sums[0] and rep.wire == sums[lay.wire_ids[0]]
    zero = PowerMap(np.where(np.isnan(v), np.nan, 0.0))
    assert all(x == 0.0 for x in aggregate_all(zero, lay).values())


def test_spread():
    s = spread([[0.010, 0.012], [0.005, 0.005]])
    assert s.stds[0] == pytest.approx(np.sqrt(2) * 1e-3, rel=1e-12)
    assert s.stds[1] == 0.0 and s.max == s.stds[0]
    assert s.mean == pytest.approx(np.sqrt(2) * 1e-3 / 2, rel=1e-12)
    with pytest.raises(ValidationError):
        spread([[0.01]])


def test_sample_rms_error():
    assert sample_rms_error([1.0, 3.0], 2.0) == pytest.approx(1.0)
