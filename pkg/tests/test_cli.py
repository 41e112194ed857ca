import csv
import json

import numpy as np
import pytest

from thermpower.cli import main, parse_grid
from thermpower.core import TemperatureMap, save_layout, save_params, save_temperature_map
from thermpower.simulator import Scenario, solve_steady_state

from conftest import T_AMB, black_params, block_layout


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert run("scenario", "--out", root / "s", "--seed", 5) == 0
    assert run("simulate", root / "s" / "scenario.json", "--out", root / "d") == 0
    assert run("crossval", root / "d" / "instances.json", "--out", root / "cv", "--folds", 10) == 0
    return root


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_simulate_counts(pipeline, capsys, tmp_path):
    assert run("simulate", pipeline / "s" / "scenario.json", "--out", tmp_path / "again") == 0
    out = capsys.readouterr().out
    assert "40 instances (200 component samples), 200 maps written" in out
    manifest = json.loads((pipeline / "d" / "instances.json").read_text())
    assert len(manifest["instances"]) == 40
    # byte-identical outputs for the same seed
    for name in ("instances.json", "maps/C_v03_r4.csv", "layout_B.json"):
        assert (tmp_path / "again" / name).read_bytes() == (pipeline / "d" / name).read_bytes()


def test_missing_file_exit_code(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert run("simulate", missing, "--out", tmp_path / "o") == 2
    assert str(missing) in capsys.readouterr().err


def test_bad_flag_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("fit", tmp_path / "x.json", "--out", tmp_path, "--variant", "bogus")
    assert exc.value.code == 2


def test_crossval_reports(pipeline):
    rows = read_rows(pipeline / "cv" / "folds.csv")
    assert rows[0][:3] == ["fold", "train", "validate"]
    assert [(r[1], r[2]) for r in rows[1:]] == [("36", "4")] * 10
    doc = json.loads((pipeline / "cv" / "crossval.json").read_text())
    assert doc["variant"] == "int" and len(doc["folds"]) == 10
    assert doc["pooled"]["e_rel_percent"] <= 5.0
    preds = read_rows(pipeline / "cv" / "predictions.csv")
    assert preds[0] == ["config", "voltage_V", "component_id", "p_true_mW", "p_est_mW"]
    assert len(preds) == 201


def test_crossval_deterministic(pipeline, tmp_path):
    assert run("crossval", pipeline / "d" / "instances.json", "--out", tmp_path, "--folds", 10) == 0
    for name in ("folds.csv", "crossval.json", "predictions.csv"):
        assert (tmp_path / name).read_bytes() == (pipeline / "cv" / name).read_bytes()


def test_sweep_rows_and_svg(pipeline, tmp_path):
    assert run("sweep", pipeline / "cv" / "predictions.csv", "--pmin-grid", "0:500:50", "--out", tmp_path, "--emit-svg") == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert rows[0] == ["p_min_mW", "e_rel_percent", "e_std_mW"]
    assert len(rows) == 12
    rel = [float(r[1]) for r in rows[1:]]
    std = [float(r[2]) for r in rows[1:]]
    assert rel[6] < rel[0]
    assert all(b >= a for a, b in zip(std, std[1:]))
    svg = (tmp_path / "sweep.svg").read_text()
    assert svg.count("<polyline") == 2


def test_sweep_empty_rows_flagged(pipeline, tmp_path):
    assert run("sweep", pipeline / "cv" / "predictions.csv", "--pmin-grid", "0:2000:1000", "--out", tmp_path, "--emit-svg") == 0
    rows = read_rows(tmp_path / "sweep.csv")
    assert rows[3] == ["2000.0", "NA", "NA"]


def test_parse_grid():
    assert len(parse_grid("0:500:50")) == 11
    assert parse_grid("0:0.3:0.1")[-1] == pytest.approx(0.3)


def test_fit_report_and_under_determined(pipeline, tmp_path, capsys):
    assert run("fit", pipeline / "d" / "instances.json", "--out", tmp_path / "fit", "--variant", "noflux") == 0
    doc = json.loads((tmp_path / "fit" / "fit.json").read_text())
    assert doc["params"]["h"] == 0.0 and doc["params"]["r"] == 0.0
    assert doc["objective_trace"][-1] == doc["objective"]
    manifest = json.loads((pipeline / "d" / "instances.json").read_text())
    manifest["instances"] = manifest["instances"][:5]
    small = pipeline / "d" / "small.json"
    small.write_text(json.dumps(manifest))
    assert run("fit", small, "--out", tmp_path / "f2", "--variant", "full") == 2
    assert "11" in capsys.readouterr().err


def oracle_files(tmp_path, inj):
    lay = block_layout()
    p = black_params()
    save_layout(tmp_path / "lay.json", lay)
    save_params(tmp_path / "params.json", p)
    t = solve_steady_state(Scenario(lay, p, T_AMB, inj)) if inj else TemperatureMap(np.full(lay.shape, T_AMB))
    save_temperature_map(tmp_path / "map.csv", t)
    return lay


def test_estimate_uniform_map_zero(tmp_path):
    oracle_files(tmp_path, {})
    assert run("estimate", tmp_path / "map.csv", tmp_path / "lay.json", tmp_path / "params.json", "--out", tmp_path / "e") == 0
    rows = read_rows(tmp_path / "e" / "report.csv")
    assert all(float(r[4]) == 0.0 for r in rows[1:])


def test_estimate_oracle_instance(tmp_path):
    inj = {1: 0.05, 2: 0.1, 3: 0.3, 4: 1.0}
    oracle_files(tmp_path, inj)
    rc = run(
        "estimate", tmp_path / "map.csv", tmp_path / "lay.json", tmp_path / "params.json",
        "--variant", "int", "--t-amb", T_AMB, "--out", tmp_path / "e", "--emit-powermap", "--emit-svg",
    )
    assert rc == 0
    rows = {int(r[2]): float(r[4]) for r in read_rows(tmp_path / "e" / "report.csv")[1:]}
    for k, w in inj.items():
        assert rows[k] == pytest.approx(w * 1e3, rel=5e-3)
    assert (tmp_path / "e" / "powermap.csv").exists()
    assert (tmp_path / "e" / "powermap.svg").read_text().startswith("<svg")
