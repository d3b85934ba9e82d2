import json
import subprocess
import sys

import numpy as np
import pytest

from pilotwave import data_path
from pilotwave.cli import main
from pilotwave.csvio import config_hash, read_csv, write_csv
from pilotwave.harness import benchmark_dict
from pilotwave.records import COLUMNS


@pytest.fixture
def scenario(tmp_path):
    def make(C=-1e12, n_steps=100, **changes):
        d = benchmark_dict(C)
        d.update(n_steps=n_steps, **changes)
        path = tmp_path / f"scenario_{len(list(tmp_path.glob('scenario_*')))}.json"
        path.write_text(json.dumps(d, indent=2))
        return path
    return make


def run(*argv):
    return main([str(a) for a in argv])


def test_simulate_writes_outputs(scenario, tmp_path):
    out = tmp_path / "out"
    assert run("simulate", "--scenario", scenario(), "--out", out,
               "--engines", "exact2d,sea0") == 0
    names = {p.name for p in out.iterdir()}
    assert names == {"trajectories_exact2d.csv", "trajectories_sea0.csv", "comparison.csv",
                     "manifest.json"}
    header, rows = read_csv(out / "trajectories_exact2d.csv")
    assert header == list(COLUMNS)
    assert len(rows) == 11
    header, rows = read_csv(out / "comparison.csv")
    assert header == ["t_fs", "deviation_nm_exact2d_vs_sea0"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert sorted(manifest["outputs"]) == sorted(names)
    assert manifest["units"]["length"] == "nm"
    assert manifest["engines"]["exact2d"]["diagnostics"]["max_relative_norm_drift"] < 1e-10
    assert "node_floor_hits" in manifest["engines"]["sea0"]["diagnostics"]
    assert len(manifest["config_hash"]) == 64


def test_missing_dt_names_field(scenario, tmp_path, capsys):
    path = scenario()
    d = json.loads(path.read_text())
    del d["dt_fs"]
    path.write_text(json.dumps(d, indent=2))
    assert run("simulate", "--scenario", path, "--out", tmp_path / "o") == 2
    assert "dt_fs" in capsys.readouterr().err


def test_bad_value_reports_line(scenario, tmp_path, capsys):
    path = scenario(record_every=0)
    assert run("simulate", "--scenario", path, "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    line = next(i for i, r in enumerate(path.read_text().splitlines(), 1) if '"record_every"' in r)
    assert f"line={line}" in err and "record_every" in err


def test_unstable_dt_fails_before_stepping(scenario, tmp_path, capsys):
    out = tmp_path / "o"
    assert run("simulate", "--scenario", scenario(dt_fs=500.0), "--out", out) == 2
    assert "dt_fs" in capsys.readouterr().err
    assert not out.exists()


def test_bad_flags_exit_two(scenario, tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["simulate", "--out", str(tmp_path)])
    assert info.value.code == 2
    assert run("simulate", "--scenario", tmp_path / "absent.json", "--out", tmp_path) == 2
    assert run("simulate", "--scenario", scenario(), "--out", tmp_path / "o",
               "--engines", "exact2d,warp") == 2


def test_numerical_failure_exits_three(scenario, tmp_path, capsys):
    out = tmp_path / "o"
    assert run("simulate", "--scenario", scenario(n_steps=600), "--out", out,
               "--engines", "exact2d,sea2", "--record-every", "10") == 3
    assert "step" in capsys.readouterr().err
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["engines"]["sea2"]["failure_step"] > 0
    assert manifest["engines"]["exact2d"]["failure"] is None


def test_outputs_are_deterministic_and_round_trip(scenario, tmp_path):
    path = scenario(n_steps=60)
    for name in ("a", "b"):
        assert run("simulate", "--scenario", path, "--out", tmp_path / name,
                   "--engines", "exact2d,sea0,oraclefed", "--record-every", "5") == 0
    for f in ("trajectories_exact2d.csv", "trajectories_sea0.csv",
              "trajectories_oraclefed.csv", "comparison.csv"):
        a, b = (tmp_path / d / f for d in ("a", "b"))
        assert a.read_bytes() == b.read_bytes()
        header, rows = read_csv(a)
        write_csv(tmp_path / "again.csv", header, rows)
        assert (tmp_path / "again.csv").read_bytes() == a.read_bytes()


def test_threads_env_override(scenario, tmp_path, monkeypatch):
    path = scenario(n_steps=40)
    assert run("simulate", "--scenario", path, "--out", tmp_path / "one") == 0
    monkeypatch.setenv("PILOTWAVE_THREADS", "2")
    assert run("simulate", "--scenario", path, "--out", tmp_path / "two", "--threads", "1") == 0
    for f in ("trajectories_sea0.csv", "comparison.csv"):
        assert (tmp_path / "one" / f).read_bytes() == (tmp_path / "two" / f).read_bytes()
    monkeypatch.setenv("PILOTWAVE_THREADS", "many")
    assert run("simulate", "--scenario", path, "--out", tmp_path / "three") == 2


def test_sweep_columns_and_ordering(scenario, tmp_path):
    out = tmp_path / "sw"
    assert run("sweep", "--scenario", scenario(n_steps=200), "--out", out,
               "--sweep-values", "-0.5e12,-1e12,-2e12", "--record-every", "20") == 0
    header, rows = read_csv(out / "deviation_sweep.csv")
    assert header == ["t_fs", "deviation_nm@C=-5e+11", "deviation_nm@C=-1e+12",
                      "deviation_nm@C=-2e+12"]
    assert len(rows) == 11
    assert (out / "comparison_C=-1e+12.csv").exists()
    assert (out / "trajectories_sea0_C=-2e+12.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert all((out / f).exists() for f in manifest["outputs"])


def test_single_value_sweep_equals_simulate(scenario, tmp_path):
    path = scenario(n_steps=80)
    assert run("simulate", "--scenario", path, "--out", tmp_path / "sim",
               "--record-every", "10") == 0
    assert run("sweep", "--scenario", path, "--out", tmp_path / "sw",
               "--sweep-values", "-1e12", "--record-every", "10") == 0
    _, sim = read_csv(tmp_path / "sim" / "comparison.csv")
    _, sw = read_csv(tmp_path / "sw" / "deviation_sweep.csv")
    assert sim == sw


def test_empty_sweep_exits_two(scenario, tmp_path):
    assert run("sweep", "--scenario", scenario(), "--out", tmp_path / "o",
               "--sweep-values", "") == 2
    assert run("sweep", "--scenario", scenario(), "--out", tmp_path / "o",
               "--sweep-values", "1,x") == 2
    assert run("sweep", "--scenario", scenario(), "--out", tmp_path / "o",
               "--sweep-param", "packet1", "--sweep-values", "1") == 2


def test_measure_outputs(tmp_path):
    out = tmp_path / "m"
    assert run("measure", "--model", data_path("measurement.json"), "--out", out,
               "--n-samples", "3000", "--seed", "9") == 0
    header, rows = read_csv(out / "outcomes.csv")
    assert header == ["branch", "count", "frequency", "weight_abs_c_sq"]
    assert sum(r[1] for r in rows) == 3000
    assert np.allclose([r[3] for r in rows], [0.7, 0.2, 0.1])
    header, rows = read_csv(out / "collapse_fidelity.csv")
    assert header == ["sample", "x2_nm", "branch", "fidelity", "ambiguous"]
    assert len(rows) == 3000
    assert min(r[3] for r in rows) > 0.999


def test_measure_seed_reproducible(tmp_path):
    model = data_path("measurement.json")
    for d in ("a", "b"):
        assert run("measure", "--model", model, "--out", tmp_path / d, "--n-samples", "2000") == 0
    assert (tmp_path / "a" / "outcomes.csv").read_bytes() == \
        (tmp_path / "b" / "outcomes.csv").read_bytes()


def test_measure_single_branch_and_equal_weights(tmp_path):
    one = tmp_path / "one.json"
    one.write_text(json.dumps({"coefficients": [0, 1]}))
    assert run("measure", "--model", one, "--out", tmp_path / "o1", "--n-samples", "500") == 0
    _, rows = read_csv(tmp_path / "o1" / "outcomes.csv")
    assert [r[2] for r in rows] == [0.0, 1.0]
    two = tmp_path / "two.json"
    two.write_text(json.dumps({"coefficients": [0.5 ** 0.5, 0.5 ** 0.5]}))
    assert run("measure", "--model", two, "--out", tmp_path / "o2", "--n-samples", "10000") == 0
    _, rows = read_csv(tmp_path / "o2" / "outcomes.csv")
    assert all(abs(r[2] - 0.5) < 0.015 for r in rows)


def test_measure_unresolved_exits_two(tmp_path, capsys):
    model = tmp_path / "blur.json"
    model.write_text(json.dumps({"coefficients": [0.6, 0.8], "separation_widths": 1.0},
                                indent=2))
    assert run("measure", "--model", model, "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    line = next(i for i, r in enumerate(model.read_text().splitlines(), 1)
                if '"separation_widths"' in r)
    assert "separation" in err and f"line={line}" in err


def test_config_hash_is_key_order_independent():
    assert config_hash({"a": 1, "b": [1.5, 2]}) == config_hash({"b": [1.5, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "pilotwave.cli", "--version"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "pilotwave" in r.stdout
