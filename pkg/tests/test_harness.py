import json
import math
from pathlib import Path

import pytest

from persistlab import _accel
from persistlab.harness import cli
from persistlab.harness.config import ConfigError, ExperimentConfig, config_hash, load_config
from persistlab.harness.runner import COLUMNS, OUT_ENV, ResultRow, read_rows, run_experiment
from persistlab.harness.suites import Criterion, format_line, run_suite
from persistlab.harness.sweep import sweep
from persistlab.simulate import PathBatch
from oracles import sparre_andersen

DATA = Path(__file__).parent / "data"


def test_columns_follow_result_row():
    assert COLUMNS == ["experiment_id", "abscissa", "value", "stderr", "method", "seed",
                       "wall_time_ms"]


@pytest.mark.parametrize("backend", ["compiled", "python"])
def test_golden_csv_bytes(tmp_path, backend):
    if backend == "compiled" and _accel.BACKEND != "compiled":
        pytest.skip("compiled extension not built")
    old = _accel.use(backend)
    try:
        out = tmp_path / "g.csv"
        run_experiment(str(DATA / "golden_config.json"), out=out)
    finally:
        _accel.use(old)
    assert out.read_bytes() == (DATA / "golden.csv").read_bytes()


def test_rerun_identical_and_sidecar(tmp_path):
    cfg = {"experiment_id": "iid", "kernel": "delta", "ladder": [1, 2, 4], "R": 5000,
           "seed": 3, "method": "both", "budget": 4096}
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    rows = run_experiment(cfg, out=a)
    run_experiment(cfg, out=b, threads=2)
    assert a.read_bytes() == b.read_bytes()
    assert [(r.abscissa, r.method) for r in rows] == [
        (1, "mc"), (1, "orthant-qmc"), (2, "mc"), (2, "orthant-qmc"),
        (4, "mc"), (4, "orthant-qmc")]
    side = json.loads(Path(str(a) + ".json").read_text())
    assert side["config_sha256"] == config_hash(load_config(cfg))
    assert side["rng_scheme"] == "splitmix64-ctr/v1"
    assert len(side["points"]) == 6
    assert read_rows(a) == rows
    for r in rows:
        if r.abscissa > 1:
            assert abs(math.exp(r.value) - sparre_andersen(int(r.abscissa))) < 0.02


def test_orthant_iid_exact_value(tmp_path):
    cfg = {"experiment_id": "q", "kernel": "delta", "ladder": [4], "method": "orthant-qmc",
           "budget": 1 << 16}
    row = run_experiment(cfg)[0]
    assert math.exp(row.value) == pytest.approx(70 / 256, rel=1e-3)


def test_grid_experiment_methods_agree():
    cfg = {"experiment_id": "ou", "correlation": "ou:alpha=1", "delta": 0.25,
           "ladder": [1.0, 2.0], "R": 100_000, "seed": 1, "method": "both",
           "budget": 1 << 15}
    rows = run_experiment(cfg)
    mc = {r.abscissa: r for r in rows if r.method == "mc"}
    qm = {r.abscissa: r for r in rows if r.method == "orthant-qmc"}
    for T in (1.0, 2.0):
        assert abs(mc[T].value - qm[T].value) <= 4 * math.hypot(mc[T].stderr, qm[T].stderr)


def test_timing_column_opt_in():
    cfg = {"experiment_id": "t", "kernel": "delta", "ladder": [2, 4], "R": 2000}
    assert all(r.wall_time_ms == 0.0 for r in run_experiment(cfg))
    assert all(r.wall_time_ms > 0 for r in run_experiment(cfg, record_timing=True))


def test_config_errors_report_lines(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{\n  "experiment_id": "x",\n  "kernel": "delta",\n'
                    '  "ladder": [4, 2]\n}\n')
    with pytest.raises(ConfigError) as info:
        load_config(str(path))
    assert info.value.line == 4
    assert str(info.value).startswith(f"{path}:4:")
    with pytest.raises(ConfigError, match="invalid JSON"):
        load_config('{"experiment_id": ')
    with pytest.raises(ConfigError, match="unknown field"):
        load_config({"experiment_id": "x", "kernel": "delta", "ladder": [1], "colour": 1})
    with pytest.raises(ConfigError, match="missing"):
        load_config({"kernel": "delta"})


@pytest.mark.parametrize("patch,match", [
    ({"R": 10}, "R must"),
    ({"method": "exact"}, "method"),
    ({"kernel": "fgn:H=2"}, "fgn"),
    ({"ladder": [1.5, 3]}, "integers"),
    ({"delta": 0.1}, "delta applies"),
    ({"correlation": "ou:alpha=1"}, "exactly one"),
    ({"seed": -1}, "seed"),
    ({"budget": 10}, "budget"),
])
def test_config_validation(patch, match):
    base = {"experiment_id": "x", "kernel": "delta", "ladder": [2, 4]}
    with pytest.raises(ConfigError, match=match):
        load_config(dict(base, **patch))


def test_grid_config_validation():
    base = {"experiment_id": "x", "correlation": "ou:alpha=1", "ladder": [1.0, 2.0]}
    with pytest.raises(ConfigError, match="delta"):
        load_config(base)
    with pytest.raises(ConfigError, match="multiple"):
        load_config(dict(base, delta=0.3))
    cfg = load_config(dict(base, delta=0.25))
    assert isinstance(cfg, ExperimentConfig) and cfg.ladder_kind == "T"


def test_sweep_trend(tmp_path):
    rows = sweep("H", [0.6, 0.8], R=50_000, ladder=[8, 16, 32, 64, 128], out=tmp_path / "s.csv")
    assert [r.abscissa for r in rows] == [0.6, 0.8]
    # theta(0, H) = 1 - H decreases in H
    assert rows[0].value > rows[1].value
    assert (tmp_path / "s.csv").exists()
    grid = sweep("alpha", [0.5, 1.0], ladder=[2.0, 4.0, 6.0], delta=0.1, budget=1 << 13)
    assert grid[0].value < grid[1].value
    with pytest.raises(ValueError):
        sweep("H", [0.4])
    with pytest.raises(ValueError):
        sweep("beta", [1.0])


def test_suite_runner_and_format():
    res = run_suite("a4")
    assert res.passed and res.suite == "A4"
    line = format_line(res)
    assert line.startswith("A4 PASS ")
    assert format_line(Criterion("A0", False, "x", "y")).startswith("A0 FAIL x (expected y)")
    with pytest.raises(KeyError):
        run_suite("A11")


# -- command line ------------------------------------------------------------

def test_cli_special(capsys):
    assert cli.main(["special", "selberg", "--p", "0", "--H", "0.75"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "function,params,value,error_estimate"
    name, params, value, err = out[1].split(",")
    assert name == "selberg_f11" and float(value) == pytest.approx(1 / (0.75 * 0.5))
    assert cli.main(["special", "fph", "--p", "0.5", "--b", "1,2"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3
    assert cli.main(["special", "bounds", "--tau", "1"]) == 0
    assert "c_ph_upper" in capsys.readouterr().out
    assert cli.main(["special", "dalpha", "--alpha", "0.5", "--kernel", "delta",
                     "--tau", "2"]) == 0
    row = capsys.readouterr().out.splitlines()[1].split(",")
    assert float(row[2]) == pytest.approx(math.exp(-1.0))
    assert cli.main(["special", "psi", "--alpha", "0", "--x", "3"]) == 0
    assert cli.main(["special", "cph", "--tau", "0.5,1"]) == 0


def test_cli_simulate_dump(tmp_path, capsys):
    out = tmp_path / "p.bin"
    assert cli.main(["simulate", "--kernel", "fgn:H=0.7", "--n", "16", "--reps", "8",
                     "--seed", "5", "--out", str(out)]) == 0
    b = PathBatch.load(out)
    assert b.values.shape == (8, 16) and b.seed == 5
    # globals accepted before the subcommand too
    out2 = tmp_path / "q.bin"
    assert cli.main(["--seed", "5", "--reps", "8", "--threads", "3", "--out", str(out2),
                     "simulate", "--kernel", "fgn:H=0.7", "--n", "16"]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_cli_estimate_env_out_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "res"))
    assert cli.main(["estimate", "--id", "e1", "--kernel", "delta", "--ladder", "2,4",
                     "--reps", "2000"]) == 0
    assert (tmp_path / "res" / "e1.csv").exists()
    text = capsys.readouterr().out
    assert text.startswith(",".join(COLUMNS))
    assert cli.main(["estimate", "--config", str(DATA / "golden_config.json"),
                     "--out", str(tmp_path / "g.csv")]) == 0
    assert (tmp_path / "g.csv").read_bytes() == (DATA / "golden.csv").read_bytes()


def test_cli_errors(capsys):
    assert cli.main(["estimate", "--kernel", "delta"]) == 2
    assert cli.main(["estimate", "--kernel", "delta", "--ladder", "2,4", "--reps", "5"]) == 2
    assert "R must" in capsys.readouterr().err
    assert cli.main(["--threads", "0", "special", "psi"]) == 2
    assert cli.main(["reproduce", "A99"]) == 2
    with pytest.raises(SystemExit):
        cli.main(["--seed", "-3", "special", "psi"])


def test_cli_reproduce_exit_codes(monkeypatch, capsys):
    assert cli.main(["reproduce", "A4", "A5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("A4 PASS") and lines[1].startswith("A5 PASS")
    assert lines[-1] == "2/2 criteria passed"
    from persistlab.harness import suites

    monkeypatch.setitem(suites.SUITES, "A4", lambda **_: Criterion("A4", False, "m", "e"))
    assert cli.main(["reproduce", "A4"]) == 1
    assert "failed: A4" in capsys.readouterr().out


def test_cli_sweep(tmp_path, capsys):
    out = tmp_path / "sw.csv"
    assert cli.main(["sweep", "--parameter", "alpha", "--values", "1", "--ladder", "2,4,6",
                     "--delta", "0.1", "--budget", "8192", "--out", str(out)]) == 0
    rows = read_rows(out)
    assert len(rows) == 1 and isinstance(rows[0], ResultRow)


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "persistlab", "special", "psi", "--alpha", "1",
                          "--x", "2"], capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[1].startswith("psi,")
