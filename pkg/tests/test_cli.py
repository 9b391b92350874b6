import json

import numpy as np
import pytest
import yaml

from hikf.cli import main

CONFIG = {
    "grid": {"nx": 12, "ny": 10},
    "acquisition": {"n_sources": 3, "n_receivers": 8},
    "kernel": {"family": "exponential", "variance": 1e-2, "length_scale": 3.0},
    "fmm": {"n_cheb": 5},
    "noise": {"snr_db": 40.0},
    "filters": ["kf", "hikf", "enkf"],
    "ensemble_sizes": [20],
    "steps": 4,
    "seed": 3,
}


def _write(tmp_path, data, name="config.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_validate_ok(tmp_path, capsys):
    path = _write(tmp_path, CONFIG)
    assert main(["validate", path]) == 0
    assert "valid" in capsys.readouterr().out


def test_validate_bad_config(tmp_path, capsys):
    path = _write(tmp_path, dict(CONFIG, steps=0))
    assert main(["validate", path]) == 2
    assert "steps" in capsys.readouterr().out


def test_run_writes_report(tmp_path, capsys):
    path = _write(tmp_path, CONFIG)
    out = tmp_path / "out"
    assert main(["run", path, "--out-dir", str(out)]) == 0

    metrics = (out / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "filter,step,error_vs_truth,error_vs_kf,effective_rank"
    labels = {line.split(",")[0] for line in metrics[1:]}
    assert labels == {"kf", "hikf", "enkf_20"}
    # 4 steps per filter
    assert len(metrics) - 1 == 3 * 4

    summary = json.loads((out / "summary.json").read_text())
    assert summary["grid"] == {"nx": 12, "ny": 10, "m": 120}
    assert summary["steps"] == 4
    assert set(summary["filters"]) == {"kf", "hikf", "enkf_20"}
    for entry in summary["filters"].values():
        assert entry["failed"] is None
        assert entry["final_error_vs_truth"] >= 0.0

    for label in ("kf", "hikf", "enkf_20"):
        assert (out / f"state_{label}.txt").exists()
        assert (out / f"variance_{label}.txt").exists()


def test_run_rejects_invalid_config(tmp_path, capsys):
    path = _write(tmp_path, dict(CONFIG, filters=["bogus"]))
    assert main(["run", path]) == 2
    assert "error" in capsys.readouterr().err


def test_run_seed_override_changes_data(tmp_path):
    path = _write(tmp_path, CONFIG)
    main(["run", path, "--out-dir", str(tmp_path / "a"), "--seed", "1"])
    main(["run", path, "--out-dir", str(tmp_path / "b"), "--seed", "2"])
    a = (tmp_path / "a" / "metrics.csv").read_text()
    b = (tmp_path / "b" / "metrics.csv").read_text()
    assert a != b


def test_repeat_runs_are_byte_identical(tmp_path):
    path = _write(tmp_path, CONFIG)
    main(["run", path, "--out-dir", str(tmp_path / "a")])
    main(["run", path, "--out-dir", str(tmp_path / "b")])
    a = (tmp_path / "a" / "metrics.csv").read_bytes()
    b = (tmp_path / "b" / "metrics.csv").read_bytes()
    assert a == b


def test_bench_fmm_small(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    assert main(["bench-fmm", "--sizes", "600", "--n-cheb", "4", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("m,n_cheb,")
    assert len(lines) == 2
    err = float(lines[1].split(",")[-1])
    assert err < 1e-4


def test_bench_filters_small(tmp_path, capsys):
    path = _write(tmp_path, dict(CONFIG, filters=["kf", "hikf"]))
    assert main(["bench-filters", path]) == 0
    outp = capsys.readouterr().out
    assert "kf" in outp and "hikf" in outp
