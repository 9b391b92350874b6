import numpy as np
import pytest

from hikf.config import ExperimentConfig
from hikf.experiment import (
    SizeGuardError,
    build_scenario,
    metrics_rows,
    run_filters,
)
from hikf.tomography import save_plume


def _config(**overrides):
    base = dict(
        grid={"nx": 10, "ny": 9},
        acquisition={"n_sources": 3, "n_receivers": 6},
        kernel={"family": "exponential", "variance": 1e-2, "length_scale": 3.0},
        fmm={"n_cheb": 5},
        noise={"snr_db": 40.0},
        filters=["kf", "hikf"],
        steps=4,
        seed=0,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


def test_build_scenario_shapes():
    scn = build_scenario(_config())
    assert scn.grid.m == 90
    assert scn.model.n == 18
    assert scn.record.truth.shape == (4, 90)
    # noise variance solved from the SNR target is applied to the model
    assert scn.model.r_variance == scn.record.noise_variance > 0


def test_build_scenario_rejects_invalid():
    with pytest.raises(ValueError):
        build_scenario(_config(steps=0))


def test_plume_file_input(tmp_path):
    scn = build_scenario(_config())
    path = tmp_path / "plume.txt"
    save_plume(scn.plume, path)
    cfg = _config(plume={"file": str(path)})
    scn2 = build_scenario(cfg)
    assert np.array_equal(scn2.plume.fields, scn.plume.fields)
    # not enough steps in the file
    with pytest.raises(ValueError):
        build_scenario(_config(plume={"file": str(path)}, steps=10))


def test_size_guard_blocks_large_dense_kf():
    cfg = _config(grid={"nx": 200, "ny": 150}, filters=["kf"])
    with pytest.raises(SizeGuardError):
        run_filters(cfg)


def test_metrics_rows_reference_kf():
    scn, runs = run_filters(_config())
    rows = metrics_rows(scn, runs)
    assert len(rows) == 2 * 4
    kf_rows = [r for r in rows if r.startswith("kf,")]
    hikf_rows = [r for r in rows if r.startswith("hikf,")]
    # the kf rows leave the error-vs-kf column empty; hikf rows fill it
    assert all(r.split(",")[3] == "" for r in kf_rows)
    errs = [float(r.split(",")[3]) for r in hikf_rows]
    assert max(errs) < 1e-9
