import pytest
import yaml

from hikf.config import ExperimentConfig, load_config, validate, validate_config

VALID = {
    "grid": {"nx": 12, "ny": 10},
    "acquisition": {"n_sources": 3, "n_receivers": 8},
    "kernel": {"family": "exponential", "variance": 1e-2, "length_scale": 3.0},
    "fmm": {"n_cheb": 5},
    "noise": {"snr_db": 40.0},
    "filters": ["kf", "hikf"],
    "steps": 5,
    "seed": 1,
}


def _write(tmp_path, data):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data))
    return path


def test_valid_config_has_no_diagnostics(tmp_path):
    path = _write(tmp_path, VALID)
    assert validate_config(path) == []
    cfg = load_config(path)
    assert cfg.grid["nx"] == 12
    assert cfg.filters == ["kf", "hikf"]


def test_unknown_top_level_key_rejected(tmp_path):
    data = dict(VALID, extra_knob=1)
    path = _write(tmp_path, data)
    with pytest.raises(ValueError):
        load_config(path)
    diags = validate_config(path)
    assert len(diags) == 1 and diags[0].field == "<file>"


def test_missing_file_reported(tmp_path):
    diags = validate_config(tmp_path / "absent.yaml")
    assert len(diags) == 1 and diags[0].field == "<file>"


def test_every_violation_is_collected():
    cfg = ExperimentConfig(
        grid={"nx": 0, "ny": 10},
        kernel={"family": "triangular"},
        fmm={"n_cheb": 1},
        noise={},
        filters=["kf", "bogus"],
        steps=0,
    )
    fields = {d.field for d in validate(cfg)}
    assert "grid.nx" in fields
    assert "kernel.family" in fields
    assert "fmm.n_cheb" in fields
    assert "noise" in fields
    assert "filters" in fields
    assert "steps" in fields


def test_enkf_requires_ensemble_sizes():
    cfg = ExperimentConfig(**{**VALID, "filters": ["enkf"]})
    fields = {d.field for d in validate(cfg)}
    assert "ensemble_sizes" in fields

    cfg = ExperimentConfig(**{**VALID, "filters": ["enkf"], "ensemble_sizes": [1]})
    assert any(d.field == "ensemble_sizes" for d in validate(cfg))

    cfg = ExperimentConfig(**{**VALID, "filters": ["enkf"], "ensemble_sizes": [50]})
    assert validate(cfg) == []


def test_logarithm_kernel_needs_negative_amplitude():
    cfg = ExperimentConfig(**{**VALID, "kernel": {"family": "logarithm"}})
    assert any(d.field == "kernel.log_amplitude" for d in validate(cfg))
    cfg = ExperimentConfig(
        **{**VALID, "kernel": {"family": "logarithm", "log_amplitude": -1.0}}
    )
    assert validate(cfg) == []


def test_noise_needs_one_of_snr_or_variance():
    cfg = ExperimentConfig(**{**VALID, "noise": {}})
    assert any(d.field == "noise" for d in validate(cfg))
    cfg = ExperimentConfig(**{**VALID, "noise": {"r_variance": -1.0}})
    assert any(d.field == "noise.r_variance" for d in validate(cfg))
    cfg = ExperimentConfig(**{**VALID, "noise": {"r_variance": 1e-6}})
    assert validate(cfg) == []
