"""Declarative experiment configuration: schema, parsing, validation.

Configs are YAML (JSON parses through the same loader).  ``validate_config``
collects every violation with its field path instead of stopping at the
first, so a config can be fixed in one pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import yaml

VALID_FILTERS = ("kf", "hikf", "enkf")
VALID_FAMILIES = ("gaussian", "exponential", "logarithm")
VALID_PRECOMPUTE = ("fmm", "dense")

# dense-KF refusal threshold; quadratic memory above this needs an explicit override
DENSE_KF_MAX_CELLS = 20_000


@dataclass(frozen=True)
class Diagnostic:
    field: str
    message: str

    def __str__(self):
        return f"{self.field}: {self.message}"


@dataclass
class ExperimentConfig:
    grid: dict = dc_field(default_factory=dict)
    acquisition: dict = dc_field(default_factory=dict)
    kernel: dict = dc_field(default_factory=dict)
    fmm: dict = dc_field(default_factory=dict)
    noise: dict = dc_field(default_factory=dict)
    plume: dict = dc_field(default_factory=dict)
    filters: list = dc_field(default_factory=list)
    ensemble_sizes: list = dc_field(default_factory=list)
    steps: int = 1
    seed: int = 0
    alpha: float = 0.0
    hikf_precompute: str = "fmm"
    snapshot_every: int = 1
    spectrum_max_dim: int = 2000
    output_dir: str = "out"


_KNOWN_KEYS = set(ExperimentConfig.__dataclass_fields__)


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: top level must be a mapping")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ValueError(f"{path}: unknown top-level keys {sorted(unknown)}")
    return ExperimentConfig(**raw)


def _check_positive(diags, mapping, section, key, default=None, integer=False, strict=True):
    value = mapping.get(key, default)
    if value is None:
        diags.append(Diagnostic(f"{section}.{key}", "missing required field"))
        return None
    if integer and not isinstance(value, int):
        diags.append(Diagnostic(f"{section}.{key}", "must be an integer"))
        return None
    if not isinstance(value, (int, float)):
        diags.append(Diagnostic(f"{section}.{key}", "must be a number"))
        return None
    if strict and value <= 0:
        diags.append(Diagnostic(f"{section}.{key}", "must be positive"))
        return None
    if not strict and value < 0:
        diags.append(Diagnostic(f"{section}.{key}", "must be nonnegative"))
        return None
    return value


def validate(cfg: ExperimentConfig) -> list[Diagnostic]:
    """Return every violated invariant with its field path; empty means valid."""
    diags: list[Diagnostic] = []

    nx = _check_positive(diags, cfg.grid, "grid", "nx", integer=True)
    ny = _check_positive(diags, cfg.grid, "grid", "ny", integer=True)
    _check_positive(diags, cfg.grid, "grid", "dx", default=1.0)
    _check_positive(diags, cfg.grid, "grid", "dy", default=1.0)

    _check_positive(diags, cfg.acquisition, "acquisition", "n_sources", default=6, integer=True)
    _check_positive(diags, cfg.acquisition, "acquisition", "n_receivers", default=48, integer=True)

    family = cfg.kernel.get("family", "gaussian")
    if family not in VALID_FAMILIES:
        diags.append(Diagnostic("kernel.family", f"must be one of {VALID_FAMILIES}"))
    if family == "logarithm":
        amp = cfg.kernel.get("log_amplitude")
        if amp is None or not amp < 0:
            diags.append(Diagnostic("kernel.log_amplitude", "logarithm family requires a negative amplitude"))
    else:
        _check_positive(diags, cfg.kernel, "kernel", "variance", default=1.0, strict=False)
        _check_positive(diags, cfg.kernel, "kernel", "length_scale", default=1.0)
        power = cfg.kernel.get("power")
        if power is not None and not (0 < power <= 2):
            diags.append(Diagnostic("kernel.power", "must lie in (0, 2]"))

    n_cheb = cfg.fmm.get("n_cheb", 5)
    if not isinstance(n_cheb, int) or not (2 <= n_cheb <= 12):
        diags.append(Diagnostic("fmm.n_cheb", "must be an integer in [2, 12]"))
    _check_positive(diags, cfg.fmm, "fmm", "max_leaf_points", default=64, integer=True)

    snr = cfg.noise.get("snr_db")
    r_var = cfg.noise.get("r_variance")
    if snr is None and r_var is None:
        diags.append(Diagnostic("noise", "set either snr_db or r_variance"))
    if r_var is not None and r_var < 0:
        diags.append(Diagnostic("noise.r_variance", "must be nonnegative"))

    if not cfg.filters:
        diags.append(Diagnostic("filters", "select at least one of kf, hikf, enkf"))
    for f in cfg.filters:
        if f not in VALID_FILTERS:
            diags.append(Diagnostic("filters", f"unknown filter {f!r}"))
    if "enkf" in cfg.filters:
        if not cfg.ensemble_sizes:
            diags.append(Diagnostic("ensemble_sizes", "required when enkf is selected"))
        for N in cfg.ensemble_sizes:
            if not isinstance(N, int) or N < 2:
                diags.append(Diagnostic("ensemble_sizes", f"ensemble size must be an integer >= 2, got {N!r}"))

    if not isinstance(cfg.steps, int) or cfg.steps < 1:
        diags.append(Diagnostic("steps", "must be an integer >= 1"))
    if not isinstance(cfg.seed, int):
        diags.append(Diagnostic("seed", "must be an integer"))
    if cfg.alpha < 0:
        diags.append(Diagnostic("alpha", "must be nonnegative"))
    if cfg.hikf_precompute not in VALID_PRECOMPUTE:
        diags.append(Diagnostic("hikf_precompute", f"must be one of {VALID_PRECOMPUTE}"))
    if not isinstance(cfg.snapshot_every, int) or cfg.snapshot_every < 0:
        diags.append(Diagnostic("snapshot_every", "must be an integer >= 0 (0 disables snapshots)"))

    if nx and ny:
        blobs = cfg.plume.get("blobs")
        if blobs is not None:
            for i, blob in enumerate(blobs):
                for key in ("amplitude", "sigma_x", "sigma_y", "start", "end"):
                    if key not in blob:
                        diags.append(Diagnostic(f"plume.blobs[{i}].{key}", "missing required field"))
        bt = cfg.plume.get("breakthrough_step")
        if bt is not None and (not isinstance(bt, int) or bt < 1):
            diags.append(Diagnostic("plume.breakthrough_step", "must be an integer >= 1"))

    return diags


def validate_config(path) -> list[Diagnostic]:
    try:
        cfg = load_config(path)
    except (OSError, ValueError, yaml.YAMLError, TypeError) as exc:
        return [Diagnostic("<file>", str(exc))]
    return validate(cfg)
