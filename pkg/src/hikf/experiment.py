"""Experiment driver: build a shared scenario, run filters, collect reports.

Every selected filter consumes the identical seeded truth and observation
record, so differences in the emitted metrics come from the filter alone.
Filters run sequentially and only the predict/update work is timed; metric
extraction happens outside the clock.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from hikf import filters as flt
from hikf.config import DENSE_KF_MAX_CELLS, ExperimentConfig, validate
from hikf.fmm import FmmConfig, build_tree
from hikf.grids import Grid2D
from hikf.kernels import KernelSpec, dense_gram
from hikf.metrics import (
    effective_rank,
    enkf_posterior_spectrum,
    kf_posterior_spectrum,
    relative_error,
    storage_bytes,
)
from hikf.ssm import SimulatedRecord, StateSpaceModel, simulate_truth_and_data
from hikf.tomography import (
    BlobSpec,
    PlumeScenario,
    build_ray_operator,
    default_acquisition,
    load_plume,
    make_plume,
)

SCHEMA_VERSION = 1

_CSV_HEADER = "filter,step,error_vs_truth,error_vs_kf,effective_rank"


class SizeGuardError(RuntimeError):
    """Dense-KF run refused: quadratic memory at this size needs an override."""


@dataclass
class Scenario:
    grid: Grid2D
    model: StateSpaceModel
    plume: PlumeScenario
    record: SimulatedRecord
    kernel: KernelSpec
    fmm_config: FmmConfig
    snr_db: float | None


@dataclass
class FilterRun:
    label: str
    means: np.ndarray = field(repr=False)  # (T, m) posterior means
    final_variance: np.ndarray | None = field(default=None, repr=False)
    effective_ranks: list = field(default_factory=list)  # per step; None if unavailable
    final_spectrum: np.ndarray | None = field(default=None, repr=False)
    precompute_seconds: float = 0.0
    online_seconds: float = 0.0
    storage: dict = field(default_factory=dict)
    failed: str | None = None


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def build_kernel(cfg: ExperimentConfig) -> KernelSpec:
    k = cfg.kernel
    return KernelSpec(
        family=k.get("family", "gaussian"),
        variance=k.get("variance", 1.0),
        length_scale=k.get("length_scale", 1.0),
        power=k.get("power"),
        log_amplitude=k.get("log_amplitude"),
    )


def default_blobs(grid: Grid2D) -> list[BlobSpec]:
    """A single plume advancing from the source well toward the receiver well."""
    xmin, xmax, ymin, ymax = grid.extent
    width, height = xmax - xmin, ymax - ymin
    ymid = 0.5 * (ymin + ymax)
    return [
        BlobSpec(
            amplitude=1.0,
            sigma_x=0.12 * width,
            sigma_y=0.15 * height,
            start=(xmin + 0.15 * width, ymid),
            end=(xmax - 0.2 * width, ymid - 0.1 * height),
            growth=1.6,
        )
    ]


def build_scenario(cfg: ExperimentConfig) -> Scenario:
    diags = validate(cfg)
    if diags:
        raise ValueError("invalid config:\n" + "\n".join(str(d) for d in diags))
    g = cfg.grid
    grid = Grid2D(
        nx=g["nx"],
        ny=g["ny"],
        dx=g.get("dx", 1.0),
        dy=g.get("dy", 1.0),
        origin=(g.get("origin_x", 0.0), g.get("origin_y", 0.0)),
    )
    acq = default_acquisition(
        grid,
        n_sources=cfg.acquisition.get("n_sources", 6),
        n_receivers=cfg.acquisition.get("n_receivers", 48),
        source_x=cfg.acquisition.get("source_x"),
        receiver_x=cfg.acquisition.get("receiver_x"),
    )
    H = build_ray_operator(grid, acq)
    kernel = build_kernel(cfg)
    fmm_config = FmmConfig(
        n_cheb=cfg.fmm.get("n_cheb", 5),
        max_leaf_points=cfg.fmm.get("max_leaf_points", 64),
    )

    if cfg.plume.get("file"):
        plume = load_plume(cfg.plume["file"])
        if plume.n_steps < cfg.steps or plume.m != grid.m:
            raise ValueError("plume file does not cover the configured grid/steps")
        plume = PlumeScenario(plume.fields[: cfg.steps + 1])
    else:
        raw = cfg.plume.get("blobs")
        if raw:
            blobs = [
                BlobSpec(
                    amplitude=b["amplitude"],
                    sigma_x=b["sigma_x"],
                    sigma_y=b["sigma_y"],
                    start=tuple(b["start"]),
                    end=tuple(b["end"]),
                    growth=b.get("growth", 1.0),
                )
                for b in raw
            ]
        else:
            blobs = default_blobs(grid)
        breakthrough = cfg.plume.get("breakthrough_step", max(1, round(0.4 * cfg.steps)))
        plume = make_plume(grid, blobs, cfg.steps, breakthrough_step=breakthrough)

    snr_db = cfg.noise.get("snr_db")
    model = StateSpaceModel(
        grid=grid,
        H=H,
        q_kernel=kernel,
        r_variance=cfg.noise.get("r_variance", 0.0),
        alpha=cfg.alpha,
    )
    record = simulate_truth_and_data(model, plume, seed=[cfg.seed, 0], snr_db=snr_db)
    # filters use the variance actually applied to the data
    model = StateSpaceModel(
        grid=grid,
        H=H,
        q_kernel=kernel,
        r_variance=record.noise_variance,
        alpha=cfg.alpha,
    )
    return Scenario(
        grid=grid,
        model=model,
        plume=plume,
        record=record,
        kernel=kernel,
        fmm_config=fmm_config,
        snr_db=snr_db,
    )


# ----------------------------------------------------------------------
# per-filter runners
# ----------------------------------------------------------------------


def run_kf(scn: Scenario, spectrum: bool) -> FilterRun:
    model = scn.model
    T = scn.record.truth.shape[0]
    run = FilterRun(label="kf", means=np.zeros((T, model.m)))
    t0 = time.perf_counter()
    Q = dense_gram(model.q_kernel, model.grid.cell_centers().coords)
    run.precompute_seconds = time.perf_counter() - t0
    state = flt.kf_init(model)
    online = 0.0
    for t in range(T):
        t0 = time.perf_counter()
        state = flt.kf_predict(state, Q)
        state = flt.kf_update(state, model.H, model.r_variance, scn.record.observations[t])
        online += time.perf_counter() - t0
        run.means[t] = state.mean
        if spectrum:
            w = kf_posterior_spectrum(state.cov)
            run.effective_ranks.append(effective_rank(w))
            if t == T - 1:
                run.final_spectrum = w
        else:
            run.effective_ranks.append(None)
    run.online_seconds = online
    run.final_variance = np.diag(state.cov).copy()
    run.storage = storage_bytes("kf", model.m)
    return run


def run_hikf(scn: Scenario, mode: str) -> FilterRun:
    model = scn.model
    T = scn.record.truth.shape[0]
    run = FilterRun(label="hikf", means=np.zeros((T, model.m)))
    t0 = time.perf_counter()
    if mode == "dense":
        pre = flt.hikf_precompute_dense(model)
    else:
        tree = build_tree(model.grid.cell_centers(), model.q_kernel, scn.fmm_config)
        pre = flt.hikf_precompute_fmm(model, tree)
    run.precompute_seconds = time.perf_counter() - t0
    state = flt.hikf_init(model)
    online = 0.0
    for t in range(T):
        t0 = time.perf_counter()
        state = flt.hikf_predict(state, pre)
        state = flt.hikf_update(state, model.H, model.r_variance, scn.record.observations[t])
        online += time.perf_counter() - t0
        run.means[t] = state.mean
        run.effective_ranks.append(None)  # full spectrum not reconstructible from (C, variance)
    run.online_seconds = online
    run.final_variance = state.variance.copy()
    run.storage = storage_bytes("hikf", model.m, n=model.n)
    return run


def run_enkf(scn: Scenario, size: int, seed_tag: int, base_seed: int) -> FilterRun:
    model = scn.model
    T = scn.record.truth.shape[0]
    run = FilterRun(label=f"enkf_{size}", means=np.zeros((T, model.m)))
    t0 = time.perf_counter()
    sampler = flt.QSampler(model)
    run.precompute_seconds = time.perf_counter() - t0
    rng = np.random.default_rng([base_seed, seed_tag])
    state = flt.enkf_init(model, size, rng)
    online = 0.0
    for t in range(T):
        t0 = time.perf_counter()
        state = flt.enkf_step(
            state, sampler, model.H, model.r_variance, scn.record.observations[t], rng
        )
        online += time.perf_counter() - t0
        mean, variance, _ = flt.enkf_statistics(state)
        run.means[t] = mean
        w = enkf_posterior_spectrum(state)
        run.effective_ranks.append(effective_rank(w))
        if t == T - 1:
            run.final_spectrum = w
            run.final_variance = variance
    run.online_seconds = online
    run.storage = storage_bytes("enkf", model.m, ensemble_size=size)
    return run


def run_filters(cfg: ExperimentConfig, override_size_guard: bool = False) -> tuple[Scenario, list[FilterRun]]:
    scn = build_scenario(cfg)
    if "kf" in cfg.filters and scn.grid.m > DENSE_KF_MAX_CELLS and not override_size_guard:
        raise SizeGuardError(
            f"dense KF at m={scn.grid.m} exceeds the {DENSE_KF_MAX_CELLS}-cell guard; "
            "pass --override-size-guard to force"
        )
    spectrum = scn.grid.m <= cfg.spectrum_max_dim
    runs: list[FilterRun] = []
    for name in cfg.filters:
        if name == "kf":
            runs.append(run_kf(scn, spectrum))
        elif name == "hikf":
            runs.append(run_hikf(scn, cfg.hikf_precompute))
        elif name == "enkf":
            for i, N in enumerate(cfg.ensemble_sizes):
                runs.append(run_enkf(scn, N, seed_tag=1 + i, base_seed=cfg.seed))
    return scn, runs


# ----------------------------------------------------------------------
# report emission
# ----------------------------------------------------------------------


def metrics_rows(scn: Scenario, runs: list[FilterRun]) -> list[str]:
    kf_means = next((r.means for r in runs if r.label == "kf"), None)
    rows = []
    for run in runs:
        for t in range(run.means.shape[0]):
            err_truth = relative_error(run.means[t], scn.record.truth[t])
            err_kf = None
            if kf_means is not None and run.label != "kf":
                err_kf = relative_error(run.means[t], kf_means[t])
            rank = run.effective_ranks[t] if t < len(run.effective_ranks) else None
            rows.append(
                f"{run.label},{t + 1},{_fmt(err_truth)},{_fmt(err_kf)},{_fmt(rank)}"
            )
    return rows


def write_report(cfg: ExperimentConfig, scn: Scenario, runs: list[FilterRun], out_dir) -> dict:
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    rows = metrics_rows(scn, runs)
    (out / "metrics.csv").write_text(_CSV_HEADER + "\n" + "\n".join(rows) + "\n")

    if cfg.snapshot_every > 0:
        T = scn.record.truth.shape[0]
        for run in runs:
            steps = [t for t in range(T) if (t + 1) % cfg.snapshot_every == 0 or t == T - 1]
            with open(out / f"state_{run.label}.txt", "w") as fh:
                fh.write("# step cell value\n")
                for t in steps:
                    for k, v in enumerate(run.means[t]):
                        fh.write(f"{t + 1} {k} {_fmt(v)}\n")

    summary = {
        "schema_version": SCHEMA_VERSION,
        "grid": {"nx": scn.grid.nx, "ny": scn.grid.ny, "m": scn.grid.m},
        "observations_per_step": scn.model.n,
        "steps": int(scn.record.truth.shape[0]),
        "seed": cfg.seed,
        "rng": scn.record.rng_algorithm,
        "noise": {
            "snr_db_target": scn.snr_db,
            "variance": scn.record.noise_variance,
            "realized_snr_db": scn.record.realized_snr_db
            if np.isfinite(scn.record.realized_snr_db)
            else None,
        },
        "filters": {},
    }
    for run in runs:
        entry = {
            "precompute_seconds": run.precompute_seconds,
            "online_seconds": run.online_seconds,
            "storage_bytes": run.storage,
            "final_error_vs_truth": relative_error(run.means[-1], scn.record.truth[-1]),
            "failed": run.failed,
        }
        kf_means = next((r.means for r in runs if r.label == "kf"), None)
        if kf_means is not None and run.label != "kf":
            entry["final_error_vs_kf"] = relative_error(run.means[-1], kf_means[-1])
        summary["filters"][run.label] = entry
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")

    for run in runs:
        if run.final_variance is not None:
            np.savetxt(
                out / f"variance_{run.label}.txt",
                np.column_stack([np.arange(scn.grid.m), run.final_variance]),
                fmt=("%d", "%.17g"),
                header="cell variance",
            )
        if run.final_spectrum is not None:
            np.savetxt(
                out / f"spectrum_{run.label}.txt",
                run.final_spectrum,
                fmt="%.17g",
                header="posterior covariance eigenvalues, descending",
            )
    return summary


def run_experiment(cfg: ExperimentConfig, out_dir=None, override_size_guard: bool = False) -> dict:
    scn, runs = run_filters(cfg, override_size_guard=override_size_guard)
    return write_report(cfg, scn, runs, out_dir or cfg.output_dir)


# ----------------------------------------------------------------------
# benchmarks
# ----------------------------------------------------------------------


def bench_fmm(
    sizes=(10_000, 40_000),
    n_chebs=(5, 6, 7),
    seed: int = 0,
    length_scale: float = 3.0,
    dense_max: int = 20_000,
) -> list[dict]:
    """Accuracy/time sweep of the fast matvec on random unit-square points."""
    from hikf.grids import PointSet
    from hikf.kernels import eval_cross

    rng = np.random.default_rng(seed)
    spec = KernelSpec("gaussian", variance=1.0, length_scale=length_scale)
    rows = []
    for m in sizes:
        pts = PointSet(rng.random((m, 2)))
        v = rng.standard_normal(m)
        v /= np.linalg.norm(v)
        dense_u = None
        dense_time = None
        if m <= dense_max:
            t0 = time.perf_counter()
            dense_u = np.zeros(m)
            for i in range(0, m, 2000):
                dense_u[i : i + 2000] = eval_cross(spec, pts.coords[i : i + 2000], pts.coords) @ v
            dense_time = time.perf_counter() - t0
        for n_cheb in n_chebs:
            t0 = time.perf_counter()
            tree = build_tree(pts, spec, FmmConfig(n_cheb=n_cheb))
            build_time = time.perf_counter() - t0
            tree.matvec(v)  # warm
            t0 = time.perf_counter()
            u = tree.matvec(v)
            matvec_time = time.perf_counter() - t0
            err = None
            if dense_u is not None:
                err = float(np.linalg.norm(u - dense_u) / np.linalg.norm(dense_u))
            rows.append(
                {
                    "m": m,
                    "n_cheb": n_cheb,
                    "build_seconds": build_time,
                    "matvec_seconds": matvec_time,
                    "dense_matvec_seconds": dense_time,
                    "relative_error": err,
                }
            )
    return rows


def bench_filters(cfg: ExperimentConfig, override_size_guard: bool = False) -> list[dict]:
    """Timing/storage comparison of the configured filters on one scenario."""
    scn, runs = run_filters(cfg, override_size_guard=override_size_guard)
    return [
        {
            "grid": f"{scn.grid.nx}x{scn.grid.ny}",
            "m": scn.grid.m,
            "n": scn.model.n,
            "filter": run.label,
            "precompute_seconds": run.precompute_seconds,
            "online_seconds": run.online_seconds,
            "storage_bytes_total": run.storage.get("total"),
            "storage_bytes_online": run.storage.get("online_state"),
        }
        for run in runs
    ]
