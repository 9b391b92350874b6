import numpy as np
import pytest

from hikf.grids import Grid2D
from hikf.kernels import KernelSpec
from hikf.ssm import (
    StateSpaceModel,
    noise_variance_for_snr,
    realized_snr_db,
    simulate_truth_and_data,
)
from hikf.tomography import build_ray_operator, default_acquisition, make_plume, BlobSpec


def _small_setup(snr_db=None, r_variance=0.0, steps=8):
    grid = Grid2D(nx=12, ny=10)
    acq = default_acquisition(grid, n_sources=4, n_receivers=10)
    H = build_ray_operator(grid, acq)
    model = StateSpaceModel(
        grid=grid,
        H=H,
        q_kernel=KernelSpec("exponential", variance=1e-2, length_scale=3.0),
        r_variance=r_variance,
    )
    blob = BlobSpec(amplitude=0.1, sigma_x=2.0, sigma_y=2.5, start=(2.0, 5.0), end=(10.0, 5.0))
    plume = make_plume(grid, [blob], n_steps=steps, breakthrough_step=max(1, steps // 2))
    return model, plume


def test_noise_variance_for_snr_hand_value():
    # |signal|^2 = 4 over 4 components at 10 dB: sigma^2 = 4 * 0.1 / 4
    assert noise_variance_for_snr(np.ones(4), 10.0) == pytest.approx(0.1, rel=1e-12)


def test_realized_snr_identity():
    signal = np.array([3.0, 4.0])
    noise = np.array([1.0, 0.0])
    # 10 log10(25 / 1)
    assert realized_snr_db(signal, noise) == pytest.approx(10.0 * np.log10(25.0), rel=1e-12)


def test_simulated_record_hits_target_snr():
    model, plume = _small_setup()
    record = simulate_truth_and_data(model, plume, seed=[7, 0], snr_db=30.0)
    assert abs(record.realized_snr_db - 30.0) < 1.0
    assert record.truth.shape == (plume.n_steps, model.m)
    assert record.observations.shape == (plume.n_steps, model.n)


def test_zero_noise_is_exact():
    model, plume = _small_setup(r_variance=0.0)
    record = simulate_truth_and_data(model, plume, seed=[7, 0])
    clean = (model.H @ record.truth.T).T
    assert np.array_equal(record.observations, clean)
    assert record.noise_variance == 0.0
    assert np.isinf(record.realized_snr_db)


def test_simulation_determinism():
    model, plume = _small_setup()
    a = simulate_truth_and_data(model, plume, seed=[3, 0], snr_db=20.0)
    b = simulate_truth_and_data(model, plume, seed=[3, 0], snr_db=20.0)
    c = simulate_truth_and_data(model, plume, seed=[3, 1], snr_db=20.0)
    assert np.array_equal(a.observations, b.observations)
    assert not np.array_equal(a.observations, c.observations)


def test_model_validation():
    grid = Grid2D(nx=4, ny=4)
    acq = default_acquisition(grid, n_sources=2, n_receivers=2)
    H = build_ray_operator(grid, acq)
    kern = KernelSpec("gaussian")
    with pytest.raises(ValueError):
        StateSpaceModel(grid=Grid2D(nx=5, ny=4), H=H, q_kernel=kern, r_variance=0.0)
    with pytest.raises(ValueError):
        StateSpaceModel(grid=grid, H=H, q_kernel=kern, r_variance=-1.0)
    with pytest.raises(ValueError):
        StateSpaceModel(grid=grid, H=H, q_kernel=kern, r_variance=0.0, alpha=-0.5)
    with pytest.raises(ValueError):
        StateSpaceModel(
            grid=grid, H=H, q_kernel=kern, r_variance=0.0, initial_mean=np.zeros(3)
        )
