import numpy as np
import pytest

from hikf.grids import Grid2D
from hikf.tomography import (
    Acquisition,
    BlobSpec,
    PlumeScenario,
    apply_forward,
    build_ray_operator,
    default_acquisition,
    load_plume,
    make_plume,
    save_plume,
)


def test_default_acquisition_geometry():
    grid = Grid2D(nx=10, ny=8, dx=2.0, dy=1.0)
    acq = default_acquisition(grid, n_sources=4, n_receivers=8)
    assert acq.n == 32
    # wells sit half a cell inside the lateral edges
    assert np.allclose(acq.sources[:, 0], 1.0)
    assert np.allclose(acq.receivers[:, 0], 19.0)
    # stations are uniformly spaced with symmetric margins
    assert np.allclose(acq.sources[:, 1], [1.0, 3.0, 5.0, 7.0])
    assert np.allclose(np.diff(acq.receivers[:, 1]), 1.0)


def test_ray_endpoints_source_major():
    acq = Acquisition(np.array([[0.0, 0.0], [0.0, 1.0]]), np.array([[1.0, 0.5]]))
    src, rcv = acq.ray_endpoints()
    assert np.allclose(src, [[0.0, 0.0], [0.0, 1.0]])
    assert np.allclose(rcv, [[1.0, 0.5], [1.0, 0.5]])


def test_row_sums_equal_ray_lengths():
    grid = Grid2D(nx=13, ny=11)
    rng = np.random.default_rng(21)
    src = np.column_stack([np.zeros(9), rng.uniform(0.0, 11.0, 9)])
    rcv = np.column_stack([np.full(7, 13.0), rng.uniform(0.0, 11.0, 7)])
    acq = Acquisition(src, rcv)
    H = build_ray_operator(grid, acq)
    s, r = acq.ray_endpoints()
    lengths = np.hypot(*(r - s).T)
    assert np.allclose(np.asarray(H.sum(axis=1)).ravel(), lengths, rtol=1e-12)
    assert H.data.min() >= 0.0


def test_horizontal_ray_hits_one_row_of_cells():
    grid = Grid2D(nx=6, ny=4, dx=1.5, dy=1.0)
    acq = Acquisition(np.array([[0.0, 2.5]]), np.array([[9.0, 2.5]]))
    H = build_ray_operator(grid, acq).toarray()[0]
    expected = np.zeros(24)
    for i in range(6):
        expected[grid.flat_index(i, 2)] = 1.5
    assert np.allclose(H, expected)


def test_single_cell_diagonal():
    grid = Grid2D(nx=1, ny=1)
    acq = Acquisition(np.array([[0.0, 0.0]]), np.array([[1.0, 1.0]]))
    H = build_ray_operator(grid, acq)
    assert H.nnz == 1
    assert H[0, 0] == pytest.approx(np.sqrt(2.0), rel=1e-15)


def test_row_sparsity_bound():
    # a straight ray can enter at most nx + ny cells of the grid
    grid = Grid2D(nx=15, ny=12)
    rng = np.random.default_rng(22)
    acq = Acquisition(
        np.column_stack([np.zeros(20), rng.uniform(0, 12, 20)]),
        np.column_stack([np.full(20, 15.0), rng.uniform(0, 12, 20)]),
    )
    H = build_ray_operator(grid, acq)
    assert np.diff(H.indptr).max() <= 15 + 12


def test_endpoints_outside_grid_rejected():
    grid = Grid2D(nx=4, ny=4)
    acq = Acquisition(np.array([[-1.0, 2.0]]), np.array([[4.0, 2.0]]))
    with pytest.raises(ValueError):
        build_ray_operator(grid, acq)


def test_zero_length_ray_rejected():
    grid = Grid2D(nx=4, ny=4)
    acq = Acquisition(np.array([[1.0, 1.0]]), np.array([[1.0, 1.0]]))
    with pytest.raises(ValueError):
        build_ray_operator(grid, acq)


def test_apply_forward_matches_operator():
    grid = Grid2D(nx=8, ny=6)
    acq = default_acquisition(grid, n_sources=3, n_receivers=5)
    H = build_ray_operator(grid, acq)
    f = np.random.default_rng(23).standard_normal(grid.m)
    assert np.allclose(apply_forward(H, f), H @ f)
    with pytest.raises(ValueError):
        apply_forward(H, f[:-1])


def test_make_plume_ramp_and_freeze():
    grid = Grid2D(nx=10, ny=10)
    blob = BlobSpec(amplitude=2.0, sigma_x=2.0, sigma_y=2.0, start=(2.0, 5.0), end=(8.0, 5.0))
    plume = make_plume(grid, [blob], n_steps=6, breakthrough_step=3)
    assert plume.n_steps == 6
    assert np.all(plume.fields[0] == 0.0)
    # amplitude grows until breakthrough, then the field is frozen
    peaks = plume.fields.max(axis=1)
    assert peaks[1] < peaks[2] < peaks[3]
    assert np.array_equal(plume.fields[3], plume.fields[4])
    assert np.array_equal(plume.fields[3], plume.fields[6])
    # peak sits at the cell center nearest the blob center, slightly below
    # the nominal amplitude
    assert 1.8 < peaks[3] <= 2.0


def test_plume_validation():
    with pytest.raises(ValueError):
        PlumeScenario(np.ones((3, 5)))  # nonzero initial row
    with pytest.raises(ValueError):
        PlumeScenario(np.zeros((1, 5)))  # needs at least one step


def test_plume_save_load_roundtrip(tmp_path):
    grid = Grid2D(nx=5, ny=4)
    blob = BlobSpec(amplitude=1.0, sigma_x=1.0, sigma_y=1.0, start=(1.0, 2.0), end=(4.0, 2.0))
    plume = make_plume(grid, [blob], n_steps=3, breakthrough_step=2)
    path = tmp_path / "plume.txt"
    save_plume(plume, path)
    loaded = load_plume(path)
    assert loaded.fields.shape == plume.fields.shape
    assert np.array_equal(loaded.fields, plume.fields)
