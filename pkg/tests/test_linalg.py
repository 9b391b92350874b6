import numpy as np
import pytest

from hikf.linalg import DecompositionError, spd_solve, sym_eig


def _random_spd(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return A @ A.T + n * np.eye(n)


def test_spd_solve_matches_generic_solver():
    A = _random_spd(12, 0)
    B = np.random.default_rng(1).standard_normal((12, 3))
    X = spd_solve(A, B)
    assert np.allclose(X, np.linalg.solve(A, B), atol=1e-10)


def test_spd_solve_rejects_indefinite():
    A = np.diag([1.0, -1.0])
    with pytest.raises(DecompositionError):
        spd_solve(A, np.ones(2))


def test_spd_solve_rejects_asymmetric():
    A = np.array([[2.0, 1.0], [0.0, 2.0]])
    with pytest.raises(ValueError):
        spd_solve(A, np.ones(2))


def test_sym_eig_descending_and_reconstructs():
    A = _random_spd(8, 2)
    w, V = sym_eig(A)
    assert np.all(np.diff(w) <= 0)
    assert np.allclose(V @ np.diag(w) @ V.T, A, atol=1e-10)
