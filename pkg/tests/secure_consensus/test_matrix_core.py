import numpy as np
import pytest

from app.secure_consensus.core.errors import DimensionMismatch, NotSymmetric, Singular
from app.secure_consensus.matrix_core import (
    as_matrix,
    definiteness_margin,
    is_positive_definite,
    kron,
    lambda_min,
    solve_linear,
    sym_eig,
    symmetrize,
)


def _random_symmetric(rng: np.random.Generator) -> np.ndarray:
    n = int(rng.integers(1, 9))
    a = rng.normal(size=(n, n))
    return 0.5 * (a + a.T)


def _cholesky_says_negative_definite(s: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(-s)
    except np.linalg.LinAlgError:
        return False
    return True


def test_as_matrix_shapes_and_validation() -> None:
    assert as_matrix(2.0).shape == (1, 1)
    assert as_matrix([1.0, 2.0, 3.0]).shape == (3, 1)
    with pytest.raises(ValueError):
        as_matrix(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])


def test_kron_blocks() -> None:
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    out = kron(a, b)
    assert out.shape == (4, 4)
    np.testing.assert_array_equal(out[2:, :2], 3.0 * b)
    np.testing.assert_array_equal(out[:2, 2:], 2.0 * b)


def test_sym_eig_two_node_laplacian() -> None:
    result = sym_eig([[1.0, -1.0], [-1.0, 1.0]])
    np.testing.assert_allclose(result.eigenvalues, [0.0, 2.0], atol=1e-14)
    assert result.lambda_min == pytest.approx(0.0, abs=1e-14)
    assert result.lambda_max == pytest.approx(2.0)


def test_sym_eig_rejects_bad_input() -> None:
    with pytest.raises(NotSymmetric):
        sym_eig([[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(DimensionMismatch):
        sym_eig(np.ones((2, 3)))


def test_sym_eig_sign_convention() -> None:
    vectors = sym_eig([[2.0, 1.0], [1.0, 2.0]]).eigenvectors
    for column in vectors.T:
        assert column[np.argmax(np.abs(column))] > 0


def _check_reconstruction(count: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    for _ in range(count):
        s = _random_symmetric(rng)
        result = sym_eig(s)
        v = result.eigenvectors
        rebuilt = v @ np.diag(result.eigenvalues) @ v.T
        scale = max(np.linalg.norm(s), 1e-300)
        assert np.linalg.norm(rebuilt - s) <= 1e-8 * scale
        np.testing.assert_allclose(v.T @ v, np.eye(s.shape[0]), atol=1e-10)
        assert np.all(np.diff(result.eigenvalues) >= 0)
        np.testing.assert_allclose(result.eigenvalues, np.linalg.eigvalsh(s), atol=1e-9 * scale)


def test_sym_eig_reconstruction_random() -> None:
    _check_reconstruction(100, seed=1)


@pytest.mark.parametrize("n", [4, 9, 16, 24])
def test_sym_eig_converges_on_larger_batches(n: int) -> None:
    # dominant diagonals leave off-diagonal mass far below the rounding of sum(a*a)
    rng = np.random.default_rng(n)
    for _ in range(5):
        a = rng.normal(size=(n, n))
        s = 0.5 * (a + a.T) + np.diag(rng.uniform(1e3, 1e5, size=n))
        result = sym_eig(s)
        v = result.eigenvectors
        np.testing.assert_allclose(v @ np.diag(result.eigenvalues) @ v.T, s, atol=1e-8 * np.linalg.norm(s))
        np.testing.assert_allclose(result.eigenvalues, np.linalg.eigvalsh(s), atol=1e-9 * np.linalg.norm(s))


@pytest.mark.slow
def test_sym_eig_reconstruction_thousand_matrices() -> None:
    _check_reconstruction(1000, seed=2)


def test_definiteness_margin_examples() -> None:
    assert definiteness_margin(-np.eye(3)) == pytest.approx(-1.0)
    assert definiteness_margin([[-2.0, 1.0], [1.0, -2.0]]) == pytest.approx(-1.0)
    assert definiteness_margin(np.zeros((2, 2))) == 0.0
    # only the symmetric part matters
    assert definiteness_margin([[-1.0, 5.0], [-5.0, -1.0]]) == pytest.approx(-1.0)


@pytest.mark.parametrize("count", [200, pytest.param(1000, marks=pytest.mark.slow)])
def test_definiteness_margin_agrees_with_cholesky(count: int) -> None:
    rng = np.random.default_rng(count)
    for _ in range(count):
        s = _random_symmetric(rng)
        s = s - rng.uniform(0.0, 3.0) * np.eye(s.shape[0])
        assert (definiteness_margin(s) < 0) == _cholesky_says_negative_definite(s)


def test_lambda_min_and_positive_definite() -> None:
    assert lambda_min([[2.0, 0.0], [0.0, 5.0]]) == pytest.approx(2.0)
    assert is_positive_definite(np.eye(3))
    assert not is_positive_definite(-np.eye(3))
    assert not is_positive_definite([[1.0, 2.0], [2.0, 1.0]])


def test_symmetrize() -> None:
    np.testing.assert_array_equal(symmetrize([[0.0, 2.0], [0.0, 0.0]]), [[0.0, 1.0], [1.0, 0.0]])


def test_solve_linear() -> None:
    np.testing.assert_allclose(solve_linear([[1.0, 1.0], [1.0, -1.0]], [3.0, 1.0]), [2.0, 1.0])
    rhs = np.array([[1.0, 0.0], [0.0, 1.0]])
    a = np.array([[4.0, 1.0], [2.0, 3.0]])
    np.testing.assert_allclose(solve_linear(a, rhs), np.linalg.inv(a))


def test_solve_linear_errors() -> None:
    with pytest.raises(Singular):
        solve_linear([[1.0, 2.0], [2.0, 4.0]], [1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        solve_linear(np.eye(2), [1.0, 2.0, 3.0])
    with pytest.raises(DimensionMismatch):
        solve_linear(np.ones((2, 3)), [1.0, 2.0])
