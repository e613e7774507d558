import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from numpy.testing import assert_allclose

from structfb import numkernel as nk
from structfb.errors import (
    DimensionError,
    NonFiniteError,
    NotEigenvalueError,
    NotHurwitzError,
)

from oracles import controllability_rank, jacobi_eigenvalues, lyapunov_by_quadrature, random_orthogonal

SQ2 = np.sqrt(2.0)
finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def test_as_matrix_rejects_nonfinite():
    with pytest.raises(NonFiniteError):
        nk.as_matrix([[1.0, np.nan]])
    with pytest.raises(DimensionError):
        nk.as_matrix(np.zeros((2, 2, 2)))


class TestKron:
    def test_identity_factor(self):
        assert_allclose(nk.kron(np.eye(2), [[5]]), [[5, 0], [0, 5]])

    def test_row_times_column(self):
        assert_allclose(nk.kron([[0, 1]], [[1], [1]]), [[0, 1], [0, 1]])

    def test_two_agent_output_row(self):
        gamma = np.array([[-1.0], [1.0]]) / SQ2
        assert_allclose(nk.kron(gamma.T, np.eye(1)), [[-0.7071, 0.7071]], atol=1e-4)

    def test_block_structure(self, rng):
        a, b = rng.normal(size=(2, 3)), rng.normal(size=(4, 2))
        k = nk.kron(a, b)
        assert k.shape == (8, 6)
        assert_allclose(k[4:8, 2:4], a[1, 1] * b)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, (3, 3), elements=finite), arrays(float, (2, 2), elements=finite),
           arrays(float, (3, 3), elements=finite), arrays(float, (2, 2), elements=finite))
    def test_mixed_product(self, a, b, c, d):
        lhs = nk.kron(a, b) @ nk.kron(c, d)
        assert_allclose(lhs, nk.kron(a @ c, b @ d), atol=1e-12 * max(1.0, np.abs(lhs).max()))


class TestEig:
    def test_diagonal(self):
        w = nk.eig(np.diag([1.0, 2.0])).eigenvalues
        assert_allclose(np.sort(w.real), [1, 2])

    def test_two_agent_closed_loop(self):
        a = np.array([[-0.2071, 1.2071], [1.2071, -0.2071]])
        spec = nk.eig(a)
        assert_allclose(np.sort(spec.eigenvalues.real), [-1.4142, 1.0], atol=1e-12)
        stable = np.argmin(spec.eigenvalues.real)
        v = spec.eigenvectors[:, stable].real
        assert_allclose(abs(v @ np.array([-1, 1]) / SQ2), 1.0, atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_symmetric_against_jacobi(self, seed):
        m = np.random.default_rng(seed).normal(size=(5, 5))
        s = m + m.T
        assert_allclose(np.sort(nk.eig(s).eigenvalues.real), jacobi_eigenvalues(s), atol=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_residual_and_unit_vectors(self, seed):
        a = np.random.default_rng(seed).normal(size=(6, 6))
        spec = nk.eig(a)
        assert spec.max_residual(a) <= 1e-9 * np.linalg.norm(a)
        assert_allclose(np.linalg.norm(spec.eigenvectors, axis=0), 1.0)

    def test_non_square(self):
        with pytest.raises(DimensionError):
            nk.eig(np.zeros((2, 3)))


class TestLyapunov:
    def test_scalar(self):
        assert_allclose(nk.solve_lyapunov([[-1.0]], [[2.0]]), [[1.0]])

    def test_scalar_sqrt2(self):
        assert_allclose(nk.solve_lyapunov([[-SQ2]], [[1.0]]), [[1 / (2 * SQ2)]], atol=1e-15)
        assert_allclose(nk.solve_lyapunov([[-SQ2]], [[1.0]]), [[0.35355]], atol=1e-5)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_against_quadrature(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(4, 4))
        a -= (np.max(np.linalg.eigvals(a).real) + 0.5) * np.eye(4)
        m = rng.normal(size=(4, 4))
        q = m @ m.T
        x = nk.solve_lyapunov(a, q)
        res = np.linalg.norm(a.T @ x + x @ a + q)
        assert res <= 1e-9 * (np.linalg.norm(a) * np.linalg.norm(x) + np.linalg.norm(q))
        assert_allclose(x, x.T, atol=1e-12)
        assert_allclose(x, lyapunov_by_quadrature(a, q), atol=1e-6)

    def test_not_hurwitz(self):
        with pytest.raises(NotHurwitzError):
            nk.solve_lyapunov([[0.0]], [[1.0]])
        with pytest.raises(NotHurwitzError):
            nk.solve_lyapunov(np.diag([-1.0, 0.5]), np.eye(2))


class TestControllability:
    def test_integrator(self):
        assert nk.is_controllable([[0.0]], [[1.0]])

    def test_repeated_eigenvalue_single_input(self):
        res = nk.is_controllable(np.eye(2), [[1.0], [1.0]])
        assert not res
        assert res.witness == pytest.approx(1.0)

    def test_reduced_two_agent_pair(self):
        assert nk.is_controllable([[1.0]], np.array([[-1.0, 1.0]]) / SQ2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            nk.is_controllable(np.eye(2), np.ones((3, 1)))

    @pytest.mark.parametrize("seed", range(40))
    def test_agrees_with_kalman_rank(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 7))
        p = int(rng.integers(1, 3))
        if seed % 2:
            # planted uncontrollable part: block-triangular form, then similarity
            k = int(rng.integers(1, n + 1)) if n > 1 else 1
            a = rng.normal(size=(n, n))
            a[k:, :k] = 0.0
            b = np.zeros((n, p))
            b[:k] = rng.normal(size=(k, p))
            t = random_orthogonal(rng, n)
            a, b = t @ a @ t.T, t @ b
        else:
            a, b = rng.normal(size=(n, n)), rng.normal(size=(n, p))
        assert bool(nk.is_controllable(a, b)) == (controllability_rank(a, b) == n)


class TestDetectability:
    def test_synchronous_mode_invisible(self):
        f = np.array([[-1.0, 1.0]]) / SQ2
        assert not nk.is_detectable_mode(np.eye(2), f, 1.0)

    def test_full_rank_output(self):
        assert nk.is_detectable_mode(np.diag([-1.0, -2.0]), np.eye(2), -1.0)

    @pytest.mark.parametrize("seed", range(5))
    def test_planted_unobservable_mode(self, seed):
        rng = np.random.default_rng(seed)
        blk = np.array([[-1.0, 0.0, 0.0], [0.3, -2.0, 0.0], [0.7, -0.4, 2.0]])
        f_blk = np.array([[1.0, 0.5, 0.0]])
        t = rng.normal(size=(3, 3)) + 3 * np.eye(3)
        ti = np.linalg.inv(t)
        a, f = t @ blk @ ti, f_blk @ ti
        assert not nk.is_detectable_mode(a, f, 2.0)
        assert nk.is_detectable_mode(a, f, -1.0)

    def test_rejects_non_eigenvalue(self):
        with pytest.raises(NotEigenvalueError):
            nk.is_detectable_mode(np.eye(2), np.eye(2), 3.0)


class TestOrthonormalRows:
    def test_two_agent_row(self):
        assert nk.orthonormal_rows_check(np.array([[-1.0, 1.0]]) / SQ2)

    def test_identity(self):
        assert nk.orthonormal_rows_check(np.eye(3))

    def test_unnormalized(self):
        assert not nk.orthonormal_rows_check([[1.0, 1.0]])


def test_psd_factor(rng):
    m = rng.normal(size=(4, 2))
    q = m @ m.T
    f = nk.psd_factor(q)
    assert f.shape == (2, 4)
    assert_allclose(f.T @ f, q, atol=1e-12)
