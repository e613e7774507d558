import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from structfb.errors import ControllabilityError, OrthonormalityError, ReductionError
from structfb.multiagent import gamma_basis
from structfb.reduction import OutputMap, induced_output_map, solve_output_lqr
from structfb.riccati import CareProblem, gap_analysis, solve_care_stabilizing

from oracles import random_orthogonal, random_pd

SQ2 = np.sqrt(2.0)
C2 = np.array([[-1.0, 1.0]]) / SQ2


class TestInducedMap:
    def test_two_agents(self):
        assert_allclose(induced_output_map(np.eye(2), C2), [[1.0]])

    def test_triangular(self):
        a = np.array([[0.3, -1.2], [0.0, 0.7]])
        assert_allclose(induced_output_map(a, [[0.0, 1.0]]), [[0.7]])

    def test_identity_output(self, rng):
        a = rng.normal(size=(3, 3))
        assert_allclose(induced_output_map(a, np.eye(3)), a, atol=1e-15)

    def test_intertwining(self, rng):
        # block upper triangular a keeps span{e1} = ker c invariant
        a = np.triu(rng.normal(size=(3, 3)))
        a[1, 2] = 0.0
        c = OutputMap(np.eye(3)[1:])
        at = induced_output_map(a, c)
        assert_allclose(c.c @ a, at @ c.c, atol=1e-12)

    def test_not_invariant(self):
        a = np.array([[0.0, 0.0], [1.0, 0.0]])
        with pytest.raises(ReductionError) as exc:
            induced_output_map(a, [[0.0, 1.0]])
        assert exc.value.witness["violation_norm"] == pytest.approx(1.0)

    def test_rejects_non_orthonormal(self):
        with pytest.raises(OrthonormalityError):
            OutputMap([[1.0, 1.0]])


class TestSolveOutputLqr:
    def test_two_agent_example(self):
        g = solve_output_lqr(np.eye(2), np.eye(2), C2, [[1.0]], np.eye(2))
        assert_allclose(g.p_value, [[2.4142]], atol=1e-4)
        assert_allclose(g.k_reduced, [[1.7071], [-1.7071]], atol=1e-4)
        assert_allclose(g.k_full, [[-1.2071, 1.2071], [1.2071, -1.2071]], atol=1e-4)
        assert g.certificates["are_residual"] <= 1e-9

    @pytest.mark.parametrize("seed", range(5))
    def test_identity_output_is_plain_lqr(self, seed):
        rng = np.random.default_rng(seed)
        a, b = rng.normal(size=(3, 3)), rng.normal(size=(3, 2))
        q, r = random_pd(rng, 3), random_pd(rng, 2)
        g = solve_output_lqr(a, b, np.eye(3), q, r)
        x = solve_care_stabilizing(CareProblem(a, b, q, r)).x
        assert_allclose(g.k_full, -np.linalg.solve(r, b.T @ x), atol=1e-10)

    def test_uncontrollable_reduced_pair(self):
        a = np.diag([1.0, 2.0])
        with pytest.raises(ControllabilityError):
            solve_output_lqr(a, [[1.0], [0.0]], [[0.0, 1.0]], [[1.0]], [[1.0]])

    @pytest.mark.parametrize("seed", range(10))
    def test_basis_invariance(self, seed):
        rng = np.random.default_rng(seed)
        N = 3
        a_full = np.kron(np.eye(N), [[-0.5 + rng.normal()]])
        b_full = np.eye(N)
        c = gamma_basis(N).gamma.T
        q_full = random_pd(rng, N)
        g0 = solve_output_lqr(a_full, b_full, c, c @ q_full @ c.T, np.eye(N))
        u = random_orthogonal(rng, N - 1)
        c2 = u.T @ c
        g1 = solve_output_lqr(a_full, b_full, c2, c2 @ q_full @ c2.T, np.eye(N))
        assert_allclose(g1.k_full, g0.k_full, atol=1e-9)
        assert_allclose(g1.k_reduced, g0.k_reduced @ u, atol=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_full_care_for_hurwitz_drift(self, seed):
        rng = np.random.default_rng(100 + seed)
        N, n = 3, 2
        a = rng.normal(size=(n, n))
        a -= (np.max(np.linalg.eigvals(a).real) + 0.2) * np.eye(n)
        b = rng.normal(size=(n, 1))
        a_full, b_full = np.kron(np.eye(N), a), np.kron(np.eye(N), b)
        c = np.kron(gamma_basis(N).gamma.T, np.eye(n))
        q_tilde = random_pd(rng, (N - 1) * n)
        g = solve_output_lqr(a_full, b_full, c, q_tilde, np.eye(N))
        q_check = c.T @ q_tilde @ c
        assert not gap_analysis(a_full, q_check).gap_exists
        x = solve_care_stabilizing(CareProblem(a_full, b_full, 0.5 * (q_check + q_check.T), np.eye(N))).x
        assert_allclose(g.k_full, -b_full.T @ x, atol=1e-7)

    def test_value_identity(self):
        g = solve_output_lqr(np.eye(2), np.eye(2), C2, [[1.0]], np.eye(2))
        x0 = np.array([0.3, -1.1])
        y0 = C2 @ x0
        x_star = C2.T @ g.p_value @ C2
        assert_allclose(x0 @ x_star @ x0, y0 @ g.p_value @ y0, rtol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.integers(2, 5))
def test_lift_annihilates_kernel(seed, N):
    rng = np.random.default_rng(seed)
    a = rng.normal()
    c = gamma_basis(N).gamma.T
    g = solve_output_lqr(a * np.eye(N), np.eye(N), c, random_pd(rng, N - 1), random_pd(rng, N))
    assert_allclose(g.k_full @ c.T @ c, g.k_full, atol=1e-12 * max(1.0, np.abs(g.k_full).max()))
    assert_allclose(g.k_full, g.k_reduced @ c, atol=1e-12)
    assert np.linalg.eigvalsh(g.p_value).min() > 0
