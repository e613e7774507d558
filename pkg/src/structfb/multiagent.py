"""
Structured optimal feedback for groups of N identical agents

    dx_i/dt = A x_i + B u_i,   i = 1..N.

Two problems are solved through the output reduction in :mod:`.reduction`:

* synchronization, with output ``y = (Gamma^T kron I_n) x`` (the asynchronous
  component of the stacked state); the optimal gain is diffusive,
  ``K (1_N kron I_n) = 0``;
* centroid stabilization, with output proportional to ``sum_i x_i``; with a
  homogeneous input weight the optimal gain is a broadcast ``1_N kron k``.

Homogeneous weights reduce both to a single n-dimensional Riccati equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Literal, Union

import numpy as np

from . import numkernel as nk
from .errors import ControllabilityError, DefinitenessError, DimensionError
from .reduction import GainResult, OutputMap, ReducedProblem, solve_output_lqr
from .riccati import CareProblem, solve_care_stabilizing


@dataclass(frozen=True)
class LinearSystem:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = nk.as_matrix(self.a, "A")
        b = nk.as_matrix(self.b, "B")
        n = nk.require_square(a, "A")
        if b.shape[0] != n:
            raise DimensionError(f"B must have {n} rows, got {b.shape}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def p(self) -> int:
        return self.b.shape[1]


@dataclass(frozen=True)
class HomogeneousWeights:
    """Per-agent weights: ``v`` (n x n, state/output) and ``w`` (p x p, input)."""

    v: np.ndarray
    w: np.ndarray


@dataclass(frozen=True)
class FullWeights:
    """Group weights.

    For synchronization ``q`` is either the reduced-space weight Q~
    ((N-1)n square) or a full-space weight Q (Nn square), in which case
    ``Q~ = C Q C^T`` is used. For the centroid problem ``q`` is n x n and
    penalizes ``sum_i x_i``. ``r`` is always Np x Np.
    """

    q: np.ndarray
    r: np.ndarray


Weights = Union[HomogeneousWeights, FullWeights]


def _pd(m: Any, name: str) -> np.ndarray:
    m = nk.check_symmetric(nk.as_matrix(m, name), name)
    lmin = float(np.linalg.eigvalsh(m).min())
    if lmin <= 1e-10 * max(1.0, float(np.linalg.norm(m))):
        raise DefinitenessError(
            f"{name} must be positive definite (min eigenvalue {lmin:.3e})",
            {"min_eigenvalue": lmin},
        )
    return m


@dataclass(frozen=True)
class MultiAgentProblem:
    kind: Literal["sync", "centroid"]
    agent: LinearSystem
    n_agents: int
    weights: Weights

    def __post_init__(self):
        if self.kind not in ("sync", "centroid"):
            raise ValueError(f"kind must be 'sync' or 'centroid', got {self.kind!r}")
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        ctrb = nk.is_controllable(self.agent.a, self.agent.b)
        if not ctrb:
            lam = ctrb.witness
            raise ControllabilityError(
                f"agent pair (A, B) is not controllable at eigenvalue {lam:.6g}",
                {"eigenvalue": [lam.real, lam.imag]},
            )
        n, p, N = self.agent.n, self.agent.p, self.n_agents
        w = self.weights
        if isinstance(w, HomogeneousWeights):
            v = _pd(w.v, "V")
            ww = _pd(w.w, "W")
            if v.shape != (n, n):
                raise DimensionError(f"V must be {n}x{n}, got {v.shape}")
            if ww.shape != (p, p):
                raise DimensionError(f"W must be {p}x{p}, got {ww.shape}")
            object.__setattr__(self, "weights", HomogeneousWeights(v, ww))
        elif isinstance(w, FullWeights):
            q = _pd(w.q, "Q")
            r = _pd(w.r, "R")
            allowed = {(n, n)} if self.kind == "centroid" else {((N - 1) * n,) * 2, (N * n,) * 2}
            if q.shape not in allowed:
                raise DimensionError(f"Q has shape {q.shape}; expected one of {sorted(allowed)}")
            if r.shape != (N * p, N * p):
                raise DimensionError(f"R must be {N * p}x{N * p}, got {r.shape}")
            object.__setattr__(self, "weights", FullWeights(q, r))
        else:
            raise TypeError(f"unsupported weights {type(w).__name__}")

    @property
    def stacked_a(self) -> np.ndarray:
        return np.kron(np.eye(self.n_agents), self.agent.a)

    @property
    def stacked_b(self) -> np.ndarray:
        return np.kron(np.eye(self.n_agents), self.agent.b)

    @property
    def homogeneous(self) -> bool:
        return isinstance(self.weights, HomogeneousWeights)

    def input_weight(self) -> np.ndarray:
        if self.homogeneous:
            return np.kron(np.eye(self.n_agents), self.weights.w)
        return self.weights.r


@dataclass(frozen=True)
class SubspaceBasis:
    gamma: np.ndarray

    @property
    def projection(self) -> np.ndarray:
        """``Gamma Gamma^T = I - 1 1^T / N``, the complete-graph Laplacian over N."""
        return self.gamma @ self.gamma.T


def gamma_basis(n_agents: int) -> SubspaceBasis:
    """Helmert basis of the complement of ``span{1_N}``.

    Column k (1-based) is ``(-1, ..., -1, k, 0, ..., 0) / sqrt(k (k + 1))``
    with k leading ``-1`` entries; for N = 2 this is ``(-1, 1)/sqrt(2)``.
    """
    if n_agents < 1:
        raise ValueError("n_agents must be >= 1")
    g = np.zeros((n_agents, n_agents - 1))
    for k in range(1, n_agents):
        g[:k, k - 1] = -1.0
        g[k, k - 1] = float(k)
        g[:, k - 1] /= np.sqrt(k * (k + 1))
    return SubspaceBasis(g)


def complete_graph_laplacian(n_agents: int) -> np.ndarray:
    return n_agents * np.eye(n_agents) - np.ones((n_agents, n_agents))


def sync_output_map(n_agents: int, n: int, gamma: np.ndarray | None = None) -> OutputMap:
    g = gamma_basis(n_agents).gamma if gamma is None else nk.as_matrix(gamma, "gamma")
    return OutputMap(np.kron(g.T, np.eye(n)))


def centroid_output_map(n_agents: int, n: int) -> OutputMap:
    """``(1/sqrt(N)) (I ... I)``, the orthonormal-row version of ``(I ... I)``."""
    return OutputMap(np.kron(np.ones((1, n_agents)), np.eye(n)) / np.sqrt(n_agents))


def _check_gamma(gamma: np.ndarray, n_agents: int) -> np.ndarray:
    g = nk.as_matrix(gamma, "gamma")
    if g.shape != (n_agents, n_agents - 1):
        raise DimensionError(f"gamma must be {n_agents}x{n_agents - 1}, got {g.shape}")
    ortho = float(np.linalg.norm(g.T @ g - np.eye(n_agents - 1)))
    sync = float(np.linalg.norm(g.T @ np.ones(n_agents)))
    if ortho > 1e-10 or sync > 1e-10:
        raise DimensionError("gamma must have orthonormal columns orthogonal to 1_N",
                             {"orthonormality": ortho, "sync_leak": sync})
    return g


def sync_weights(p: MultiAgentProblem, c: OutputMap) -> tuple[np.ndarray, np.ndarray]:
    """Reduced weights ``(Q~, R)`` of a synchronization problem."""
    N, n = p.n_agents, p.agent.n
    if p.homogeneous:
        q_tilde = np.kron(np.eye(N - 1), p.weights.v)
    else:
        q = p.weights.q
        if q.shape == (N * n, N * n):
            q_tilde = c.c @ q @ c.c.T
            q_tilde = 0.5 * (q_tilde + q_tilde.T)
        else:
            q_tilde = q
    return q_tilde, p.input_weight()


def build_sync_problem(p: MultiAgentProblem, gamma: np.ndarray | None = None) -> ReducedProblem:
    """Reduced synchronization problem ``(I_{N-1} kron A, Gamma^T kron B, Q~, R)``."""
    if p.kind != "sync":
        raise ValueError("build_sync_problem needs kind='sync'")
    N, A, B = p.n_agents, p.agent.a, p.agent.b
    if N < 2:
        raise DimensionError("synchronization needs at least two agents")
    g = gamma_basis(N).gamma if gamma is None else _check_gamma(gamma, N)
    c = OutputMap(np.kron(g.T, np.eye(p.agent.n)))
    a_tilde = np.kron(np.eye(N - 1), A)
    b_tilde = np.kron(g.T, B)
    q_tilde, r = sync_weights(p, c)
    viol = float(np.linalg.norm(c.c @ p.stacked_a - a_tilde @ c.c))
    return ReducedProblem(a_tilde, b_tilde, q_tilde, r, c, viol)


def _diffusive_residual(k: np.ndarray, N: int, n: int) -> float:
    return float(np.linalg.norm(k @ np.kron(np.ones((N, 1)), np.eye(n))))


def _trivial_sync(p: MultiAgentProblem) -> GainResult:
    n, m = p.agent.n, p.agent.p
    res = GainResult(
        k_full=np.zeros((m, n)),
        k_reduced=np.zeros((m, 0)),
        p_value=np.zeros((0, 0)),
        structure_tag="diffusive",
        certificates={"diffusive_residual": 0.0},
        notes=["single agent: asynchronous subspace is trivial, zero gain is optimal"],
    )
    return res


def solve_sync(p: MultiAgentProblem, gamma: np.ndarray | None = None) -> GainResult:
    """Optimal synchronizing gain via the general reduced Riccati equation."""
    if p.kind != "sync":
        raise ValueError("solve_sync needs kind='sync'")
    if p.n_agents == 1:
        return _trivial_sync(p)
    red = build_sync_problem(p, gamma)
    res = solve_output_lqr(p.stacked_a, p.stacked_b, red.c, red.q_tilde, red.r, "diffusive")
    res.certificates["diffusive_residual"] = _diffusive_residual(res.k_full, p.n_agents, p.agent.n)
    return res


def solve_sync_homogeneous(p: MultiAgentProblem) -> GainResult:
    """Homogeneous-weight synchronization through one n-dimensional CARE.

    Solves ``Y B W^{-1} B^T Y - Y A - A^T Y - V = 0`` and returns
    ``K = -(Gamma Gamma^T kron W^{-1} B^T Y)``, i.e. the all-to-all law
    ``u_i = (1/N) sum_j W^{-1} B^T Y (x_j - x_i)``. The pairwise gain
    ``W^{-1} B^T Y / N`` and ``Y`` are returned in ``aux``.
    """
    if p.kind != "sync" or not p.homogeneous:
        raise ValueError("solve_sync_homogeneous needs kind='sync' with homogeneous weights")
    N, n = p.n_agents, p.agent.n
    A, B = p.agent.a, p.agent.b
    V, W = p.weights.v, p.weights.w
    sol = solve_care_stabilizing(CareProblem(A, B, V, W))
    Y = sol.x
    local = np.linalg.solve(W, B.T @ Y)
    if N == 1:
        res = _trivial_sync(p)
        res.aux = {"Y": Y, "pairwise_gain": local}
        return res
    g = gamma_basis(N).gamma
    c = OutputMap(np.kron(g.T, np.eye(n)))
    k_red = -np.kron(g, local)
    k_full = -np.kron(g @ g.T, local)
    p_value = np.kron(np.eye(N - 1), Y)
    red = ReducedProblem(
        np.kron(np.eye(N - 1), A), np.kron(g.T, B), np.kron(np.eye(N - 1), V),
        np.kron(np.eye(N), W), c, float(np.linalg.norm(c.c @ p.stacked_a - np.kron(np.eye(N - 1), A) @ c.c)),
    )
    certs = {
        "invariance_residual": red.invariance_residual,
        "are_residual": red.care.residual(p_value),
        "agent_are_residual": sol.residual,
        "lift_residual": float(np.linalg.norm(k_full - k_red @ c.c)),
        "kernel_residual": float(np.linalg.norm(k_full @ (np.eye(N * n) - c.projection))),
        "diffusive_residual": _diffusive_residual(k_full, N, n),
    }
    return GainResult(k_full, k_red, p_value, "diffusive", certs, red, sol,
                      aux={"Y": Y, "pairwise_gain": local / N})


def centroid_weights(p: MultiAgentProblem) -> tuple[np.ndarray, np.ndarray]:
    """Weights ``(Q, R)`` on ``y = sum_i x_i`` before normalization."""
    q = p.weights.v if p.homogeneous else p.weights.q
    return q, p.input_weight()


def build_centroid_problem(p: MultiAgentProblem) -> ReducedProblem:
    """Reduced centroid problem on ``y_c = (1/sqrt(N)) sum_i x_i``.

    ``y = sum_i x_i = sqrt(N) y_c``, so penalizing ``y^T Q y`` means
    ``Q~ = N Q`` on ``y_c``; ``b~ = (1/sqrt(N)) (B ... B)``.
    """
    if p.kind != "centroid":
        raise ValueError("build_centroid_problem needs kind='centroid'")
    N = p.n_agents
    c = centroid_output_map(N, p.agent.n)
    q, r = centroid_weights(p)
    b_tilde = np.kron(np.ones((1, N)), p.agent.b) / np.sqrt(N)
    viol = float(np.linalg.norm(c.c @ p.stacked_a - p.agent.a @ c.c))
    return ReducedProblem(p.agent.a.copy(), b_tilde, N * q, r, c, viol)


def _block_spread(k: np.ndarray, N: int, axis: int) -> float:
    """Largest deviation of any of the N blocks of ``k`` (rows or columns) from the first."""
    blocks = np.split(k, N, axis=axis)
    return float(max(np.abs(blk - blocks[0]).max() for blk in blocks)) if blocks[0].size else 0.0


def _is_homogeneous_r(r: np.ndarray, N: int, p: int) -> np.ndarray | None:
    w = r[:p, :p]
    return w if np.allclose(r, np.kron(np.eye(N), w), rtol=0.0, atol=1e-14 * max(1.0, np.abs(r).max())) else None


def solve_centroid(p: MultiAgentProblem) -> GainResult:
    """Optimal centroid-stabilizing gain.

    With ``R = I_N kron W`` the n-dimensional CARE

        P A + A^T P - N P B W^{-1} B^T P + Q = 0

    is solved and ``u = -(1_N kron W^{-1} B^T P) y`` with ``y = sum_i x_i``: every
    agent receives the same broadcast input. ``aux`` holds ``P`` (against the
    sum), ``broadcast_gain`` (``W^{-1} B^T P``, against the sum) and
    ``broadcast_gain_mean`` (``N W^{-1} B^T P``, against the mean).

    Any other R goes through the general reduced solve; the result is then only
    block rank one and tagged ``generic``.
    """
    red = build_centroid_problem(p)
    N, n, m = p.n_agents, p.agent.n, p.agent.p
    A, B = p.agent.a, p.agent.b
    q, r = centroid_weights(p)
    W = p.weights.w if p.homogeneous else _is_homogeneous_r(r, N, m)
    if W is None:
        res = solve_output_lqr(p.stacked_a, p.stacked_b, red.c, red.q_tilde, red.r, "generic")
        res.certificates["block_column_spread"] = _block_spread(res.k_full, N, axis=1)
        res.certificates["rank"] = float(nk.numerical_rank(res.k_full))
        res.aux = {"P": res.p_value / N}
        res.notes.append("heterogeneous input weight: gain is block rank one, not broadcast")
        return res
    sol = solve_care_stabilizing(CareProblem(A, np.sqrt(N) * B, q, W))
    P = sol.x
    local = np.linalg.solve(W, B.T @ P)
    k_sum = -np.kron(np.ones((N, 1)), local)
    k_red = np.sqrt(N) * k_sum
    k_full = k_red @ red.c.c
    p_value = N * P
    nres = P @ A + A.T @ P - N * P @ B @ np.linalg.solve(W, B.T @ P) + q
    certs = {
        "invariance_residual": red.invariance_residual,
        "are_residual": red.care.residual(p_value),
        "agent_are_residual": float(np.linalg.norm(nres)),
        "lift_residual": float(np.linalg.norm(k_full - k_red @ red.c.c)),
        "kernel_residual": float(np.linalg.norm(k_full @ (np.eye(N * n) - red.c.projection))),
        "broadcast_spread": _block_spread(k_full, N, axis=0),
    }
    return GainResult(k_full, k_red, p_value, "broadcast", certs, red, sol,
                      aux={"P": P, "broadcast_gain": local, "broadcast_gain_mean": N * local})
