"""
Output-space LQR by reduction.

If ``ker C`` is invariant under the drift ``A`` there is an ``A~`` with
``C A = A~ C``, and the output ``y = C x`` obeys the closed system

    dy/dt = A~ y + C B u.

An LQR cost on ``(y, u)`` is then solved entirely on this reduced system and
its optimal feedback ``u = K~ y`` lifts to the full-state gain ``K = K~ C``,
which by construction annihilates ``ker C``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

from . import numkernel as nk
from .errors import ControllabilityError, DefinitenessError, DimensionError, OrthonormalityError, ReductionError
from .riccati import CareProblem, RiccatiSolution, solve_care_stabilizing

INVARIANCE_RTOL = 1e-9
STRUCTURE_TAGS = ("diffusive", "broadcast", "generic")


@dataclass(frozen=True)
class OutputMap:
    """Output matrix ``c`` (m x n) with orthonormal rows."""

    c: np.ndarray

    def __post_init__(self):
        c = nk.as_matrix(self.c, "c")
        err = float(np.linalg.norm(c @ c.T - np.eye(c.shape[0])))
        if err > nk.ORTHONORMAL_TOL:
            raise OrthonormalityError(
                f"output map rows are not orthonormal (||c c^T - I|| = {err:.3e})",
                {"violation_norm": err},
            )
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.c.shape[0]

    @property
    def n(self) -> int:
        return self.c.shape[1]

    @property
    def projection(self) -> np.ndarray:
        """Orthogonal projection ``c^T c`` onto the row space."""
        return self.c.T @ self.c


def _as_output_map(c: OutputMap | Any) -> OutputMap:
    return c if isinstance(c, OutputMap) else OutputMap(c)


def invariance_violation(a: np.ndarray, c: OutputMap) -> float:
    """``||c a (I - c^T c)||_F``; zero iff ``ker c`` is ``a``-invariant."""
    return float(np.linalg.norm(c.c @ a @ (np.eye(c.n) - c.projection)))


def induced_output_map(a: Any, c: OutputMap | Any) -> np.ndarray:
    """Return ``a~ = c a c^T``, the drift induced on the output space.

    Raises
    ------
    ReductionError
        If ``ker c`` is not invariant under ``a`` to ``1e-9 * ||a||_F``; the
        witness carries the violation norm.
    """
    a = nk.as_matrix(a, "a")
    c = _as_output_map(c)
    if a.shape != (c.n, c.n):
        raise DimensionError(f"a must be {c.n}x{c.n}, got {a.shape}")
    viol = invariance_violation(a, c)
    tol = INVARIANCE_RTOL * float(np.linalg.norm(a))
    if viol > tol:
        raise ReductionError(
            f"ker C is not invariant under A (violation {viol:.3e} > {tol:.3e})",
            {"violation_norm": viol, "tolerance": tol},
        )
    return c.c @ a @ c.c.T


@dataclass(frozen=True)
class ReducedProblem:
    a_tilde: np.ndarray
    b_tilde: np.ndarray
    q_tilde: np.ndarray
    r: np.ndarray
    c: OutputMap
    invariance_residual: float = 0.0

    @property
    def care(self) -> CareProblem:
        return CareProblem(self.a_tilde, self.b_tilde, self.q_tilde, self.r)

    def to_dict(self) -> dict[str, Any]:
        return {
            "a_tilde": nk.matrix_to_json(self.a_tilde),
            "b_tilde": nk.matrix_to_json(self.b_tilde),
            "q_tilde": nk.matrix_to_json(self.q_tilde),
            "r": nk.matrix_to_json(self.r),
            "c": nk.matrix_to_json(self.c.c),
            "invariance_residual": self.invariance_residual,
        }


@dataclass
class GainResult:
    """Optimal gain on the full state together with its reduced-space provenance.

    ``k_full = k_reduced @ c``. ``aux`` holds problem-specific extras (e.g. the
    per-agent Riccati solution of a homogeneous problem); ``notes`` holds
    human-readable remarks.
    """

    k_full: np.ndarray
    k_reduced: np.ndarray
    p_value: np.ndarray
    structure_tag: str = "generic"
    certificates: dict[str, float] = field(default_factory=dict)
    reduced: ReducedProblem | None = None
    solution: RiccatiSolution | None = None
    aux: dict[str, np.ndarray] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.structure_tag not in STRUCTURE_TAGS:
            raise ValueError(f"unknown structure tag {self.structure_tag!r}")

    @property
    def c(self) -> np.ndarray:
        return self.reduced.c.c

    def reduced_closed_loop(self) -> np.ndarray:
        return self.reduced.a_tilde + self.reduced.b_tilde @ self.k_reduced

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "k_full": nk.matrix_to_json(self.k_full),
            "k_reduced": nk.matrix_to_json(self.k_reduced),
            "p_value": nk.matrix_to_json(self.p_value),
            "structure_tag": self.structure_tag,
            "certificates": dict(self.certificates),
        }
        if self.aux:
            out["aux"] = {k: nk.matrix_to_json(v) for k, v in self.aux.items()}
        if self.notes:
            out["notes"] = list(self.notes)
        return out


def _require_pd(m: np.ndarray, name: str) -> np.ndarray:
    m = nk.check_symmetric(m, name)
    lmin = float(np.linalg.eigvalsh(m).min()) if m.size else 1.0
    if lmin <= 1e-10 * max(1.0, float(np.linalg.norm(m))):
        raise DefinitenessError(f"{name} must be positive definite (min eigenvalue {lmin:.3e})",
                                {"min_eigenvalue": lmin})
    return m


def solve_output_lqr(
    a: Any,
    b: Any,
    c: OutputMap | Any,
    q_tilde: Any,
    r: Any,
    structure_tag: str = "generic",
) -> GainResult:
    """Minimize the integral of ``y^T Q~ y + u^T R u`` for ``dx/dt = a x + b u``, ``y = c x``.

    Builds the reduced problem ``(c a c^T, c b, Q~, R)``, solves its CARE and
    lifts ``K~ = -R^{-1} (c b)^T P`` to ``K = K~ c``.

    Certificates
    ------------
    invariance_residual   ``||c a (I - c^T c)||``
    are_residual          reduced Riccati residual
    lift_residual         ``||K - K~ c||`` (zero by construction)
    kernel_residual       ``||K (I - c^T c)||``, the gain's action on ``ker c``
    """
    a = nk.as_matrix(a, "a")
    b = nk.as_matrix(b, "b")
    c = _as_output_map(c)
    if b.shape[0] != a.shape[0]:
        raise DimensionError(f"b must have {a.shape[0]} rows, got {b.shape}")
    a_tilde = induced_output_map(a, c)
    b_tilde = c.c @ b
    q_tilde = _require_pd(nk.as_matrix(q_tilde, "q_tilde"), "q_tilde")
    r = _require_pd(nk.as_matrix(r, "r"), "r")
    if q_tilde.shape != (c.m, c.m):
        raise DimensionError(f"q_tilde must be {c.m}x{c.m}, got {q_tilde.shape}")
    if r.shape != (b.shape[1], b.shape[1]):
        raise DimensionError(f"r must be {b.shape[1]}x{b.shape[1]}, got {r.shape}")
    ctrb = nk.is_controllable(a_tilde, b_tilde)
    if not ctrb:
        lam = ctrb.witness
        raise ControllabilityError(
            f"reduced pair (A~, CB) is not controllable at eigenvalue {lam:.6g}",
            {"eigenvalue": [lam.real, lam.imag]},
        )
    reduced = ReducedProblem(a_tilde, b_tilde, q_tilde, r, c, invariance_violation(a, c))
    care = reduced.care
    sol = solve_care_stabilizing(care)
    k_red = care.gain(sol.x)
    k_full = k_red @ c.c
    certs = {
        "invariance_residual": reduced.invariance_residual,
        "are_residual": sol.residual,
        "lift_residual": float(np.linalg.norm(k_full - k_red @ c.c)),
        "kernel_residual": float(np.linalg.norm(k_full @ (np.eye(c.n) - c.projection))),
    }
    return GainResult(k_full, k_red, sol.x, structure_tag, certs, reduced, sol)
