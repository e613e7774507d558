"""
Two unstable scalar agents ``dx_i/dt = x_i + u_i`` with ``Q = R = I_2``.

This is the smallest instance where the full stacked Riccati equation has a
gap: its stabilizing (strong, maximal) solution X_s is not diffusive and not
optimal, while the reduced problem gives the optimal diffusive gain directly.
:func:`run_reference_example` recomputes every reference value and checks
it at four-decimal precision.
"""

from __future__ import annotations

from typing import Any

import numpy as np

from . import numkernel as nk
from .multiagent import FullWeights, LinearSystem, MultiAgentProblem, solve_sync
from .riccati import CareProblem, compare_solutions, gap_analysis, solve_care_stabilizing
from .simulate import value_matrix

PRINT_TOL = 1e-3
RESIDUAL_TOL = 1e-9

EXPECTED: dict[str, Any] = {
    "P": [[2.4142]],
    "K_reduced": [[1.7071], [-1.7071]],
    "K": [[-1.2071, 1.2071], [1.2071, -1.2071]],
    "closed_loop_eigenvalues": [-1.4142, 1.0],
    "X_star": [[1.2071, -1.2071], [-1.2071, 1.2071]],
    "X_s": [[2.2071, -0.2071], [-0.2071, 2.2071]],
    "X_star_minus_X_s": [[-1.0, -1.0], [-1.0, -1.0]],
}


def reference_problem(a: float = 1.0) -> MultiAgentProblem:
    return MultiAgentProblem("sync", LinearSystem([[a]], [[1.0]]), 2, FullWeights(np.eye(2), np.eye(2)))


def _close(actual: Any, expected: Any, tol: float) -> bool:
    actual, expected = np.asarray(actual, float), np.asarray(expected, float)
    return actual.shape == expected.shape and bool(np.max(np.abs(actual - expected)) <= tol)


def run_reference_example(tol: float = PRINT_TOL, residual_tol: float = RESIDUAL_TOL) -> dict[str, Any]:
    prob = reference_problem()
    gain = solve_sync(prob)
    c = gain.c
    x_star = value_matrix(gain)
    acl = prob.stacked_a + prob.stacked_b @ gain.k_full
    cl_eigs = np.sort(nk.eigvals(acl).real)

    # the full stacked problem with cost weight P_A Q P_A = C^T Q~ C
    q_check = c.T @ gain.reduced.q_tilde @ c
    full = CareProblem(prob.stacked_a, prob.stacked_b, q_check, np.eye(2))
    strong = solve_care_stabilizing(full)
    x_s = strong.x
    cmp = compare_solutions(x_star, x_s)
    gap = gap_analysis(prob.stacked_a, q_check, prob.stacked_b, np.eye(2))

    values = {
        "P": gain.p_value,
        "K_reduced": gain.k_reduced,
        "K": gain.k_full,
        "closed_loop_eigenvalues": cl_eigs,
        "X_star": x_star,
        "X_s": x_s,
        "X_star_minus_X_s": cmp.difference,
    }
    checks = {name: _close(values[name], EXPECTED[name], tol) for name in EXPECTED}
    checks["X_star_minus_X_s_nsd"] = "NSD" in cmp.classes
    checks["diffusive"] = gain.certificates["diffusive_residual"] <= 1e-10
    checks["reduced_are_residual"] = gain.certificates["are_residual"] <= residual_tol
    checks["full_are_residual"] = strong.residual <= residual_tol
    checks["gap_detected"] = gap.gap_exists
    return {
        "values": {k: nk.matrix_to_json(np.atleast_2d(v)) if np.ndim(v) == 2 else [float(z) for z in v]
                   for k, v in values.items()},
        "expected": EXPECTED,
        "closed_loop_spectrum": nk.eig(acl).to_json(),
        "residuals": {"reduced_are": gain.certificates["are_residual"], "full_are": strong.residual},
        "gap": gap.to_dict(),
        "definiteness": cmp.to_dict(),
        "checks": checks,
        "tolerance": tol,
        "passed": all(checks.values()),
    }
