"""
Closed-loop simulation, cost evaluation and grid data for plots.

Trajectories are integrated with fixed-step classical RK4 so that a given
``(x0, dt, horizon)`` always reproduces the same numbers.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.integrate import cumulative_trapezoid

from . import numkernel as nk
from .errors import DimensionError, SimulationError
from .reduction import GainResult, OutputMap

DEFAULT_EXTENT = 2.0
DEFAULT_RESOLUTION = 41


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (T, n)
    inputs: np.ndarray  # (T, p); p = 0 without a gain
    sync_error: np.ndarray  # (T, k)
    running_cost: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def write_csv(self, path: str | Path) -> None:
        """Columns ``t, x_1.., u_1.., e_norm, J_running`` at 9 significant digits."""
        n, p = self.states.shape[1], self.inputs.shape[1]
        header = ["t"] + [f"x_{i + 1}" for i in range(n)] + [f"u_{i + 1}" for i in range(p)]
        header += ["e_norm", "J_running"]
        cost = self.running_cost if self.running_cost.size else np.full(self.times.size, np.nan)
        e_norm = np.linalg.norm(self.sync_error, axis=1)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i, t in enumerate(self.times):
                row = [t, *self.states[i], *self.inputs[i], e_norm[i], cost[i]]
                w.writerow([f"{v:.9g}" for v in row])


def simulate_closed_loop(
    a_cl: Any,
    x0: Any,
    horizon: float,
    dt: float,
    k: Any = None,
    error_map: Any = None,
) -> Trajectory:
    """Integrate ``dx/dt = a_cl x`` with fixed-step RK4.

    ``k`` (optional) records ``u = k x`` alongside; ``error_map`` (optional)
    records ``e = error_map x`` (the synchronization error ``P_A x`` or the
    centroid). The last step is shortened if ``horizon`` is not a multiple of
    ``dt``.
    """
    a_cl = nk.as_matrix(a_cl, "a_cl")
    n = nk.require_square(a_cl, "a_cl")
    x = nk.as_vector(x0, "x0")
    if x.size != n:
        raise DimensionError(f"x0 must have {n} entries, got {x.size}")
    if not dt > 0 or not horizon >= dt:
        raise ValueError("need dt > 0 and horizon >= dt")
    steps = int(np.ceil(horizon / dt - 1e-9))
    times = np.minimum(np.arange(steps + 1) * dt, horizon)
    times[-1] = horizon
    states = np.empty((steps + 1, n))
    states[0] = x

    def f(v):
        return a_cl @ v

    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(steps):
            h = times[i + 1] - times[i]
            k1 = f(x)
            k2 = f(x + 0.5 * h * k1)
            k3 = f(x + 0.5 * h * k2)
            k4 = f(x + h * k3)
            x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(x)):
                raise SimulationError(f"state blew up at t = {times[i + 1]:.6g}",
                                      {"time": float(times[i + 1])})
            states[i + 1] = x
    if k is None:
        inputs = np.zeros((steps + 1, 0))
    else:
        inputs = states @ nk.as_matrix(k, "k").T
    if error_map is None:
        err = np.zeros((steps + 1, 0))
    else:
        err = states @ nk.as_matrix(error_map, "error_map").T
    return Trajectory(times, states, inputs, err)


def evaluate_cost(traj: Trajectory, state_weight: Any, k: Any, r: Any) -> float:
    """Trapezoidal integral of ``x^T S x + (K x)^T R (K x)`` along ``traj``.

    Fills ``traj.running_cost`` with the cumulative integral.
    """
    s = nk.as_matrix(state_weight, "state_weight")
    k = nk.as_matrix(k, "k")
    r = nk.as_matrix(r, "r")
    n = traj.states.shape[1]
    if s.shape != (n, n) or k.shape[1] != n or r.shape != (k.shape[0], k.shape[0]):
        raise DimensionError("weight / gain dimensions do not match the trajectory")
    x = traj.states
    u = x @ k.T
    integrand = np.einsum("ti,ij,tj->t", x, s, x) + np.einsum("ti,ij,tj->t", u, r, u)
    traj.running_cost = cumulative_trapezoid(integrand, traj.times, initial=0.0)
    return float(traj.running_cost[-1])


def value_matrix(gain: GainResult, c: OutputMap | Any | None = None) -> np.ndarray:
    """``X* = c^T P c``: the optimal cost from ``x0`` is ``x0^T X* x0``."""
    cm = gain.c if c is None else (c if isinstance(c, OutputMap) else OutputMap(c)).c
    x = cm.T @ gain.p_value @ cm
    return 0.5 * (x + x.T)


def exact_cost(a_cl: Any, q: Any, y0: Any) -> float:
    """Infinite-horizon cost ``y0^T X y0`` with ``a_cl^T X + X a_cl + q = 0``."""
    x = nk.solve_lyapunov(a_cl, q)
    y0 = nk.as_vector(y0, "y0")
    return float(y0 @ x @ y0)


def reduced_closed_loop_cost(gain: GainResult, x0: Any, horizon: float, dt: float) -> tuple[Trajectory, float]:
    """Cost of the optimal loop computed in output coordinates ``y = c x``.

    The full-state trajectory may diverge along ``ker c`` (an unstable
    synchronous mode) while the cost stays finite; the reduced loop is always
    stable.
    """
    red = gain.reduced
    y0 = red.c.c @ nk.as_vector(x0, "x0")
    traj = simulate_closed_loop(gain.reduced_closed_loop(), y0, horizon, dt, k=gain.k_reduced)
    return traj, evaluate_cost(traj, red.q_tilde, gain.k_reduced, red.r)


def reduced_exact_cost(gain: GainResult, x0: Any) -> float:
    red = gain.reduced
    k = gain.k_reduced
    y0 = red.c.c @ nk.as_vector(x0, "x0")
    return exact_cost(gain.reduced_closed_loop(), red.q_tilde + k.T @ red.r @ k, y0)


@dataclass
class GridField:
    grid_points: np.ndarray  # (M, 2)
    values: np.ndarray  # (M,) or (M, 2)

    def write_csv(self, path: str | Path) -> None:
        vec = self.values.ndim == 2
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x1", "x2", "f1", "f2"] if vec else ["x1", "x2", "v"])
            for pt, val in zip(self.grid_points, self.values):
                row = [*pt, *val] if vec else [*pt, val]
                w.writerow([f"{v:.9g}" for v in row])


def _grid(extent: float, resolution: int) -> np.ndarray:
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    ax = np.linspace(-extent, extent, resolution)
    x1, x2 = np.meshgrid(ax, ax, indexing="ij")
    return np.column_stack([x1.ravel(), x2.ravel()])


def surface_grid(x_mat: Any, extent: float = DEFAULT_EXTENT, resolution: int = DEFAULT_RESOLUTION) -> GridField:
    """Values of the quadratic form ``x0^T x_mat x0`` on a square grid."""
    x_mat = nk.as_matrix(x_mat, "x_mat")
    if x_mat.shape != (2, 2):
        raise DimensionError(f"surface_grid needs a 2x2 matrix, got {x_mat.shape}")
    pts = _grid(extent, resolution)
    return GridField(pts, np.einsum("ti,ij,tj->t", pts, x_mat, pts))


def effective_field_grid(
    a: Any, c: OutputMap | Any, extent: float = DEFAULT_EXTENT, resolution: int = DEFAULT_RESOLUTION
) -> GridField:
    """Drift ``x -> c^T c a x`` (the part of ``a x`` that moves the output) on a grid."""
    a = nk.as_matrix(a, "a")
    cm = (c if isinstance(c, OutputMap) else OutputMap(c)).c
    if a.shape != (2, 2) or cm.shape[1] != 2:
        raise DimensionError("effective_field_grid needs a two-dimensional state")
    pts = _grid(extent, resolution)
    m = cm.T @ cm @ a
    return GridField(pts, pts @ m.T)
