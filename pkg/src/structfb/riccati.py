"""
Continuous-time algebraic Riccati equation

    X B R^{-1} B^T X - X A - A^T X - Q = 0

solved for its stabilizing solution, certified by residual and closed-loop
spectrum, and analysed for the gap between the smallest positive semidefinite
solution and the maximal one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import linalg

from . import numkernel as nk
from .errors import (
    DefinitenessError,
    DimensionError,
    NoStabilizingSolutionError,
    NotStabilizableError,
    NotStabilizingError,
)

# Hamiltonian eigenvalues with |Re| below this (times max(1, ||H||)) abort
IMAG_AXIS_GUARD = 1e-8
NK_MAX_ITER = 50
NK_RTOL = 1e-11
SPECTRUM_TOL = 1e-9


@dataclass(frozen=True)
class CareProblem:
    a: np.ndarray
    b: np.ndarray
    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        a = nk.as_matrix(self.a, "a")
        b = nk.as_matrix(self.b, "b")
        n = nk.require_square(a, "a")
        if b.shape[0] != n:
            raise DimensionError(f"b must have {n} rows, got {b.shape}")
        q = nk.as_matrix(self.q, "q")
        r = nk.as_matrix(self.r, "r")
        if q.shape != (n, n):
            raise DimensionError(f"q must be {n}x{n}, got {q.shape}")
        if r.shape != (b.shape[1], b.shape[1]):
            raise DimensionError(f"r must be {b.shape[1]}x{b.shape[1]}, got {r.shape}")
        q = nk.check_symmetric(q, "q")
        r = nk.check_symmetric(r, "r")
        qmin = float(np.linalg.eigvalsh(q).min()) if n else 0.0
        if qmin < -1e-10 * max(1.0, float(np.linalg.norm(q))):
            raise DefinitenessError(f"q is not PSD (min eigenvalue {qmin:.3e})", {"min_eigenvalue": qmin})
        rmin = float(np.linalg.eigvalsh(r).min()) if r.size else 1.0
        if rmin < 1e-10:
            raise DefinitenessError(f"r is not PD (min eigenvalue {rmin:.3e})", {"min_eigenvalue": rmin})
        for name, val in (("a", a), ("b", b), ("q", q), ("r", r)):
            object.__setattr__(self, name, val)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def s(self) -> np.ndarray:
        """``B R^{-1} B^T``."""
        s = self.b @ np.linalg.solve(self.r, self.b.T)
        return 0.5 * (s + s.T)

    def residual(self, x: np.ndarray) -> float:
        res = x @ self.s @ x - x @ self.a - self.a.T @ x - self.q
        return float(np.linalg.norm(res))

    def gain(self, x: np.ndarray) -> np.ndarray:
        """Optimal feedback ``u = K x`` with ``K = -R^{-1} B^T X``."""
        return -np.linalg.solve(self.r, self.b.T @ x)

    def closed_loop(self, x: np.ndarray) -> np.ndarray:
        return self.a - self.s @ x

    def to_dict(self) -> dict[str, Any]:
        return {k: nk.matrix_to_json(getattr(self, k)) for k in ("a", "b", "q", "r")}


@dataclass(frozen=True)
class RiccatiSolution:
    x: np.ndarray
    residual: float
    closed_loop_spectrum: nk.Spectrum
    is_strong: bool
    is_stabilizing: bool
    iterations: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": nk.matrix_to_json(self.x),
            "residual": self.residual,
            "closed_loop_spectrum": self.closed_loop_spectrum.to_json(),
            "is_strong": self.is_strong,
            "is_stabilizing": self.is_stabilizing,
            "iterations": self.iterations,
        }


def _certify(p: CareProblem, x: np.ndarray, iterations: int = 0) -> RiccatiSolution:
    x = 0.5 * (x + x.T)
    acl = p.closed_loop(x)
    spec = nk.eig(acl)
    tol = SPECTRUM_TOL * max(1.0, float(np.linalg.norm(acl)))
    re = spec.eigenvalues.real
    return RiccatiSolution(
        x=x,
        residual=p.residual(x),
        closed_loop_spectrum=spec,
        is_strong=bool(np.all(re <= tol)),
        is_stabilizing=bool(np.all(re < -tol)),
        iterations=iterations,
    )


def hamiltonian(p: CareProblem) -> np.ndarray:
    return np.block([[p.a, -p.s], [-p.q, -p.a.T]])


def solve_care_stabilizing(p: CareProblem, polish: bool = True) -> RiccatiSolution:
    """Unique stabilizing solution via the stable Hamiltonian invariant subspace.

    The subspace comes from an ordered real Schur form of the Hamiltonian;
    ``X = U21 U11^{-1}``. One Newton-Kleinman pass then polishes the result.

    Raises
    ------
    NotStabilizableError
        ``(a, b)`` fails the PBH test at an eigenvalue in the closed right
        half-plane (the witness).
    NoStabilizingSolutionError
        The Hamiltonian has eigenvalues on (or within the guard band of) the
        imaginary axis.
    """
    n = p.n
    if n == 0:
        return _certify(p, np.zeros((0, 0)))
    stab = nk.is_stabilizable(p.a, p.b)
    if not stab:
        lam = stab.witness
        raise NotStabilizableError(
            f"(a, b) is not stabilizable: PBH fails at eigenvalue {lam:.6g}",
            {"eigenvalue": [lam.real, lam.imag]},
        )
    h = hamiltonian(p)
    guard = IMAG_AXIS_GUARD * max(1.0, float(np.linalg.norm(h)))
    t, u, sdim = linalg.schur(h, output="real", sort=lambda re, im: re < -guard)
    lam = linalg.eigvals(t)
    near_axis = lam[np.abs(lam.real) < guard]
    if near_axis.size or sdim != n:
        raise NoStabilizingSolutionError(
            "Hamiltonian has eigenvalues on the imaginary axis; no stabilizing solution",
            {"eigenvalues": [[float(z.real), float(z.imag)] for z in near_axis],
             "stable_count": int(sdim)},
        )
    u11, u21 = u[:n, :n], u[n:, :n]
    x = np.linalg.solve(u11.T, u21.T).T
    x = 0.5 * (x + x.T)
    if polish:
        try:
            return newton_kleinman_refine(p, x, max_iter=1)
        except NotStabilizingError:
            pass
    return _certify(p, x)


def newton_kleinman_refine(
    p: CareProblem, x0: Any, max_iter: int = NK_MAX_ITER, rtol: float = NK_RTOL
) -> RiccatiSolution:
    """Newton-Kleinman iteration from a stabilizing initial guess.

    Each step solves ``A_k^T X + X A_k + Q + K_k^T R K_k = 0`` with
    ``A_k = A - B R^{-1} B^T X_k``. Stops once the Riccati residual is at most
    ``rtol * max(1, ||Q||)``, when the iterates stop moving, or after
    ``max_iter`` steps.
    """
    x = nk.check_symmetric(nk.as_matrix(x0, "x0"), "x0", tol=1e-10)
    if x.shape != (p.n, p.n):
        raise DimensionError(f"x0 must be {p.n}x{p.n}, got {x.shape}")
    acl = p.closed_loop(x)
    abscissa = nk.spectral_abscissa(acl)
    if abscissa >= 0.0:
        raise NotStabilizingError(
            f"initial guess is not stabilizing (closed-loop abscissa {abscissa:.3e})",
            {"spectral_abscissa": abscissa},
        )
    target = rtol * max(1.0, float(np.linalg.norm(p.q)))
    it = 0
    best, best_res = x, p.residual(x)
    while best_res > target and it < max_iter:
        k = p.gain(x)
        acl = p.a + p.b @ k
        x_new = nk.solve_lyapunov(acl, p.q + k.T @ p.r @ k)
        it += 1
        step = float(np.linalg.norm(x_new - x))
        x = x_new
        res = p.residual(x)
        if res < best_res:
            best, best_res = x, res
        if step <= 1e-15 * max(1.0, float(np.linalg.norm(x))):
            break
    return _certify(p, best, iterations=it)


@dataclass(frozen=True)
class GapReport:
    gap_exists: bool
    unstable_undetectable_modes: list[tuple[complex, np.ndarray]]
    f_factor: np.ndarray
    g_factor: np.ndarray | None = None
    stabilizable: bool | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "gap_exists": self.gap_exists,
            "unstable_undetectable_modes": [
                {
                    "eigenvalue": [float(lam.real), float(lam.imag)],
                    "eigenvector_re": [float(v) for v in vec.real],
                    "eigenvector_im": [float(v) for v in vec.imag],
                }
                for lam, vec in self.unstable_undetectable_modes
            ],
            "f_factor": nk.matrix_to_json(self.f_factor) if self.f_factor.size else [],
        }
        if self.g_factor is not None:
            out["g_factor"] = nk.matrix_to_json(self.g_factor)
            out["stabilizable"] = self.stabilizable
        return out


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    pivot = v[np.argmax(np.abs(v))]
    return v * (abs(pivot) / pivot)


def gap_analysis(a: Any, q: Any, b: Any = None, r: Any = None, tol: float = 1e-9) -> GapReport:
    """Find unstable eigenvectors of ``a`` invisible to the cost factor ``f``.

    With ``f^T f = q``, an eigenvalue ``lam`` with ``Re lam > tol`` whose PBH
    matrix ``[a - lam I; f]`` drops rank contributes its kernel vectors. A
    non-empty list means the smallest PSD and the maximal Riccati solutions
    differ.

    If ``b`` and ``r`` are given, ``g`` with ``g g^T = r^{-1}`` is also returned
    together with the stabilizability of ``(a, b g)``.
    """
    a = nk.as_matrix(a, "a")
    n = nk.require_square(a, "a")
    q = nk.check_symmetric(nk.as_matrix(q, "q"), "q", tol=1e-10)
    if q.shape != (n, n):
        raise DimensionError(f"q must be {n}x{n}, got {q.shape}")
    f = nk.psd_factor(q)
    thr = tol * max(1.0, float(np.linalg.norm(a)))
    modes: list[tuple[complex, np.ndarray]] = []
    for lam in nk.distinct_eigenvalues(a):
        if lam.real <= thr:
            continue
        if abs(lam.imag) <= thr:
            lam = complex(lam.real, 0.0)
        basis = nk.undetectable_directions(a, f, lam)
        for k in range(basis.shape[1]):
            modes.append((lam, _normalize_phase(basis[:, k])))
    g = stabilizable = None
    if b is not None and r is not None:
        b = nk.as_matrix(b, "b")
        r = nk.check_symmetric(nk.as_matrix(r, "r"), "r")
        g = np.linalg.cholesky(np.linalg.inv(r))
        stabilizable = bool(nk.is_stabilizable(a, b @ g))
    return GapReport(bool(modes), modes, f, g, stabilizable)


@dataclass(frozen=True)
class DefinitenessCertificate:
    """Definiteness of ``x1 - x2``, with its eigenvalues as evidence."""

    difference: np.ndarray
    eigenvalues: np.ndarray
    classes: tuple[str, ...]

    @property
    def label(self) -> str:
        for name in ("PD", "ND", "PSD", "NSD"):
            if name in self.classes:
                return name
        return "indefinite"

    def to_dict(self) -> dict[str, Any]:
        return {
            "difference": nk.matrix_to_json(self.difference),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "classes": list(self.classes),
            "label": self.label,
        }


def compare_solutions(x1: Any, x2: Any, rtol: float = 1e-9) -> DefinitenessCertificate:
    """Classify ``x1 - x2`` as PD / PSD / ND / NSD / indefinite."""
    x1 = nk.as_matrix(x1, "x1")
    x2 = nk.as_matrix(x2, "x2")
    if x1.shape != x2.shape:
        raise DimensionError(f"shape mismatch {x1.shape} vs {x2.shape}")
    d = x1 - x2
    d = 0.5 * (d + d.T)
    w = np.linalg.eigvalsh(d)
    tol = rtol * max(1.0, float(np.linalg.norm(x1)), float(np.linalg.norm(x2)))
    classes = []
    if np.all(w > tol):
        classes.append("PD")
    if np.all(w >= -tol):
        classes.append("PSD")
    if np.all(w < -tol):
        classes.append("ND")
    if np.all(w <= tol):
        classes.append("NSD")
    if not classes:
        classes.append("indefinite")
    return DefinitenessCertificate(d, w, tuple(classes))
