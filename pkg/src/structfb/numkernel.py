"""
Dense real linear-algebra primitives.

Matrices are plain 2-D ``float64`` numpy arrays; :func:`as_matrix` is the one
entry point that validates shape and finiteness. Complex arithmetic only
appears inside eigen-decompositions and PBH rank tests.

Rank decisions throughout use singular values: ``sigma < RANK_RTOL * sigma_max``
counts as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import linalg

from .errors import (
    ConvergenceError,
    DimensionError,
    NonFiniteError,
    NotEigenvalueError,
    NotHurwitzError,
    NotSymmetricError,
)

RANK_RTOL = 1e-8
ORTHONORMAL_TOL = 1e-10
# two eigenvalues closer than this (relative to max(1, ||a||)) are one cluster
EIG_CLUSTER_RTOL = 1e-6


def as_matrix(x: Any, name: str = "matrix") -> np.ndarray:
    """Return ``x`` as a finite 2-D float array, raising on anything else."""
    m = np.array(x, dtype=float)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return m


def as_vector(x: Any, name: str = "vector") -> np.ndarray:
    v = np.array(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return v


def require_square(a: np.ndarray, name: str = "matrix") -> int:
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got {a.shape}")
    return a.shape[0]


def check_symmetric(a: np.ndarray, name: str = "matrix", tol: float = 1e-12) -> np.ndarray:
    """Return the symmetric part of ``a`` after checking ``a`` is symmetric to ``tol``.

    The tolerance is relative to ``max(1, ||a||_F)``.
    """
    require_square(a, name)
    viol = float(np.linalg.norm(a - a.T))
    if viol > tol * max(1.0, float(np.linalg.norm(a))):
        raise NotSymmetricError(
            f"{name} is not symmetric (||{name} - {name}^T|| = {viol:.3e})",
            {"violation_norm": viol},
        )
    return 0.5 * (a + a.T)


def matrix_to_json(m: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.atleast_2d(m)]


def kron(a: Any, b: Any) -> np.ndarray:
    """Kronecker product; block ``(i, j)`` of the result is ``a[i, j] * b``."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues and unit-norm eigenvectors (columns of ``eigenvectors``)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def max_residual(self, a: np.ndarray) -> float:
        """Largest ``||a v - lambda v||`` over all returned pairs."""
        if self.eigenvalues.size == 0:
            return 0.0
        r = a @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return float(np.max(np.linalg.norm(r, axis=0)))

    def to_json(self) -> list[list[float]]:
        return [[float(z.real), float(z.imag)] for z in self.eigenvalues]


def eig(a: Any) -> Spectrum:
    """Full eigendecomposition of a real square matrix.

    Symmetric input goes through the symmetric solver, which returns real
    eigenvalues and an orthonormal eigenbasis.
    """
    a = as_matrix(a, "a")
    require_square(a, "a")
    if a.size == 0:
        return Spectrum(np.zeros(0, dtype=complex), np.zeros((0, 0), dtype=complex))
    try:
        if np.array_equal(a, a.T):
            w, v = np.linalg.eigh(a)
        else:
            w, v = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc
    v = v / np.linalg.norm(v, axis=0)
    return Spectrum(w.astype(complex), v.astype(complex))


def eigvals(a: Any) -> np.ndarray:
    a = as_matrix(a, "a")
    require_square(a, "a")
    if a.size == 0:
        return np.zeros(0, dtype=complex)
    try:
        return np.linalg.eigvals(a).astype(complex)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration did not converge: {exc}") from exc


def spectral_abscissa(a: np.ndarray) -> float:
    w = eigvals(a)
    return float(np.max(w.real)) if w.size else -np.inf


def is_hurwitz(a: np.ndarray, tol: float = 0.0) -> bool:
    return spectral_abscissa(a) < -tol


def distinct_eigenvalues(a: np.ndarray) -> list[complex]:
    """Eigenvalues of ``a`` with clusters (repeated roots) merged to their mean."""
    w = eigvals(a)
    tol = EIG_CLUSTER_RTOL * max(1.0, float(np.linalg.norm(a, 2)))
    out: list[list[complex]] = []
    for lam in sorted(w, key=lambda z: (z.real, z.imag)):
        for cluster in out:
            if abs(cluster[0] - lam) <= tol:
                cluster.append(lam)
                break
        else:
            out.append([lam])
    return [complex(np.mean(c)) for c in out]


def numerical_rank(m: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s >= rtol * s[0]))


def null_space(m: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical kernel of ``m``."""
    ncols = m.shape[1]
    if m.shape[0] == 0:
        return np.eye(ncols, dtype=m.dtype)
    _, s, vh = np.linalg.svd(m)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s >= rtol * smax)) if smax > 0 else 0
    return vh[rank:].conj().T


def solve_lyapunov(a: Any, q: Any) -> np.ndarray:
    """Solve ``a^T X + X a + q = 0`` for symmetric ``X``.

    Parameters
    ----------
    a : (n, n) array_like
        Hurwitz matrix.
    q : (n, n) array_like
        Symmetric right-hand side.

    Raises
    ------
    NotHurwitzError
        If ``a`` has an eigenvalue with real part at or above ``-tol``; the
        equation then has no unique (or no bounded-integral) solution.
    """
    a = as_matrix(a, "a")
    q = as_matrix(q, "q")
    n = require_square(a, "a")
    if q.shape != (n, n):
        raise DimensionError(f"q must be {n}x{n}, got {q.shape}")
    q = check_symmetric(q, "q", tol=1e-10)
    abscissa = spectral_abscissa(a)
    tol = 1e-12 * max(1.0, float(np.linalg.norm(a)))
    if abscissa >= -tol:
        raise NotHurwitzError(
            f"matrix is not Hurwitz (spectral abscissa {abscissa:.3e})",
            {"spectral_abscissa": abscissa},
        )
    # scipy solves A X + X A^H = Q (Bartels-Stewart)
    x = linalg.solve_continuous_lyapunov(a.T, -q)
    return 0.5 * (x + x.T)


@dataclass(frozen=True)
class PBHResult:
    """Outcome of a PBH rank test; truthy iff the test passed."""

    ok: bool
    witness: complex | None = None
    rank_deficiency: int = 0

    def __bool__(self) -> bool:
        return self.ok


def _pbh_scan(a: np.ndarray, b: np.ndarray, eigenvalues: list[complex]) -> PBHResult:
    n = a.shape[0]
    for lam in eigenvalues:
        m = np.hstack([a - lam * np.eye(n), b.astype(complex)])
        r = numerical_rank(m)
        if r < n:
            return PBHResult(False, lam, n - r)
    return PBHResult(True)


def _check_pair(a: Any, b: Any) -> tuple[np.ndarray, np.ndarray]:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    n = require_square(a, "a")
    if b.shape[0] != n:
        raise DimensionError(f"b must have {n} rows, got {b.shape}")
    return a, b


def is_controllable(a: Any, b: Any) -> PBHResult:
    """PBH controllability test: ``rank [a - lam I, b] = n`` at every eigenvalue.

    The witness is the first eigenvalue (in ascending real part) where the
    rank drops.
    """
    a, b = _check_pair(a, b)
    if a.shape[0] == 0:
        return PBHResult(True)
    return _pbh_scan(a, b, distinct_eigenvalues(a))


def is_stabilizable(a: Any, b: Any, tol: float = 1e-8) -> PBHResult:
    """PBH test restricted to eigenvalues with ``Re >= -tol * max(1, ||a||)``."""
    a, b = _check_pair(a, b)
    if a.shape[0] == 0:
        return PBHResult(True)
    thr = -tol * max(1.0, float(np.linalg.norm(a)))
    lams = [lam for lam in distinct_eigenvalues(a) if lam.real >= thr]
    return _pbh_scan(a, b, lams)


def is_detectable_mode(a: Any, f: Any, lam: complex) -> bool:
    """PBH detectability at one eigenvalue: ``rank [a - lam I; f] = n``."""
    a = as_matrix(a, "a")
    f = as_matrix(f, "f")
    n = require_square(a, "a")
    if f.shape[1] != n and f.size:
        raise DimensionError(f"f must have {n} columns, got {f.shape}")
    f = f.reshape(-1, n)
    w = eigvals(a)
    gap = float(np.min(np.abs(w - lam))) if w.size else np.inf
    if gap > EIG_CLUSTER_RTOL * max(1.0, float(np.linalg.norm(a, 2))):
        raise NotEigenvalueError(
            f"{lam} is not an eigenvalue of a (distance {gap:.3e})",
            {"distance": gap},
        )
    m = np.vstack([a - lam * np.eye(n), f.astype(complex)])
    return numerical_rank(m) == n


def undetectable_directions(a: np.ndarray, f: np.ndarray, lam: complex) -> np.ndarray:
    """Orthonormal basis of ``ker [a - lam I; f]`` (the undetectable eigenvectors)."""
    n = a.shape[0]
    m = np.vstack([a - lam * np.eye(n), f.reshape(-1, n).astype(complex)])
    return null_space(m)


def orthonormal_rows_check(c: Any, tol: float = ORTHONORMAL_TOL) -> bool:
    """True iff ``||c c^T - I|| <= tol``."""
    c = as_matrix(c, "c")
    return bool(np.linalg.norm(c @ c.T - np.eye(c.shape[0])) <= tol)


def psd_factor(q: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Full-row-rank ``f`` with ``f^T f = q`` for symmetric PSD ``q``.

    Eigenvalues at or below ``rtol * lambda_max`` are dropped.
    """
    q = 0.5 * (q + q.T)
    w, v = np.linalg.eigh(q)
    lmax = float(w.max()) if w.size else 0.0
    if lmax <= 0.0:
        return np.zeros((0, q.shape[0]))
    keep = w > rtol * lmax
    return (v[:, keep] * np.sqrt(w[keep])).T
