"""Independent reference computations used by the tests.

None of these go through the package's own solvers.
"""

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm


def jacobi_eigenvalues(a, tol=1e-14, max_sweeps=100):
    """Cyclic Jacobi rotations for a real symmetric matrix."""
    a = np.array(a, dtype=float)
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off < tol * max(1.0, np.linalg.norm(a)):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                j = np.eye(n)
                j[p, p] = j[q, q] = c
                j[p, q] = s
                j[q, p] = -s
                a = j.T @ a @ j
    return np.sort(np.diag(a))


def gram_schmidt(vectors):
    out = []
    for v in vectors:
        w = np.array(v, dtype=float)
        for u in out:
            w = w - (u @ w) * u
        out.append(w / np.linalg.norm(w))
    return np.column_stack(out)


def controllability_rank(a, b, rtol=1e-8):
    n = a.shape[0]
    blocks = [b]
    for _ in range(n - 1):
        blocks.append(a @ blocks[-1])
    m = np.hstack(blocks)
    s = np.linalg.svd(m, compute_uv=False)
    return int(np.sum(s > rtol * s[0]))


def lyapunov_by_quadrature(a, q):
    """``X = int_0^inf exp(a^T t) q exp(a t) dt``."""
    val, _ = quad_vec(lambda t: expm(a.T * t) @ q @ expm(a * t), 0.0, np.inf, epsabs=1e-12, epsrel=1e-10)
    return val


def scalar_care(a, b, q, r):
    """Stabilizing root of ``x^2 b^2 / r - 2 a x - q = 0``."""
    return r * (a + np.sqrt(a * a + q * b * b / r)) / (b * b)


def bass_gain(a, b):
    """Stabilizing gain ``K`` (``a + b K`` Hurwitz) by Bass' shifted-Gramian method.

    Solves ``(a + beta I) Z + Z (a + beta I)^T = 2 b b^T`` by vectorization
    and returns ``K = -b^T Z^{-1}``; requires ``(a, b)`` controllable.
    """
    n = a.shape[0]
    beta = max(0.0, np.max(np.linalg.eigvals(a).real)) + 1.0
    ab = a + beta * np.eye(n)
    lhs = np.kron(np.eye(n), ab) + np.kron(ab, np.eye(n))
    z = np.linalg.solve(lhs, (2.0 * b @ b.T).reshape(-1, order="F")).reshape(n, n, order="F")
    return -b.T @ np.linalg.inv(z)


def lyapunov_by_vectorization(a, q):
    """Solve ``a^T X + X a + q = 0`` via the Kronecker-vectorized linear system."""
    n = a.shape[0]
    lhs = np.kron(np.eye(n), a.T) + np.kron(a.T, np.eye(n))
    x = np.linalg.solve(lhs, -q.reshape(-1, order="F")).reshape(n, n, order="F")
    return 0.5 * (x + x.T)


def match_spectra(w1, w2):
    """Max distance after greedily pairing each eigenvalue of ``w1`` with one of ``w2``."""
    w2 = list(w2)
    worst = 0.0
    for z in sorted(w1, key=lambda z: (z.real, z.imag)):
        j = int(np.argmin([abs(z - y) for y in w2]))
        worst = max(worst, abs(z - w2.pop(j)))
    return worst


def random_orthogonal(rng, m):
    q, r = np.linalg.qr(rng.normal(size=(m, m)))
    return q * np.sign(np.diag(r))


def random_pd(rng, n, floor=0.5):
    m = rng.normal(size=(n, n))
    return m @ m.T + floor * np.eye(n)


def controllability_ratio(a, b):
    """``sigma_min / sigma_max`` of the controllability matrix."""
    blocks = [b]
    for _ in range(a.shape[0] - 1):
        blocks.append(a @ blocks[-1])
    s = np.linalg.svd(np.hstack(blocks), compute_uv=False)
    return s[a.shape[0] - 1] / s[0]


def random_controllable(rng, n, p, min_ratio=1e-3):
    """Random controllable pair, rejecting draws that are nearly uncontrollable.

    Near-uncontrollable pairs give Riccati solutions of norm ~1e5 whose
    residual cannot reach absolute 1e-9 in double precision.
    """
    while True:
        a = rng.normal(size=(n, n))
        b = rng.normal(size=(n, p))
        if controllability_ratio(a, b) >= min_ratio:
            return a, b
