"""Symmetric eigensolvers, orthogonal Procrustes and spectral norms.

Two eigensolvers live here. ``dense_symmetric_eigen`` is a cyclic Jacobi
method: cubic per sweep, but simple enough to serve as the reference that
the Krylov solver ``top_eigenpairs`` is checked against. Operators passed to
the Krylov routines are any callable ``v -> M @ v`` on 1-d float arrays;
``as_operator`` wraps a dense matrix.
"""
from dataclasses import dataclass

import numba
import numpy as np

from .exceptions import (
    DegenerateStartError,
    NoConvergenceError,
    NotSymmetricError,
    RankDeficientCrossError,
    TooLargeError,
)
from .rng import derive_rng

DENSE_MAX_N = 2000
JACOBI_MAX_SWEEPS = 60


@dataclass(frozen=True)
class EigenPairs:
    """Eigenvalues ordered by descending magnitude (or descending value for
    ``which="LA"``) with unit eigenvectors as matching columns."""

    values: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray = None

    def __len__(self):
        return len(self.values)


def _fix_signs(vectors):
    """Flip each column so its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _order(values, which):
    if which == "LM":
        # stable on ties: larger signed value first
        return np.lexsort((-values, -np.abs(values)))
    if which == "LA":
        return np.argsort(-values, kind="stable")
    raise ValueError(f"which must be 'LM' or 'LA', got {which!r}")


@numba.njit(cache=True)
def _jacobi_sweep(A, V, threshold):
    """One cyclic-by-row sweep in place; returns the number of rotations."""
    n = A.shape[0]
    rotations = 0
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = A[p, q]
            if abs(apq) <= threshold:
                continue
            tau = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = (1.0 if tau >= 0.0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            for r in range(n):
                a = A[r, p]
                b = A[r, q]
                A[r, p] = c * a - s * b
                A[r, q] = s * a + c * b
            for r in range(n):
                a = A[p, r]
                b = A[q, r]
                A[p, r] = c * a - s * b
                A[q, r] = s * a + c * b
            A[p, q] = 0.0
            A[q, p] = 0.0
            for r in range(n):
                a = V[r, p]
                b = V[r, q]
                V[r, p] = c * a - s * b
                V[r, q] = s * a + c * b
            rotations += 1
    return rotations


def dense_symmetric_eigen(M, *, which="LM"):
    """Full eigendecomposition of a small symmetric matrix by Jacobi rotations.

    Cyclic-by-row Jacobi; sweeps continue until every off-diagonal magnitude
    is at most ``1e-12 * ||M||_F``.

    Parameters
    ----------
    M : ndarray of shape (n, n)
        Symmetric to within ``1e-12`` (relative to the largest entry).
    which : {"LM", "LA"}
        Order by descending magnitude or by descending value.

    Returns
    -------
    EigenPairs
        All ``n`` pairs.
    """
    M = np.array(M, dtype=float, copy=True)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise NotSymmetricError(f"expected a square matrix, got shape {M.shape}")
    n = M.shape[0]
    if n > DENSE_MAX_N:
        raise TooLargeError(f"dense Jacobi is limited to n <= {DENSE_MAX_N}, got {n}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(M)))) if n else 1.0
    if n and np.max(np.abs(M - M.T)) > 1e-12 * scale:
        raise NotSymmetricError("matrix is not symmetric")
    A = np.ascontiguousarray(0.5 * (M + M.T))
    V = np.eye(n)
    if n > 1:
        threshold = 1e-12 * np.linalg.norm(A)
        for _ in range(JACOBI_MAX_SWEEPS):
            if _jacobi_sweep(A, V, threshold) == 0:
                break
        else:
            raise NoConvergenceError("Jacobi sweeps did not converge")
    values = np.diag(A).copy()
    idx = _order(values, which)
    return EigenPairs(values[idx], _fix_signs(V[:, idx]))


def as_operator(M):
    """Wrap a dense symmetric matrix as a matrix-vector callable."""
    M = np.asarray(M, dtype=float)

    def apply(v):
        return M @ v

    return apply


def _orthogonalize(w, basis):
    # classical Gram-Schmidt applied twice
    for _ in range(2):
        w = w - basis @ (basis.T @ w)
    return w


def top_eigenpairs(apply, n, k, *, tol=1e-10, max_iter=5, seed=0, which="LM",
                   basis_size=None):
    """Leading eigenpairs of a symmetric operator.

    Thick-restart Lanczos with full reorthogonalization. Each restart cycle
    grows an orthonormal basis to ``basis_size`` vectors, extracts Ritz pairs
    by projecting the operator onto the basis, and keeps the best Ritz
    vectors when it restarts.

    Parameters
    ----------
    apply : callable
        ``apply(v)`` returns ``M @ v`` for a symmetric ``M``.
    n : int
        Operator dimension.
    k : int
        Number of pairs wanted, ``k <= min(n, 64)``.
    tol : float
        A pair is converged when ``||M u - theta u|| <= tol * max(1, |theta|)``.
    max_iter : int
        Maximum number of restarts.
    seed : int
        Seed of the random start vector.
    which : {"LM", "LA"}
        Largest magnitude or largest algebraic eigenvalues.
    basis_size : int, optional
        Defaults to ``min(n, 4k + 20)``.

    Returns
    -------
    EigenPairs
        ``k`` pairs, with their final residual norms.
    """
    if k < 1 or k > min(n, 64):
        raise ValueError(f"need 1 <= k <= min(n, 64), got k={k}, n={n}")
    _order(np.zeros(1), which)
    m = basis_size if basis_size is not None else min(n, 4 * k + 20)
    m = max(min(m, n), min(n, k + 1))
    rng = derive_rng(seed)

    V = np.empty((n, m))
    AV = np.empty((n, m))
    j = 0

    def fresh_direction():
        for _ in range(4):  # the first draw plus up to 3 retries
            w = _orthogonalize(rng.standard_normal(n), V[:, :j])
            norm = np.linalg.norm(w)
            if norm > 1e-8:
                return w / norm
        raise DegenerateStartError("could not draw a start vector outside the current basis")

    nxt = fresh_direction()
    for restart in range(max_iter + 1):
        while j < m:
            raw = np.linalg.norm(nxt)
            w = _orthogonalize(nxt, V[:, :j])
            norm = np.linalg.norm(w)
            if raw == 0.0 or norm <= 1e-10 * raw:
                # invariant subspace reached; continue from a new direction
                if j >= n:
                    break
                w = fresh_direction()
                norm = 1.0
            V[:, j] = w / norm
            AV[:, j] = apply(V[:, j])
            nxt = AV[:, j]
            j += 1

        H = V[:, :j].T @ AV[:, :j]
        ritz = dense_symmetric_eigen(0.5 * (H + H.T), which=which)
        theta, Y = ritz.values, ritz.vectors
        U = V[:, :j] @ Y[:, :k]
        R = AV[:, :j] @ Y[:, :k] - U * theta[:k]
        res = np.linalg.norm(R, axis=0)
        if np.all(res <= tol * np.maximum(1.0, np.abs(theta[:k]))) or j >= n:
            return EigenPairs(theta[:k].copy(), _fix_signs(U), res)
        if restart == max_iter:
            break

        # continuation vector: next Krylov direction, orthogonal to the old basis
        nxt = _orthogonalize(AV[:, j - 1], V[:, :j])
        keep = min(j - 1, k + max(1, (m - k) // 2))
        Yk = Y[:, :keep]
        V[:, :keep] = V[:, :j] @ Yk
        AV[:, :keep] = AV[:, :j] @ Yk
        j = keep

    raise NoConvergenceError(
        f"Lanczos did not converge after {max_iter} restarts", residuals=res)


def procrustes(Xhat, X):
    """Orthogonal ``W`` minimizing ``||Xhat @ W - X||_F``.

    ``W`` is the orthogonal polar factor of ``Xhat.T @ X``. Its singular
    vectors come from the eigenvectors of the symmetric embedding
    ``[[0, C], [C.T, 0]]``, whose positive eigenvalues are the singular
    values of ``C``.
    """
    Xhat = np.asarray(Xhat, dtype=float)
    X = np.asarray(X, dtype=float)
    if Xhat.shape != X.shape or Xhat.ndim != 2:
        raise ValueError(f"shape mismatch: {Xhat.shape} vs {X.shape}")
    n, d = X.shape
    if d > n:
        raise ValueError(f"need d <= n, got d={d}, n={n}")
    C = Xhat.T @ X
    J = np.zeros((2 * d, 2 * d))
    J[:d, d:] = C
    J[d:, :d] = C.T
    eig = dense_symmetric_eigen(J, which="LA")
    sigma = eig.values[:d]
    if sigma[-1] <= 1e-12 * max(sigma[0], np.finfo(float).tiny):
        raise RankDeficientCrossError(f"Xhat.T @ X has rank < {d}")
    U = np.sqrt(2.0) * eig.vectors[:d, :d]
    Vt = np.sqrt(2.0) * eig.vectors[d:, :d]
    W = U @ Vt.T
    # polish: one Newton step of the polar iteration removes rounding drift
    return 0.5 * (W + np.linalg.inv(W).T)


def spectral_norm(apply, n, *, tol=1e-10, atol=0.0, seed=0, max_iter=20000):
    """Largest eigenvalue magnitude of a symmetric operator by power iteration.

    Iterates until the estimate ``||M v||`` changes by less than
    ``tol * estimate + atol`` between steps; ``atol`` keeps operators that
    are zero up to rounding from iterating forever.
    """
    rng = derive_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = apply(v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            return 0.0
        if abs(new - est) <= tol * new + atol:
            return new
        est = new
        v = w / new
    raise NoConvergenceError(f"power iteration did not converge in {max_iter} steps")
