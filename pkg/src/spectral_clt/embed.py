"""Adjacency spectral embedding and the UPCA frame of the latent positions."""
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DegenerateSpectrumError, DomainError
from .linalg import as_operator, dense_symmetric_eigen, procrustes, spectral_norm, top_eigenpairs
from .model import GraphSample
from .validation import check_open_unit, check_positive_int, check_symmetric_matrix


@dataclass(frozen=True)
class Embedding:
    """``xhat = vectors * sqrt(values)`` from the top-``d`` eigenpairs of A."""

    values: np.ndarray
    vectors: np.ndarray
    xhat: np.ndarray

    @property
    def d(self):
        return len(self.values)

    @property
    def n(self):
        return self.vectors.shape[0]

    def to_csv(self, path):
        """Eigenvalues on the first line, then one row of ``d`` coordinates
        per vertex."""
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(repr(float(v)) for v in self.values) + "\n")
            for row in self.xhat:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")


def read_embedding(path):
    lines = open(path).read().splitlines()
    values = np.array([float(v) for v in lines[0].split(",")])
    xhat = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
    xhat = xhat.reshape(-1, len(values))
    return Embedding(values, xhat / np.sqrt(values), xhat)


@dataclass(frozen=True)
class Upca:
    """Uncentered principal components ``xtilde = v * sqrt(s)`` of ``X``.

    ``w`` is the orthogonal matrix with ``xtilde @ w == X``.
    """

    xtilde: np.ndarray
    v: np.ndarray
    s: np.ndarray
    w: np.ndarray


def _adjacency_operator(adjacency):
    if isinstance(adjacency, GraphSample):
        return as_operator(adjacency.adjacency()), adjacency.n
    if callable(adjacency):
        raise TypeError("pass a GraphSample or a dense matrix")
    A = np.asarray(adjacency, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DomainError(f"adjacency must be square, got shape {A.shape}")
    return as_operator(A), A.shape[0]


def ase(adjacency, d, *, which="LM", tol=1e-10, max_iter=5, seed=None):
    """Adjacency spectral embedding.

    Parameters
    ----------
    adjacency : GraphSample or ndarray of shape (n, n)
    d : int
        Embedding dimension.
    which : {"LM", "LA"}
        ``"LM"`` keeps the ``d`` eigenvalues largest in magnitude; ``"LA"``
        keeps the ``d`` largest (positive) ones. They agree once the
        signal eigenvalues clear the noise bulk.
    seed : int, optional
        Start-vector seed; defaults to the graph's seed (or 0).

    Raises
    ------
    DegenerateSpectrumError
        If a retained eigenvalue is not strictly positive.
    """
    apply, n = _adjacency_operator(adjacency)
    d = check_positive_int(d, "d")
    if n <= d:
        raise DomainError(f"need n > d, got n={n}, d={d}")
    if seed is None:
        seed = adjacency.seed if isinstance(adjacency, GraphSample) else 0
    eig = top_eigenpairs(apply, n, d, tol=tol, max_iter=max_iter, seed=seed, which=which)
    if np.any(eig.values <= 0):
        raise DegenerateSpectrumError(
            f"top-{d} eigenvalues include a non-positive value: {eig.values}")
    return Embedding(eig.values, eig.vectors, eig.vectors * np.sqrt(eig.values))


def upca(X):
    """UPCA of a latent matrix through the ``d x d`` Gram matrix ``X^T X``.

    With ``X^T X = Q L Q^T``: ``V = X Q L^{-1/2}``, ``S = L`` and
    ``xtilde = X Q``; the ``n x n`` matrix ``X X^T`` is never formed.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    eig = dense_symmetric_eigen(X.T @ X, which="LA")
    lam = eig.values
    if lam[-1] <= 1e-12 * max(lam[0], 1.0):
        raise DomainError(f"X has rank < {X.shape[1]}")
    V = X @ eig.vectors / np.sqrt(lam)
    signs = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    V = V * signs
    xtilde = V * np.sqrt(lam)
    W = procrustes(xtilde, X)
    if np.linalg.norm(xtilde @ W - X) >= 1e-8 * max(1.0, np.linalg.norm(X)):
        raise DomainError("UPCA alignment failed")
    return Upca(xtilde, V, lam, W)


def match_signs(reference, other):
    """Per-column signs ``D`` such that ``other * D`` best matches ``reference``."""
    signs = np.sign(np.sum(reference * other, axis=0))
    signs[signs == 0] = 1.0
    return signs


@dataclass(frozen=True)
class ConcentrationReport:
    """Observed deviations next to their high-probability bounds."""

    n: int
    d: int
    eta: float
    delta_min: float
    xhat_error: float
    vhat_error: float
    a_minus_p: float
    s_error: float
    vtv_error: float
    lambda1_error: float
    xhat_bound: float
    vhat_bound: float
    a_minus_p_bound: float

    def violations(self):
        return {
            "xhat": self.xhat_error > self.xhat_bound,
            "vhat": self.vhat_error > self.vhat_bound,
            "a_minus_p": bool(self.a_minus_p > self.a_minus_p_bound),
        }


def concentration_bounds(n, d, eta, delta_min):
    """``(||Xhat - Xtilde||_F, ||Vhat - V||_F, ||A - P||)`` bound values."""
    log_term = math.log(n / eta)
    return (
        4.0 / delta_min * math.sqrt(2.0 * d * log_term),
        4.0 / delta_min * math.sqrt(2.0 * d * log_term / n),
        2.0 * math.sqrt(n * log_term),
    )


def concentration_report(sample, embedding, upca_, eta, *, delta_min=None,
                         adjacency=None, norm_tol=1e-6, compute_norm=True):
    """Concentration diagnostics for one graph.

    Parameters
    ----------
    sample : GraphSample
    embedding : Embedding
        Computed from ``adjacency`` (defaults to the sample's adjacency).
    upca_ : Upca
        UPCA of ``sample.latent``.
    eta : float
        Failure probability in (0, 1/2).
    delta_min : float, optional
        Smallest eigenvalue of the population second-moment matrix; defaults
        to that of ``X^T X / n``.
    adjacency : ndarray, optional
        Replacement for the sampled adjacency (e.g. ``P`` itself).
    compute_norm : bool
        Power-iterate for ``||A - P||``; when False the field is NaN (the
        iteration is slow for large ``n`` since the bulk has no gap).
    """
    eta = check_open_unit(eta, "eta", upper=0.5)
    X = sample.latent
    n, d = X.shape
    if embedding.d != d:
        raise DomainError("embedding dimension must match the latent dimension")
    if delta_min is None:
        delta_min = float(dense_symmetric_eigen(X.T @ X / n, which="LA").values[-1])
    A = sample.adjacency() if adjacency is None else np.asarray(adjacency, dtype=float)

    W = procrustes(embedding.xhat, upca_.xtilde)
    xhat_error = float(np.linalg.norm(embedding.xhat @ W - upca_.xtilde))
    D = match_signs(upca_.v, embedding.vectors)
    vhat = embedding.vectors * D
    vhat_error = float(np.linalg.norm(vhat - upca_.v))
    vtv_error = float(np.linalg.norm(upca_.v.T @ vhat - np.eye(d)))
    s_error = float(np.linalg.norm(upca_.s - embedding.values))
    lambda1_error = float(abs(embedding.values[0] - upca_.s[0]))

    def residual_op(v):
        return A @ v - X @ (X.T @ v)

    a_minus_p = (spectral_norm(residual_op, n, tol=norm_tol, atol=1e-12 * n, seed=sample.seed)
                 if compute_norm else math.nan)
    xb, vb, ab = concentration_bounds(n, d, eta, delta_min)
    return ConcentrationReport(n, d, eta, delta_min, xhat_error, vhat_error, a_minus_p,
                               s_error, vtv_error, lambda1_error, xb, vb, ab)


class AdjacencySpectralEmbedding(BaseEstimator):
    """Estimator wrapper around :func:`ase`.

    Parameters
    ----------
    n_components : int
    which : {"LM", "LA"}
    tol : float
    max_iter : int
    random_state : int

    Attributes
    ----------
    latent_position_ : ndarray of shape (n, n_components)
    eigenvalues_ : ndarray of shape (n_components,)
    eigenvectors_ : ndarray of shape (n, n_components)
    """

    def __init__(self, n_components=2, which="LM", tol=1e-10, max_iter=5, random_state=0):
        self.n_components = n_components
        self.which = which
        self.tol = tol
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        if not isinstance(X, GraphSample):
            X = check_symmetric_matrix(X, name="adjacency")
        emb = ase(X, self.n_components, which=self.which, tol=self.tol,
                  max_iter=self.max_iter, seed=self.random_state)
        self.embedding_ = emb
        self.latent_position_ = emb.xhat
        self.eigenvalues_ = emb.values
        self.eigenvectors_ = emb.vectors
        self.n_features_in_ = emb.n
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).latent_position_

    def transform(self, X=None):
        """Embedding of the fitted graph (out-of-sample vertices are not
        supported)."""
        check_is_fitted(self, "latent_position_")
        if X is not None and not isinstance(X, GraphSample):
            X = np.asarray(X)
            if X.shape != (self.n_features_in_, self.n_features_in_):
                raise DomainError("transform only accepts the fitted adjacency")
        return self.latent_position_
