"""K-means, full-covariance Gaussian mixture EM, and error scoring."""
import itertools
import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    DegeneratePointsError,
    DomainError,
    NumericalError,
    TooManyClassesError,
)
from .rng import derive_rng
from .validation import check_points, check_positive_int, check_probability_vector


def _sq_dists(X, centers):
    return (np.sum(X * X, axis=1)[:, None] - 2.0 * X @ centers.T
            + np.sum(centers * centers, axis=1)[None, :]).clip(min=0.0)


def _check_distinct(X, K):
    if len(np.unique(X, axis=0)) < K:
        raise DegeneratePointsError(f"fewer than {K} distinct points")


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia: float
    n_iter: int
    history: list


def _kmeans_pp(X, K, rng):
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = _sq_dists(X, centers[0][None, :])[:, 0]
    for _ in range(1, K):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(X[idx])
        d2 = np.minimum(d2, _sq_dists(X, X[idx][None, :])[:, 0])
    return np.array(centers)


def _lloyd(X, centers, max_iter):
    labels = None
    history = []
    for it in range(1, max_iter + 1):
        D = _sq_dists(X, centers)
        new = np.argmin(D, axis=1)
        history.append(float(D[np.arange(len(X)), new].sum()))
        if labels is not None and np.array_equal(new, labels):
            return labels, centers, history, it
        labels = new
        for k in range(len(centers)):
            members = X[labels == k]
            if len(members):
                centers[k] = members.mean(axis=0)
    return labels, centers, history, max_iter


def kmeans(points, K, seed, *, n_init=10, max_iter=300):
    """Lloyd's algorithm from k-means++ seeds; best of ``n_init`` restarts.

    Restart ``r`` draws its seeds from the stream ``(seed, r)``. Iterations
    stop at an assignment fixpoint or after ``max_iter`` steps.
    """
    X = check_points(points)
    K = check_positive_int(K, "K")
    if X.shape[0] < K:
        raise DomainError(f"need at least K={K} points")
    _check_distinct(X, K)
    best = None
    for r in range(n_init):
        rng = derive_rng(seed, r)
        labels, centers, history, it = _lloyd(X, _kmeans_pp(X, K, rng), max_iter)
        inertia = float(_sq_dists(X, centers)[np.arange(len(X)), labels].sum())
        if best is None or inertia < best.inertia:
            best = KMeansResult(labels, centers, inertia, it, history)
    return best


@dataclass(frozen=True)
class GaussianMixture:
    """Mixture of ``K`` multivariate normals."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = check_probability_vector(self.weights, atol=1e-10, name="weights")
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        covs = np.asarray(self.covariances, dtype=float)
        if covs.ndim == 2:
            covs = covs[None]
        K, d = means.shape
        if w.shape != (K,) or covs.shape != (K, d, d):
            raise DomainError("inconsistent mixture shapes")
        if np.max(np.abs(covs - covs.transpose(0, 2, 1))) > 1e-10 * max(1.0, np.abs(covs).max()):
            raise DomainError("covariances must be symmetric")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "covariances", 0.5 * (covs + covs.transpose(0, 2, 1)))

    @property
    def n_components(self):
        return len(self.weights)

    @property
    def dim(self):
        return self.means.shape[1]

    def weighted_log_density(self, X):
        """``log w_k + log N(x; mu_k, Sigma_k)`` as an (n, K) array."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n, d = X.shape
        out = np.empty((n, self.n_components))
        for k in range(self.n_components):
            try:
                L = np.linalg.cholesky(self.covariances[k])
            except np.linalg.LinAlgError:
                raise NumericalError(f"covariance {k} is not positive definite") from None
            Z = np.linalg.solve(L, (X - self.means[k]).T)
            out[:, k] = (math.log(self.weights[k]) - 0.5 * np.sum(Z * Z, axis=0)
                         - np.sum(np.log(np.diag(L))) - 0.5 * d * math.log(2.0 * math.pi))
        return out

    def log_likelihood(self, X):
        return float(_logsumexp(self.weighted_log_density(X)).sum())

    def predict(self, X):
        return np.argmax(self.weighted_log_density(X), axis=1)

    def sample(self, n, rng):
        labels = rng.choice(self.n_components, size=n, p=self.weights)
        X = np.empty((n, self.dim))
        for k in range(self.n_components):
            idx = np.flatnonzero(labels == k)
            L = np.linalg.cholesky(self.covariances[k])
            X[idx] = self.means[k] + rng.standard_normal((len(idx), self.dim)) @ L.T
        return X, labels


def _logsumexp(a):
    m = np.max(a, axis=1, keepdims=True)
    return (m + np.log(np.sum(np.exp(a - m), axis=1, keepdims=True)))[:, 0]


@dataclass
class GMMResult:
    mixture: GaussianMixture
    labels: np.ndarray
    log_likelihood: float
    history: list
    converged: bool
    n_iter: int


def gmm_em(points, K, seed, *, max_iter=500, tol=1e-8):
    """Full-covariance Gaussian mixture fitted by EM.

    Starts from the k-means solution (proportions, centers, within-cluster
    covariances). Stops when the mean per-point log-likelihood gains less
    than ``tol`` or after ``max_iter`` iterations (``converged`` is then
    False). Covariances carry a ridge of ``1e-9 * trace(cov(points)) / d``.
    A log-likelihood decrease beyond ``1e-9`` relative raises
    ``NumericalError``.
    """
    X = check_points(points)
    K = check_positive_int(K, "K")
    n, d = X.shape
    if n < 10 * K:
        raise DomainError(f"need at least 10*K = {10 * K} points, got {n}")
    _check_distinct(X, K)
    km = kmeans(X, K, seed)
    spread = np.trace(np.atleast_2d(np.cov(X, rowvar=False, bias=True)))
    ridge = 1e-9 * spread / d * np.eye(d)

    resp = np.zeros((n, K))
    resp[np.arange(n), km.labels] = 1.0
    mixture = _m_step(X, resp, ridge)
    history = []
    converged = False
    for it in range(1, max_iter + 1):
        logp = mixture.weighted_log_density(X)
        norm = _logsumexp(logp)
        ll = float(norm.sum())
        if history:
            prev = history[-1]
            if ll < prev - 1e-9 * abs(prev):
                raise NumericalError(f"EM log-likelihood decreased from {prev!r} to {ll!r}")
            if (ll - prev) / n < tol:
                history.append(ll)
                converged = True
                break
        history.append(ll)
        resp = np.exp(logp - norm[:, None])
        mixture = _m_step(X, resp, ridge)
    else:
        logp = mixture.weighted_log_density(X)
        history.append(float(_logsumexp(logp).sum()))
        it = max_iter
    labels = np.argmax(logp, axis=1)
    return GMMResult(mixture, labels, history[-1], history, converged, it)


def _m_step(X, resp, ridge):
    n, d = X.shape
    Nk = resp.sum(axis=0)
    if np.any(Nk < 1e-10):
        raise DegeneratePointsError("a mixture component lost all its mass")
    weights = Nk / n
    means = (resp.T @ X) / Nk[:, None]
    covs = np.empty((len(Nk), d, d))
    for k in range(len(Nk)):
        C = X - means[k]
        covs[k] = (C * resp[:, k:k + 1]).T @ C / Nk[k] + ridge
    return GaussianMixture(weights / weights.sum(), means, covs)


def misclassification(pred, true):
    """Smallest error rate over all relabelings of ``pred``."""
    pred = np.asarray(pred).ravel()
    true = np.asarray(true).ravel()
    if pred.shape != true.shape or pred.size == 0:
        raise DomainError("label arrays must be non-empty and of equal length")
    p_vals, p_idx = np.unique(pred, return_inverse=True)
    t_vals, t_idx = np.unique(true, return_inverse=True)
    K = max(len(p_vals), len(t_vals))
    if K > 8:
        raise TooManyClassesError(f"permutation search is limited to 8 classes, got {K}")
    confusion = np.zeros((K, K), dtype=np.int64)
    np.add.at(confusion, (p_idx, t_idx), 1)
    rows = np.arange(K)
    best = max(confusion[rows, list(perm)].sum() for perm in itertools.permutations(range(K)))
    return (pred.size - best) / pred.size


def bayes_error(mixture, n_mc, seed, *, chunk=1_000_000):
    """Monte Carlo error of the Bayes classifier for a known mixture.

    Returns ``(rate, standard_error)``.
    """
    if n_mc < 100_000:
        raise DomainError(f"n_mc must be at least 1e5, got {n_mc}")
    rng = derive_rng(seed)
    wrong = 0
    done = 0
    while done < n_mc:
        m = min(chunk, n_mc - done)
        X, labels = mixture.sample(m, rng)
        wrong += int(np.sum(mixture.predict(X) != labels))
        done += m
    rate = wrong / n_mc
    return rate, math.sqrt(rate * (1.0 - rate) / n_mc)


class KMeans(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`kmeans`."""

    def __init__(self, n_clusters=2, n_init=10, max_iter=300, random_state=0):
        self.n_clusters = n_clusters
        self.n_init = n_init
        self.max_iter = max_iter
        self.random_state = random_state

    def fit(self, X, y=None):
        res = kmeans(X, self.n_clusters, self.random_state, n_init=self.n_init,
                     max_iter=self.max_iter)
        self.labels_ = res.labels
        self.cluster_centers_ = res.centers
        self.inertia_ = res.inertia
        self.n_iter_ = res.n_iter
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        return np.argmin(_sq_dists(check_points(X), self.cluster_centers_), axis=1)


class GaussianMixtureEM(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`gmm_em`."""

    def __init__(self, n_components=2, max_iter=500, tol=1e-8, random_state=0):
        self.n_components = n_components
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def fit(self, X, y=None):
        res = gmm_em(X, self.n_components, self.random_state, max_iter=self.max_iter,
                     tol=self.tol)
        self.mixture_ = res.mixture
        self.labels_ = res.labels
        self.log_likelihood_ = res.log_likelihood
        self.converged_ = res.converged
        self.n_iter_ = res.n_iter
        return self

    def predict(self, X):
        check_is_fitted(self, "mixture_")
        return self.mixture_.predict(check_points(X))

    def score(self, X, y=None):
        """Mean per-point log-likelihood."""
        check_is_fitted(self, "mixture_")
        X = check_points(X)
        return self.mixture_.log_likelihood(X) / X.shape[0]
