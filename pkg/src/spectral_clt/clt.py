"""Limiting covariances of the embedding residuals and their diagnostics.

For a latent position ``x`` the scaled residual ``sqrt(n) (Xhat W - X)_i``
of a vertex with ``X_i = x`` is asymptotically normal with covariance

    Sigma(x) = D^{-1} E[Y Y^T (x.Y - (x.Y)^2)] D^{-1},   D = E[Y Y^T],

which for a point-mass mixture is a finite sum over atoms. In one dimension
this reduces to ``(x E[Y^3] - x^2 E[Y^4]) / E[Y^2]^2``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    BadDimensionError,
    DomainError,
    EmptyBlockError,
    NonPositiveVarianceError,
    SingularDeltaError,
    SingularSigmaError,
    TooFewReplicatesError,
)
from .linalg import dense_symmetric_eigen, procrustes
from .model import moments as _moments
from .special import chi2_cdf, chi2_quantile_2df, normal_cdf
from .validation import check_open_unit


def sigma2_one_dim(x, moments):
    """Return ``(sigma2, scaled)`` with ``sigma2 = x m3 - x^2 m4`` and
    ``scaled = sigma2 / delta^2``, the limiting variance at ``x``."""
    if moments.m3 is None or moments.delta.shape != (1, 1):
        raise BadDimensionError("one-dimensional moments required")
    x = float(x)
    sigma2 = x * moments.m3 - x * x * moments.m4
    scaled = sigma2 / float(moments.delta[0, 0]) ** 2
    if scaled <= 0:
        raise NonPositiveVarianceError(f"limiting variance at x={x} is {scaled:.3g}")
    return sigma2, scaled


def _delta_inverse(dist):
    m = _moments_quiet(dist)
    eig = dense_symmetric_eigen(m.delta, which="LA")
    lam = eig.values
    if lam[-1] <= 0 or lam[0] / lam[-1] >= 1e12:
        raise SingularDeltaError("second-moment matrix is singular or ill-conditioned")
    return (eig.vectors / lam) @ eig.vectors.T


def _moments_quiet(dist):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return _moments(dist)


def covariance_matrix(x, dist):
    """Limiting residual covariance ``Sigma(x)`` for a point-mass mixture."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    Y, w = dist.atoms, dist.weights
    if x.shape != (dist.dim,):
        raise BadDimensionError(f"x must have length {dist.dim}")
    D_inv = _delta_inverse(dist)
    ip = Y @ x
    coef = w * (ip - ip * ip)
    middle = (Y * coef[:, None]).T @ Y
    S = D_inv @ middle @ D_inv
    return 0.5 * (S + S.T)


def block_covariances(dist):
    """``Sigma(x_k)`` for every atom, stacked as (m, d, d)."""
    return np.stack([covariance_matrix(a, dist) for a in dist.atoms])


def sample_covariance(R):
    """Sample covariance with divisor ``len(R) - 1``; NaN for fewer than 2 rows."""
    R = np.asarray(R, dtype=float)
    d = R.shape[1]
    if R.shape[0] < 2:
        return np.full((d, d), np.nan)
    C = R - R.mean(axis=0)
    S = C.T @ C / (R.shape[0] - 1)
    return 0.5 * (S + S.T)


@dataclass
class ResidualReport:
    """Aligned, scaled residuals of one embedding.

    ``residuals[i] = sqrt(n) * (xhat @ alignment - X)[i]``.
    """

    residuals: np.ndarray
    labels: np.ndarray
    empirical_cov: np.ndarray
    theoretical_cov: np.ndarray = None
    weights: np.ndarray = None
    alignment: np.ndarray = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.residuals.shape[0]

    @property
    def d(self):
        return self.residuals.shape[1]

    @property
    def n_blocks(self):
        return self.empirical_cov.shape[0]

    def to_csv(self, path):
        """One row per vertex: ``label, r1..rd``."""
        with open(path, "w", newline="\n") as fh:
            fh.write("label," + ",".join(f"r{k + 1}" for k in range(self.d)) + "\n")
            for lab, row in zip(self.labels, self.residuals):
                fh.write(f"{lab}," + ",".join(repr(float(v)) for v in row) + "\n")

    def summary_csv(self, path):
        """Per-block empirical and theoretical covariances, then diagnostics."""
        with open(path, "w", newline="\n") as fh:
            fh.write("kind,block,row,col,value\n")
            for k in range(self.n_blocks):
                for (i, j), v in np.ndenumerate(self.empirical_cov[k]):
                    fh.write(f"empirical,{k},{i},{j},{float(v)!r}\n")
                if self.theoretical_cov is not None:
                    for (i, j), v in np.ndenumerate(self.theoretical_cov[k]):
                        fh.write(f"theoretical,{k},{i},{j},{float(v)!r}\n")
            for key in sorted(self.diagnostics):
                fh.write(f"diagnostic,{key},,,{float(self.diagnostics[key])!r}\n")


def residual_report(sample, embedding, dist=None):
    """Align the embedding to the true latent positions and scale residuals.

    When the generating distribution is given, theoretical covariances and
    the Mahalanobis/chi-square diagnostics are filled in as well.
    """
    X = sample.latent
    n, d = X.shape
    if embedding.xhat.shape != X.shape:
        raise BadDimensionError("embedding dimension must match the latent dimension")
    W = procrustes(embedding.xhat, X)
    R = math.sqrt(n) * (embedding.xhat @ W - X)
    labels = np.asarray(sample.labels)
    K = dist.n_atoms if dist is not None else int(labels.max()) + 1
    emp = np.stack([sample_covariance(R[labels == k]) for k in range(K)])
    report = ResidualReport(R, labels, emp, alignment=W)
    report.diagnostics["alignment_distance"] = float(np.linalg.norm(W - np.eye(d)))
    if dist is not None:
        report.theoretical_cov = block_covariances(dist)
        report.weights = dist.weights.copy()
        report.diagnostics["mahalanobis_ks"] = mahalanobis_chisq_ks(report)
        for k in range(K):
            if np.any(labels == k):
                report.diagnostics[f"mahalanobis_ks_block{k}"] = mahalanobis_chisq_ks(
                    report, blocks=[k])
    return report


def ks_statistic(samples, cdf):
    """Kolmogorov-Smirnov sup-distance between the empirical CDF of
    ``samples`` and a continuous ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    m = x.size
    if m == 0:
        raise DomainError("no samples")
    F = cdf(x)
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - F), np.max(F - (i - 1) / m)))


def ks_normal_1d(samples, variance):
    if not variance > 0:
        raise DomainError(f"variance must be positive, got {variance}")
    return ks_statistic(samples, lambda z: normal_cdf(z, variance))


def mahalanobis_values(report, blocks=None):
    """``q_i = r_i^T Sigma(x_{label_i})^{-1} r_i`` for rows in ``blocks``."""
    if report.theoretical_cov is None:
        raise DomainError("report has no theoretical covariances")
    keep = _block_mask(report, blocks)
    q = np.empty(int(keep.sum()))
    R, labels = report.residuals[keep], report.labels[keep]
    for k in np.unique(labels):
        eig = dense_symmetric_eigen(report.theoretical_cov[k], which="LA")
        if eig.values[-1] <= 1e-12 * max(eig.values[0], 1e-300):
            raise SingularSigmaError(f"Sigma for block {k} is singular")
        Z = R[labels == k] @ eig.vectors / np.sqrt(eig.values)
        q[labels == k] = np.sum(Z * Z, axis=1)
    return q


def mahalanobis_chisq_ks(report, blocks=None):
    """KS distance between the Mahalanobis values and chi-square(d)."""
    q = mahalanobis_values(report, blocks)
    d = report.d
    return ks_statistic(q, lambda z: chi2_cdf(z, d))


def _block_mask(report, blocks):
    if blocks is None:
        return np.ones(report.n, dtype=bool)
    blocks = [int(b) for b in blocks]
    for b in blocks:
        if not np.any(report.labels == b):
            raise EmptyBlockError(f"block {b} has no vertices")
    return np.isin(report.labels, blocks)


@dataclass
class ConditionalReport:
    """Residual diagnostics restricted to vertices whose block is in ``blocks``."""

    blocks: tuple
    residuals: np.ndarray
    labels: np.ndarray
    weights: np.ndarray
    variances: np.ndarray
    mahalanobis_ks: float
    marginal_ks: np.ndarray

    def mixture_cdf(self, z, coord=0):
        """Weighted normal-mixture CDF of residual coordinate ``coord``."""
        z = np.asarray(z, dtype=float)
        return sum(w * normal_cdf(z, v) for w, v in zip(self.weights, self.variances[:, coord]))


def conditional_report(report, blocks):
    """Diagnostics conditional on the latent position lying in ``blocks``.

    The limit law over a set of blocks is the mixture of the per-block
    normals with the mixture weights renormalized to the set; each residual
    coordinate is compared with that mixture's marginal CDF.
    """
    if np.isscalar(blocks):
        blocks = [blocks]
    blocks = tuple(sorted(int(b) for b in blocks))
    keep = _block_mask(report, blocks)
    if report.theoretical_cov is None or report.weights is None:
        raise DomainError("report has no theoretical covariances")
    w = report.weights[list(blocks)]
    w = w / w.sum()
    variances = np.stack([np.diag(report.theoretical_cov[b]) for b in blocks])
    R = report.residuals[keep]
    view = ConditionalReport(blocks, R, report.labels[keep], w, variances,
                             mahalanobis_chisq_ks(report, blocks), None)
    view.marginal_ks = np.array([
        ks_statistic(R[:, j], lambda z, j=j: view.mixture_cdf(z, j)) for j in range(report.d)
    ])
    return view


def pairwise_independence(residuals):
    """Largest absolute cross-replicate correlation between different vertices.

    Parameters
    ----------
    residuals : ndarray of shape (replicates, K, d)
        Scaled residuals of ``K`` pinned vertices in each replicate.
    """
    R = np.asarray(residuals, dtype=float)
    if R.ndim == 2:
        R = R[:, :, None]
    reps, K, d = R.shape
    if reps < 100:
        raise TooFewReplicatesError(f"need at least 100 replicates, got {reps}")
    if K < 2:
        return 0.0
    flat = R.reshape(reps, K * d)
    C = np.corrcoef(flat, rowvar=False)
    owner = np.repeat(np.arange(K), d)
    cross = owner[:, None] != owner[None, :]
    return float(np.max(np.abs(C[cross])))


def level_curve(sigma, level, center, n, n_points=256):
    """Points on the ``level`` probability ellipse of ``N(center, sigma / n)``."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (2, 2):
        raise BadDimensionError("level curves are drawn for d = 2 only")
    level = check_open_unit(level, "level")
    eig = dense_symmetric_eigen(sigma, which="LA")
    if eig.values[-1] < -1e-10 * max(1.0, abs(eig.values[0])):
        raise DomainError("sigma must be positive semidefinite")
    root = (eig.vectors * np.sqrt(np.clip(eig.values, 0.0, None))) @ eig.vectors.T
    t = 2.0 * np.pi * np.arange(n_points) / n_points
    u = math.sqrt(chi2_quantile_2df(level)) * np.stack([np.cos(t), np.sin(t)], axis=1)
    return np.asarray(center, dtype=float) + (u @ root.T) / math.sqrt(n)


def inside_ellipse(points, sigma, level, center, n):
    """Mask of points inside the ``level`` ellipse of ``N(center, sigma / n)``."""
    diff = (np.asarray(points, dtype=float) - center) * math.sqrt(n)
    eig = dense_symmetric_eigen(np.asarray(sigma, dtype=float), which="LA")
    Z = diff @ eig.vectors / np.sqrt(eig.values)
    return np.sum(Z * Z, axis=1) <= chi2_quantile_2df(level)
