"""Latent-position distributions and random dot product graph sampling.

A distribution is a finite mixture of point masses (atoms) in R^d whose
pairwise inner products are valid edge probabilities. Sampled graphs keep
their adjacency as the bit-packed strict upper triangle, in row-major
order; ``GraphSample.adjacency`` expands it on demand.
"""
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import DomainError, NotPSDError, RankDeficientError
from .linalg import dense_symmetric_eigen
from .rng import check_seed, derive_rng
from .validation import check_matrix, check_probability_vector

# rows per block are chosen so a block holds about this many entries
_BLOCK_ENTRIES = 1 << 22


class DegenerateMomentsWarning(UserWarning):
    """The second-moment matrix has repeated or vanishing eigenvalues."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LatentDistribution:
    """Finite point-mass mixture ``sum_k weights[k] * delta(atoms[k])``.

    Parameters
    ----------
    atoms : array-like of shape (m, d)
    weights : array-like of shape (m,)
        Strictly positive, summing to one within ``1e-12``.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        if atoms.ndim != 2 or atoms.shape[0] < 1 or atoms.shape[1] < 1:
            raise DomainError(f"atoms must be a non-empty (m, d) array, got shape {atoms.shape}")
        if not np.all(np.isfinite(atoms)):
            raise DomainError("atoms must be finite")
        weights = check_probability_vector(self.weights, atol=1e-12, name="weights")
        if weights.shape[0] != atoms.shape[0]:
            raise DomainError(f"{atoms.shape[0]} atoms but {weights.shape[0]} weights")
        if len(np.unique(atoms, axis=0)) != atoms.shape[0]:
            raise DomainError("atoms must be distinct")
        gram = atoms @ atoms.T
        tol = 1e-10
        if np.min(gram) < -tol or np.max(gram) > 1 + tol:
            raise DomainError("atom inner products must lie in [0, 1]")
        object.__setattr__(self, "atoms", _frozen(atoms))
        object.__setattr__(self, "weights", _frozen(weights))

    @property
    def dim(self):
        return self.atoms.shape[1]

    @property
    def n_atoms(self):
        return self.atoms.shape[0]

    def gram(self):
        """Edge probabilities between atoms, clipped to [0, 1]."""
        return np.clip(self.atoms @ self.atoms.T, 0.0, 1.0)

    def sample_labels(self, n, rng):
        return rng.choice(self.n_atoms, size=n, p=self.weights)

    def __eq__(self, other):
        if not isinstance(other, LatentDistribution):
            return NotImplemented
        return (np.array_equal(self.atoms, other.atoms)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None


@dataclass(frozen=True)
class MomentSet:
    delta: np.ndarray
    delta_eigs: np.ndarray
    m3: float = None
    m4: float = None
    degenerate: bool = False

    @property
    def delta_min(self):
        """Smallest eigenvalue of the second-moment matrix."""
        return float(self.delta_eigs[-1])


def sbm_to_latent(B, pi):
    """Latent positions reproducing a positive definite block matrix.

    With ``B = Q diag(lam) Q^T`` (eigenvalues descending, each eigenvector
    signed so its last entry is non-negative), the atoms are the rows of
    ``Q diag(sqrt(lam))``, so ``atoms @ atoms.T == B``.
    """
    B = check_matrix(B, square=True, name="B")
    if np.max(np.abs(B - B.T)) > 1e-12:
        raise DomainError("B must be symmetric")
    if np.min(B) < 0 or np.max(B) > 1:
        raise DomainError("B entries must lie in [0, 1]")
    eig = dense_symmetric_eigen(B, which="LA")
    lam, Q = eig.values, eig.vectors
    if lam[-1] < -1e-10:
        raise NotPSDError(f"B has a negative eigenvalue {lam[-1]:.3g}")
    if lam[-1] <= 1e-10:
        raise RankDeficientError(f"B is singular (eigenvalue {lam[-1]:.3g})")
    Q = Q * np.where(Q[-1] < 0, -1.0, 1.0)
    return LatentDistribution(Q * np.sqrt(lam), pi)


def erdos_renyi_distribution(p):
    """One-dimensional point mass at ``sqrt(p)``."""
    p = float(p)
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")
    return LatentDistribution(np.array([[np.sqrt(p)]]), np.array([1.0]))


def moments(dist):
    """Exact moments of a point-mass mixture.

    ``delta`` is the second-moment matrix ``sum_k w_k x_k x_k^T``; the third
    and fourth moments ``m3``, ``m4`` are filled in for one-dimensional
    distributions only. A ``DegenerateMomentsWarning`` is issued (and
    ``degenerate`` set) when eigenvalues of ``delta`` are within ``1e-8`` of
    each other or of zero.
    """
    X, w = dist.atoms, dist.weights
    delta = (X * w[:, None]).T @ X
    eigs = dense_symmetric_eigen(delta, which="LA").values
    gaps = np.diff(eigs)
    degenerate = bool(np.any(np.abs(gaps) < 1e-8) or eigs[-1] < 1e-8)
    if degenerate:
        warnings.warn("second-moment eigenvalues are not distinct and positive",
                      DegenerateMomentsWarning, stacklevel=2)
    m3 = m4 = None
    if dist.dim == 1:
        x = X[:, 0]
        m3 = float(w @ x**3)
        m4 = float(w @ x**4)
    return MomentSet(delta=delta, delta_eigs=eigs, m3=m3, m4=m4, degenerate=degenerate)


def _row_offsets(n):
    """Flat index of the first upper-triangle entry of each row (length n+1)."""
    i = np.arange(n + 1, dtype=np.int64)
    return i * n - i * (i + 1) // 2


def _row_blocks(n):
    step = max(1, _BLOCK_ENTRIES // max(n, 1))
    for i0 in range(0, n, step):
        yield i0, min(n, i0 + step)


@dataclass(frozen=True, eq=False)
class GraphSample:
    """One sampled graph with its latent positions.

    Attributes
    ----------
    latent : ndarray of shape (n, d)
        Row ``i`` is the atom that generated vertex ``i``.
    labels : ndarray of shape (n,)
        Atom index per vertex.
    packed : ndarray of uint8
        ``numpy.packbits`` of the strict upper triangle in row-major order.
    seed : int
    """

    latent: np.ndarray
    labels: np.ndarray
    packed: np.ndarray
    seed: int
    _dense: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        latent = np.asarray(self.latent, dtype=float)
        if latent.ndim == 1:
            latent = latent[:, None]
        n = latent.shape[0]
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValueError("labels must have one entry per vertex")
        packed = np.asarray(self.packed, dtype=np.uint8)
        if packed.shape != ((n * (n - 1) // 2 + 7) // 8,):
            raise ValueError("packed adjacency has the wrong length")
        object.__setattr__(self, "latent", _frozen(latent))
        object.__setattr__(self, "labels", _frozen(labels, np.int64))
        object.__setattr__(self, "packed", _frozen(packed, np.uint8))
        object.__setattr__(self, "seed", check_seed(self.seed))

    @property
    def n(self):
        return self.latent.shape[0]

    @property
    def d(self):
        return self.latent.shape[1]

    def upper_bits(self, i0, i1):
        """Upper-triangle entries of rows ``i0:i1`` as a flat bool array."""
        off = _row_offsets(self.n)
        start, stop = int(off[i0]), int(off[i1])
        if stop == start:
            return np.zeros(0, dtype=bool)
        raw = np.unpackbits(self.packed[start // 8:(stop + 7) // 8])
        return raw[start % 8:start % 8 + stop - start].astype(bool)

    def adjacency(self, dtype=np.float64):
        """Dense symmetric adjacency matrix (cached per dtype)."""
        key = np.dtype(dtype).str
        if key in self._dense:
            return self._dense[key]
        n = self.n
        A = np.zeros((n, n), dtype=dtype)
        cols = np.arange(n)
        for i0, i1 in _row_blocks(n):
            mask = cols[None, :] > np.arange(i0, i1)[:, None]
            block = np.zeros((i1 - i0, n), dtype=bool)
            block[mask] = self.upper_bits(i0, i1)
            A[i0:i1] = block
            A[i0:i1, :i0] = A[:i0, i0:i1].T
            diag = A[i0:i1, i0:i1]
            diag += np.triu(diag, 1).T
        A.setflags(write=False)
        self._dense[key] = A
        return A

    def release(self):
        """Drop cached dense matrices."""
        self._dense.clear()

    def edges(self):
        """Edge list as an (m, 2) array of ``i < j`` pairs in row-major order."""
        out = []
        cols = np.arange(self.n)
        for i0, i1 in _row_blocks(self.n):
            mask = cols[None, :] > np.arange(i0, i1)[:, None]
            r, c = np.nonzero(mask)
            hit = self.upper_bits(i0, i1)
            out.append(np.stack([r[hit] + i0, c[hit]], axis=1))
        return np.concatenate(out) if out else np.zeros((0, 2), dtype=np.int64)

    def edge_count(self):
        return int(np.unpackbits(self.packed).sum())

    def probability_matrix(self):
        """``P = X X^T`` as a dense (n, n) array (diagonal included)."""
        return self.latent @ self.latent.T

    def __eq__(self, other):
        if not isinstance(other, GraphSample):
            return NotImplemented
        return (self.seed == other.seed
                and np.array_equal(self.latent, other.latent)
                and np.array_equal(self.labels, other.labels)
                and np.array_equal(self.packed, other.packed))

    __hash__ = None


def sample_graph(dist, n, seed, *, labels=None):
    """Sample ``(X, A) ~ RDPG(dist)`` on ``n`` vertices.

    Labels are drawn i.i.d. from the mixture weights (unless pinned via
    ``labels``); then for ``i < j`` independently
    ``A[i, j] ~ Bernoulli(<X_i, X_j>)``. Uniform draws are consumed in
    row-major upper-triangle order, so the result depends only on
    ``(dist, n, seed, labels)``.
    """
    n = int(n)
    if n < 2:
        raise DomainError(f"need n >= 2, got {n}")
    seed = check_seed(seed)
    rng = derive_rng(seed)
    if labels is None:
        labels = dist.sample_labels(n, rng)
    else:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,) or labels.min() < 0 or labels.max() >= dist.n_atoms:
            raise DomainError("pinned labels must be n atom indices")
    G = dist.gram()
    off = _row_offsets(n)
    bits = np.empty(int(off[-1]), dtype=bool)
    cols = np.arange(n)
    for i0, i1 in _row_blocks(n):
        mask = cols[None, :] > np.arange(i0, i1)[:, None]
        probs = G[labels[i0:i1]][:, labels][mask]
        bits[off[i0]:off[i1]] = rng.random(probs.shape[0]) < probs
    return GraphSample(dist.atoms[labels], labels, np.packbits(bits), seed)


def write_graph(sample, stem):
    """Write ``<stem>.header``, ``<stem>.latent.csv`` and ``<stem>.edges``.

    The header holds ``n d seed``; the latent CSV has columns
    ``label,x1..xd``; the edge list has one ``i j`` line per edge (0-based,
    ``i < j``). All files use LF line endings.
    """
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    paths = (stem.with_name(stem.name + ".header"),
             stem.with_name(stem.name + ".latent.csv"),
             stem.with_name(stem.name + ".edges"))
    with open(paths[0], "w", newline="\n") as fh:
        fh.write(f"{sample.n} {sample.d} {sample.seed}\n")
    with open(paths[1], "w", newline="\n") as fh:
        fh.write("label," + ",".join(f"x{k + 1}" for k in range(sample.d)) + "\n")
        for lab, row in zip(sample.labels, sample.latent):
            fh.write(f"{lab}," + ",".join(repr(float(v)) for v in row) + "\n")
    with open(paths[2], "w", newline="\n") as fh:
        for i, j in sample.edges():
            fh.write(f"{i} {j}\n")
    return paths


def read_graph(stem):
    """Inverse of ``write_graph``."""
    stem = Path(stem)
    header = stem.with_name(stem.name + ".header").read_text().split()
    n, d, seed = int(header[0]), int(header[1]), int(header[2])
    rows = stem.with_name(stem.name + ".latent.csv").read_text().splitlines()[1:]
    table = np.array([[float(v) for v in r.split(",")] for r in rows]).reshape(n, d + 1)
    labels = table[:, 0].astype(np.int64)
    latent = table[:, 1:]
    text = stem.with_name(stem.name + ".edges").read_text().split()
    edges = np.array(text, dtype=np.int64).reshape(-1, 2)
    bits = np.zeros(n * (n - 1) // 2, dtype=bool)
    if len(edges):
        i, j = edges[:, 0], edges[:, 1]
        if np.any(i >= j) or np.any(j >= n) or np.any(i < 0):
            raise ValueError("edge list must hold 0-based pairs with i < j < n")
        bits[_row_offsets(n)[i] + (j - i - 1)] = True
    return GraphSample(latent, labels, np.packbits(bits), seed)
