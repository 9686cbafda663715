"""Experiment orchestration: configuration, seeded parallel replication and
CSV/SVG emission.

Every experiment splits into ``(n, replicate)`` cells. Cell ``(n, r)`` draws
its graph from ``derive_seed(seed, 0, n, r)``, so results do not depend on
which worker runs a cell or in what order; aggregation walks the cells in
index order, which fixes the floating-point summation order as well.
"""
import configparser
import csv
import hashlib
import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ._version import __version__
from .clt import (
    block_covariances,
    inside_ellipse,
    ks_normal_1d,
    level_curve,
    pairwise_independence,
    residual_report,
    sample_covariance,
)
from .cluster import GaussianMixture, bayes_error, gmm_em, kmeans, misclassification
from .embed import ase, concentration_report, upca
from .exceptions import ConfigError, SpectralCLTError
from .model import (
    LatentDistribution,
    erdos_renyi_distribution,
    moments,
    sample_graph,
    sbm_to_latent,
    write_graph,
)
from .rng import derive_seed
from .svg import PALETTE, Figure, Panel, nice_limits

EXPERIMENTS = ("table-cov", "ellipse-plot", "cluster-bench", "er-clt", "bounds-audit", "sample")

DEFAULT_B = ((0.42, 0.42), (0.42, 0.5))
DEFAULT_PI = (0.6, 0.4)

DEFAULT_GRID = {
    "table-cov": (2000, 4000, 8000, 16000),
    "ellipse-plot": (1000, 2000, 4000, 8000),
    "cluster-bench": tuple(range(1000, 4001, 250)),
    "er-clt": (4000,),
    "bounds-audit": (2000,),
    "sample": (100,),
}
DEFAULT_REPLICATES = {
    "table-cov": 10,
    "ellipse-plot": 1,
    "cluster-bench": 100,
    "er-clt": 20,
    "bounds-audit": 100,
    "sample": 1,
}

# seed namespaces passed as the first derivation key
_GRAPH, _BAYES, _CLUSTER, _PINNED = 0, 1, 2, 3

# knobs that change neither results nor file contents
_NOT_HASHED = ("out_dir", "workers", "memory_gb")


@dataclass
class ExperimentConfig:
    """Configuration of one experiment run.

    The model is given by exactly one of ``B`` with ``pi`` (SBM), ``p``
    (Erdos-Renyi) or ``atoms`` with ``weights``; with none of them the
    two-block SBM ``B = [[.42, .42], [.42, .5]]``, ``pi = (.6, .4)`` is used
    (``p = 0.25`` for ``er-clt``).
    """

    experiment: str
    B: tuple = None
    pi: tuple = None
    p: float = None
    atoms: tuple = None
    weights: tuple = None
    n_grid: tuple = None
    replicates: int = None
    d: int = None
    eta: float = 0.05
    seed: int = 0
    out_dir: str = "out"
    workers: int = 1
    which: str = "LA"
    lanczos_max_iter: int = 50
    level: float = 0.95
    n_mc: int = 100_000
    noiseless: bool = False
    compute_norm: str = "auto"
    memory_gb: float = 3.0
    _dist: object = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        given = [name for name in ("B", "p", "atoms") if getattr(self, name) is not None]
        if len(given) > 1:
            raise ConfigError(f"give only one model, got {given}")
        if self.B is None and self.pi is not None:
            raise ConfigError("pi requires B")
        if self.atoms is None and self.weights is not None:
            raise ConfigError("weights require atoms")
        if not given:
            if self.experiment == "er-clt":
                self.p = 0.25
            else:
                self.B, self.pi = DEFAULT_B, DEFAULT_PI
        if self.B is not None:
            self.B = _nested_tuple(self.B)
            self.pi = tuple(float(v) for v in (self.pi if self.pi is not None else
                                               [1.0 / len(self.B)] * len(self.B)))
        if self.atoms is not None:
            self.atoms = _nested_tuple(self.atoms)
            self.weights = tuple(float(v) for v in (self.weights if self.weights is not None else
                                                    [1.0 / len(self.atoms)] * len(self.atoms)))
        if self.p is not None:
            self.p = float(self.p)
        if self.n_grid is None:
            self.n_grid = DEFAULT_GRID[self.experiment]
        self.n_grid = tuple(_as_int(v, "n_grid") for v in np.atleast_1d(self.n_grid))
        if not self.n_grid or min(self.n_grid) < 100:
            raise ConfigError("n_grid entries must be >= 100")
        if len(set(self.n_grid)) != len(self.n_grid):
            raise ConfigError("n_grid entries must be distinct")
        if self.replicates is None:
            self.replicates = DEFAULT_REPLICATES[self.experiment]
        self.replicates = _as_int(self.replicates, "replicates")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        self.eta = float(self.eta)
        if not 0.0 < self.eta < 0.5:
            raise ConfigError(f"eta must lie in (0, 1/2), got {self.eta}")
        self.seed = _as_int(self.seed, "seed")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 unsigned bits")
        self.workers = _as_int(self.workers, "workers")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.which not in ("LM", "LA"):
            raise ConfigError(f"which must be LM or LA, got {self.which!r}")
        self.lanczos_max_iter = _as_int(self.lanczos_max_iter, "lanczos_max_iter")
        self.level = float(self.level)
        if not 0.0 < self.level < 1.0:
            raise ConfigError("level must lie in (0, 1)")
        self.n_mc = _as_int(self.n_mc, "n_mc")
        if self.n_mc < 100_000:
            raise ConfigError("n_mc must be at least 1e5")
        if self.compute_norm not in ("auto", "always", "never"):
            raise ConfigError("compute_norm must be auto, always or never")
        self.noiseless = bool(self.noiseless)
        self.memory_gb = float(self.memory_gb)
        self.out_dir = str(self.out_dir)
        try:
            self._dist = self._build_distribution()
        except SpectralCLTError as exc:
            raise ConfigError(f"invalid model: {exc}") from exc
        if self.d is None:
            self.d = self._dist.dim
        self.d = _as_int(self.d, "d")
        if self.d != self._dist.dim:
            raise ConfigError(f"d={self.d} must equal the latent dimension {self._dist.dim}")

    def _build_distribution(self):
        if self.p is not None:
            return erdos_renyi_distribution(self.p)
        if self.atoms is not None:
            return LatentDistribution(np.array(self.atoms), np.array(self.weights))
        return sbm_to_latent(np.array(self.B), np.array(self.pi))

    @property
    def distribution(self):
        return self._dist

    def hash(self):
        """Short digest of every setting that can influence the output."""
        payload = {k: v for k, v in asdict(self).items()
                   if k not in _NOT_HASHED and not k.startswith("_")}
        text = json.dumps(payload, sort_keys=True, default=repr)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def cell_seed(self, n, r):
        return derive_seed(self.seed, _GRAPH, n, r)


def _nested_tuple(rows):
    return tuple(tuple(float(v) for v in np.atleast_1d(row)) for row in rows)


def _as_int(value, name):
    try:
        if isinstance(value, str):
            value = value.strip()
        as_float = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got {value!r}") from None
    if as_float != int(as_float):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    return int(as_float)


def _parse_matrix(text):
    return tuple(tuple(float(v) for v in row.split(",")) for row in text.split(";") if row.strip())


def _parse_vector(text):
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def _parse_bool(text):
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


_PARSERS = {
    "experiment": str.strip,
    "B": _parse_matrix,
    "pi": _parse_vector,
    "p": float,
    "atoms": _parse_matrix,
    "weights": _parse_vector,
    "n_grid": lambda s: tuple(_as_int(v, "n_grid") for v in s.replace(";", ",").split(",") if v.strip()),
    "replicates": lambda s: _as_int(s, "replicates"),
    "d": lambda s: _as_int(s, "d"),
    "eta": float,
    "seed": lambda s: _as_int(s, "seed"),
    "out_dir": str.strip,
    "workers": lambda s: _as_int(s, "workers"),
    "which": lambda s: s.strip().upper(),
    "lanczos_max_iter": lambda s: _as_int(s, "lanczos_max_iter"),
    "level": float,
    "n_mc": lambda s: _as_int(s, "n_mc"),
    "noiseless": _parse_bool,
    "compute_norm": str.strip,
    "memory_gb": float,
}


def parse_settings(pairs):
    """Convert ``key -> text`` pairs into typed config keyword arguments."""
    out = {}
    for key, text in pairs.items():
        name = "B" if key.lower() == "b" else key.lower().replace("-", "_")
        if name not in _PARSERS:
            raise ConfigError(f"unknown setting {key!r}")
        try:
            out[name] = _PARSERS[name](text)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from None
    return out


def read_config_file(path):
    """Read a flat ``key = value`` file; ``[section]`` headers only group keys.

    A key appearing in two sections is an error.
    """
    parser = configparser.ConfigParser(interpolation=None, default_section="__unused__")
    parser.optionxform = str
    try:
        with open(path) as fh:
            text = fh.read()
        if not text.lstrip().startswith("["):
            text = "[config]\n" + text
        parser.read_string(text, source=str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    pairs = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            if key in pairs:
                raise ConfigError(f"setting {key!r} appears more than once")
            pairs[key] = value
    return parse_settings(pairs)


def load_config(experiment=None, path=None, **overrides):
    """Build a config from an optional file, then apply non-None overrides."""
    settings = read_config_file(path) if path is not None else {}
    if experiment is not None:
        if settings.get("experiment", experiment) != experiment:
            raise ConfigError(f"config file is for {settings['experiment']!r}, not {experiment!r}")
        settings["experiment"] = experiment
    settings.update({k: v for k, v in overrides.items() if v is not None})
    if "experiment" not in settings:
        raise ConfigError("no experiment given")
    valid = {f.name for f in fields(ExperimentConfig) if f.init}
    unknown = set(settings) - valid
    if unknown:
        raise ConfigError(f"unknown settings {sorted(unknown)}")
    return ExperimentConfig(**settings)


# ---------------------------------------------------------------- execution

class _MemoryGate:
    """Admit cells while their estimated dense-matrix footprint fits."""

    def __init__(self, budget):
        self.budget = budget
        self.used = 0
        self.cv = threading.Condition()

    @contextmanager
    def hold(self, amount):
        amount = min(amount, self.budget)
        with self.cv:
            self.cv.wait_for(lambda: self.used + amount <= self.budget)
            self.used += amount
        try:
            yield
        finally:
            with self.cv:
                self.used -= amount
                self.cv.notify_all()


def run_cells(config, cell_fn, cells):
    """Evaluate ``cell_fn(n, r)`` for each ``(n, r)`` and return results in
    the order of ``cells``."""
    gate = _MemoryGate(config.memory_gb * 2 ** 30)

    def task(cell):
        n = cell[0]
        with gate.hold(10 * n * n):
            return cell_fn(*cell)

    if config.workers == 1:
        return [task(c) for c in cells]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(task, cells))


def _grid_cells(config):
    return [(n, r) for n in config.n_grid for r in range(config.replicates)]


def _embed(config, sample):
    return ase(sample, config.d, which=config.which, max_iter=config.lanczos_max_iter)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, config, header, rows):
    """CSV with a provenance comment line, a header row and LF endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config_hash={config.hash()} seed={config.seed} version={__version__}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(header, rows)`` of a file written by :func:`write_csv`."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


@dataclass
class RunResult:
    """Paths of the files written and the in-memory numbers behind them."""

    files: dict
    data: dict


def _upper_entries(d):
    return [(i, j) for i in range(d) for j in range(i, d)]


# ---------------------------------------------------------------- experiments

def run_table_cov(config):
    """Per-block residual covariances for every n in the grid.

    Rows of kind ``replicate`` hold single-graph values, ``mean`` the
    average over replicates and ``theoretical`` the limiting covariance.
    """
    dist = config.distribution
    entries = _upper_entries(config.d)

    def cell(n, r):
        g = sample_graph(dist, n, config.cell_seed(n, r))
        try:
            rep = residual_report(g, _embed(config, g), dist)
        finally:
            g.release()
        ks = [rep.diagnostics.get(f"mahalanobis_ks_block{k}", math.nan) for k in range(dist.n_atoms)]
        return rep.empirical_cov, ks

    cells = _grid_cells(config)
    results = dict(zip(cells, run_cells(config, cell, cells)))
    theory = block_covariances(dist)
    rows, means = [], {}
    for n in config.n_grid:
        for k in range(dist.n_atoms):
            covs = [results[(n, r)][0][k] for r in range(config.replicates)]
            for r, S in enumerate(covs):
                rows.append([n, k, "replicate", r] + [S[i, j] for i, j in entries]
                            + [results[(n, r)][1][k]])
            mean = np.zeros((config.d, config.d))
            for S in covs:
                mean = mean + S
            mean = mean / len(covs)
            means[(n, k)] = mean
            rows.append([n, k, "mean", None] + [mean[i, j] for i, j in entries] + [None])
            rows.append([n, k, "theoretical", None] + [theory[k][i, j] for i, j in entries] + [None])
    header = ["n", "block", "kind", "replicate"] + [f"c{i + 1}{j + 1}" for i, j in entries] + ["mahalanobis_ks"]
    path = write_csv(Path(config.out_dir) / "table_cov.csv", config, header, rows)
    single = {key: val[0] for key, val in results.items()}
    ks = {key: val[1] for key, val in results.items()}
    return RunResult({"csv": path}, {"mean": means, "theoretical": theory, "single": single, "ks": ks})


def run_ellipse_plot(config):
    """Aligned embeddings with the per-block level ellipses, one panel per n.

    With ``noiseless`` the embedding is computed from ``P`` instead of ``A``.
    """
    dist = config.distribution
    if config.d != 2:
        raise ConfigError("ellipse-plot needs d = 2")
    theory = block_covariances(dist)

    def cell(n, r):
        g = sample_graph(dist, n, config.cell_seed(n, r))
        try:
            source = g.probability_matrix() if config.noiseless else g
            emb = ase(source, config.d, which=config.which, max_iter=config.lanczos_max_iter,
                      seed=g.seed)
            rep = residual_report(g, emb, dist)
        finally:
            g.release()
        aligned = emb.xhat @ rep.alignment
        coverage = [float(np.mean(inside_ellipse(aligned[g.labels == k], theory[k], config.level,
                                                 dist.atoms[k], n)))
                    for k in range(dist.n_atoms)]
        return aligned, g.labels, coverage

    cells = [(n, 0) for n in config.n_grid]
    results = run_cells(config, cell, cells)
    scatter_rows, coverage_rows = [], []
    for (n, _), (aligned, labels, coverage) in zip(cells, results):
        for v in range(n):
            scatter_rows.append([n, v, labels[v], aligned[v, 0], aligned[v, 1]])
        for k, c in enumerate(coverage):
            coverage_rows.append([n, k, config.level, c])
    out = Path(config.out_dir)
    scatter = write_csv(out / "ellipse_scatter.csv", config, ["n", "vertex", "block", "x1", "x2"],
                        scatter_rows)
    cover = write_csv(out / "ellipse_coverage.csv", config, ["n", "block", "level", "coverage"],
                      coverage_rows)

    cols = min(2, len(cells))
    nrows = math.ceil(len(cells) / cols)
    fig = Figure(80 + cols * 340, 40 + nrows * 340)
    for idx, ((n, _), (aligned, labels, _)) in enumerate(zip(cells, results)):
        curves = [level_curve(theory[k], config.level, dist.atoms[k], n) for k in range(dist.n_atoms)]
        allpts = np.vstack([aligned] + curves)
        xlim = nice_limits(allpts[:, 0].min(), allpts[:, 0].max())
        ylim = nice_limits(allpts[:, 1].min(), allpts[:, 1].max())
        px, py = 70 + (idx % cols) * 340, 30 + (idx // cols) * 340
        panel = fig.add_panel(Panel(px, py, 270, 270, xlim, ylim, title=f"n = {n}"))
        for k in range(dist.n_atoms):
            color = PALETTE[k % len(PALETTE)]
            panel.scatter(aligned[labels == k], color)
        for k in range(dist.n_atoms):
            panel.line(curves[k], "black", dash="5,3", closed=True)
    svg = out / "ellipse_plot.svg"
    fig.save(svg, tick_format="{:.3g}")
    coverage = {(n, k): c for (n, _), res in zip(cells, results) for k, c in enumerate(res[2])}
    return RunResult({"scatter": scatter, "coverage": cover, "svg": svg},
                     {"coverage": coverage, "points": {n: res[0] for (n, _), res in zip(cells, results)}})


def run_cluster_bench(config):
    """K-means and Gaussian-mixture misclassification against the Bayes rate.

    The Bayes baseline uses the mixture with weights ``pi``, means at the
    atoms and covariances ``Sigma_k / n``.
    """
    dist = config.distribution
    K = dist.n_atoms

    def cell(n, r):
        g = sample_graph(dist, n, config.cell_seed(n, r))
        try:
            xhat = _embed(config, g).xhat
        finally:
            g.release()
        s = derive_seed(config.seed, _CLUSTER, n, r)
        km = kmeans(xhat, K, s)
        gm = gmm_em(xhat, K, s)
        return misclassification(km.labels, g.labels), misclassification(gm.labels, g.labels)

    cells = _grid_cells(config)
    results = dict(zip(cells, run_cells(config, cell, cells)))
    theory = block_covariances(dist)
    rows, summary = [], {}
    for n in config.n_grid:
        errs = np.array([results[(n, r)] for r in range(config.replicates)])
        for r in range(config.replicates):
            rows.append([n, r, "kmeans", errs[r, 0], None])
            rows.append([n, r, "gmm", errs[r, 1], None])
        mixture = GaussianMixture(dist.weights, dist.atoms, theory / n)
        rate, se = bayes_error(mixture, config.n_mc, derive_seed(config.seed, _BAYES, n))
        rows.append([n, None, "bayes", rate, se])
        summary[n] = {"kmeans": _ordered_mean(errs[:, 0]), "gmm": _ordered_mean(errs[:, 1]),
                      "bayes": rate, "bayes_se": se}
    out = Path(config.out_dir)
    path = write_csv(out / "cluster_bench.csv", config, ["n", "replicate", "method", "error", "stderr"], rows)
    svg = out / "cluster_bench.svg"
    _cluster_svg(config, summary, svg)
    return RunResult({"csv": path, "svg": svg}, {"summary": summary})


def _ordered_mean(values):
    total = 0.0
    for v in values:
        total += float(v)
    return total / len(values)


def _cluster_svg(config, summary, path):
    grid = list(config.n_grid)
    floor = 1e-5
    series = {m: [math.log10(max(summary[n][m], floor)) for n in grid] for m in ("kmeans", "gmm", "bayes")}
    n0 = grid[0]
    C = summary[n0]["kmeans"] * n0 / math.log(n0)
    series["log-bound"] = [math.log10(max(C * math.log(n) / n, floor)) for n in grid]
    ys = [v for s in series.values() for v in s]
    xlim = nice_limits(min(grid), max(grid) if len(grid) > 1 else min(grid) + 1)
    fig = Figure(620, 420)
    panel = fig.add_panel(Panel(80, 30, 380, 320, xlim, nice_limits(min(ys), max(ys)),
                                xlabel="n", ylabel="log10 misclassification"))
    styles = {"kmeans": (PALETTE[0], None), "gmm": (PALETTE[1], None),
              "bayes": (PALETTE[2], None), "log-bound": ("black", "5,3")}
    for name, (color, dash) in styles.items():
        pts = list(zip(grid, series[name]))
        panel.line(pts, color, dash=dash)
        panel.markers(pts, color, size=2.0)
    fig.legend(475, 50, [(name, color, dash) for name, (color, dash) in styles.items()])
    fig.save(path)


def run_er_clt(config):
    """Pooled scaled residuals of the one-dimensional Erdos-Renyi embedding."""
    dist = config.distribution
    if dist.dim != 1 or dist.n_atoms != 1:
        raise ConfigError("er-clt needs an Erdos-Renyi model (set p)")
    variance = float(block_covariances(dist)[0, 0, 0])

    def cell(n, r):
        g = sample_graph(dist, n, config.cell_seed(n, r))
        try:
            rep = residual_report(g, _embed(config, g), dist)
        finally:
            g.release()
        return rep.residuals[:, 0]

    cells = _grid_cells(config)
    results = dict(zip(cells, run_cells(config, cell, cells)))
    rows, pooled_stats = [], {}
    for n in config.n_grid:
        parts = [results[(n, r)] for r in range(config.replicates)]
        for r, res in enumerate(parts):
            rows.append([n, r, float(sample_covariance(res[:, None])[0, 0]),
                         ks_normal_1d(res, variance), variance])
        pooled = np.concatenate(parts)
        var = float(sample_covariance(pooled[:, None])[0, 0])
        ks = ks_normal_1d(pooled, variance)
        pooled_stats[n] = {"variance": var, "ks": ks, "theoretical": variance}
        rows.append([n, "pooled", var, ks, variance])
    path = write_csv(Path(config.out_dir) / "er_clt.csv", config,
                     ["n", "replicate", "variance", "ks", "theoretical_variance"], rows)
    return RunResult({"csv": path}, {"pooled": pooled_stats})


_AUDIT_FIELDS = ("xhat_error", "xhat_bound", "vhat_error", "vhat_bound", "a_minus_p",
                 "a_minus_p_bound", "s_error", "vtv_error", "lambda1_error")


def run_bounds_audit(config):
    """Concentration quantities per replicate, bound violation frequencies,
    and medians of the growth diagnostics.

    Each replicate row also carries the trace of every per-block residual
    covariance and the Mahalanobis KS distance of the same graph.

    ``compute_norm = auto`` evaluates ``||A - P||`` only for ``n <= 4000``
    (power iteration on the gapless noise bulk is slow); skipped values are
    NaN and are excluded from the violation frequency.
    """
    dist = config.distribution
    delta_min = moments(dist).delta_min

    def cell(n, r):
        g = sample_graph(dist, n, config.cell_seed(n, r))
        norm = config.compute_norm == "always" or (config.compute_norm == "auto" and n <= 4000)
        try:
            emb = _embed(config, g)
            rep = concentration_report(g, emb, upca(g.latent), config.eta,
                                       delta_min=delta_min, compute_norm=norm)
        finally:
            g.release()
        res = residual_report(g, emb, dist)
        traces = [float(np.trace(S)) for S in res.empirical_cov]
        return rep, traces, res.diagnostics["mahalanobis_ks"]

    cells = _grid_cells(config)
    results = dict(zip(cells, run_cells(config, cell, cells)))
    rows, summary_rows, summary = [], [], {}
    for n in config.n_grid:
        reps = [results[(n, r)][0] for r in range(config.replicates)]
        for r, rep in enumerate(reps):
            _, traces, ks = results[(n, r)]
            rows.append([n, r] + [getattr(rep, f) for f in _AUDIT_FIELDS] + traces + [ks])
        stats = {}
        for name in ("xhat", "vhat", "a_minus_p"):
            observed = [rep.violations()[name] for rep in reps
                        if not (name == "a_minus_p" and math.isnan(rep.a_minus_p))]
            stats[f"{name}_violation_rate"] = (sum(observed) / len(observed)) if observed else math.nan
        for name in ("s_error", "vtv_error", "lambda1_error"):
            stats[f"median_{name}"] = float(np.median([getattr(rep, name) for rep in reps]))
        stats["median_mahalanobis_ks"] = float(np.median([results[(n, r)][2]
                                                          for r in range(config.replicates)]))
        summary[n] = stats
        summary_rows.append([n, len(reps)] + [stats[k] for k in sorted(stats)])
    out = Path(config.out_dir)
    extra = [f"trace_cov_block{k}" for k in range(dist.n_atoms)] + ["mahalanobis_ks"]
    path = write_csv(out / "bounds_audit.csv", config, ["n", "replicate", *_AUDIT_FIELDS, *extra], rows)
    keys = sorted(next(iter(summary.values())))
    spath = write_csv(out / "bounds_summary.csv", config, ["n", "replicates", *keys], summary_rows)
    data = {"summary": summary,
            "reports": {key: val[0] for key, val in results.items()},
            "traces": {key: val[1] for key, val in results.items()},
            "ks": {key: val[2] for key, val in results.items()}}
    return RunResult({"csv": path, "summary": spath}, data)


def run_sample(config):
    """Write one graph per ``(n, replicate)`` cell plus a manifest CSV."""
    dist = config.distribution
    out = Path(config.out_dir)

    def cell(n, r):
        g = sample_graph(dist, n, config.cell_seed(n, r))
        stem = out / f"graph_n{n}_r{r}"
        try:
            write_graph(g, stem)
        except OSError as exc:
            raise OSError(f"cannot write graph files at {stem}: {exc}") from exc
        return g.seed, g.edge_count(), stem.name

    cells = _grid_cells(config)
    rows = [[n, r, *res] for (n, r), res in zip(cells, run_cells(config, cell, cells))]
    path = write_csv(out / "sample_manifest.csv", config, ["n", "replicate", "seed", "edges", "stem"], rows)
    return RunResult({"csv": path}, {"stems": [out / row[-1] for row in rows]})


def pinned_residuals(dist, n, pinned_labels, replicates, seed, *, which="LA", max_iter=50,
                     workers=1):
    """Scaled residuals of the first ``K`` vertices, whose blocks are pinned,
    across independent graphs; shape ``(replicates, K, d)``."""
    pinned = np.asarray(pinned_labels, dtype=np.int64)
    K = len(pinned)

    def one(r):
        rng = np.random.default_rng(derive_seed(seed, _PINNED, n, r))
        labels = dist.sample_labels(n, rng)
        labels[:K] = pinned
        g = sample_graph(dist, n, derive_seed(seed, _GRAPH, n, r), labels=labels)
        try:
            emb = ase(g, dist.dim, which=which, max_iter=max_iter)
        finally:
            g.release()
        return residual_report(g, emb).residuals[:K]

    if workers == 1:
        out = [one(r) for r in range(replicates)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, range(replicates)))
    return np.stack(out)


def independence_statistic(dist, n, pinned_labels, replicates, seed, **kwargs):
    """Largest absolute correlation between residuals of different pinned
    vertices."""
    return pairwise_independence(pinned_residuals(dist, n, pinned_labels, replicates, seed, **kwargs))


RUNNERS = {
    "table-cov": run_table_cov,
    "ellipse-plot": run_ellipse_plot,
    "cluster-bench": run_cluster_bench,
    "er-clt": run_er_clt,
    "bounds-audit": run_bounds_audit,
    "sample": run_sample,
}


def run(config):
    return RUNNERS[config.experiment](config)
