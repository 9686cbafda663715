"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``[PASS]``/``[FAIL]`` line, and the lines are
repeated in the terminal summary. The whole module takes roughly 15 to 20
minutes on one core; the large runs use a single worker to bound memory.
"""
import time

import numpy as np
import pytest

from spectral_clt import dense_symmetric_eigen, procrustes, top_eigenpairs
from spectral_clt.cluster import gmm_em
from spectral_clt.clt import block_covariances
from spectral_clt.experiments import ExperimentConfig, independence_statistic, run
from spectral_clt.linalg import as_operator

from conftest import SIGMA1_TABLE, SIGMA2_TABLE, random_orthogonal

pytestmark = pytest.mark.acceptance

# Mahalanobis KS threshold at n = 8000, frozen after one calibration run
# (seeds 0..9 gave 0.013 to 0.036 per block).
KS_THRESHOLD_8000 = 0.05


def _run(experiment, out, **kw):
    start = time.perf_counter()
    res = run(ExperimentConfig(experiment, out_dir=str(out), **kw))
    return res, time.perf_counter() - start


@pytest.fixture(scope="module")
def table_cov(tmp_path_factory):
    return _run("table-cov", tmp_path_factory.mktemp("table"),
                n_grid=(2000, 8000, 16000), replicates=10)


@pytest.fixture(scope="module")
def growth(tmp_path_factory):
    return _run("bounds-audit", tmp_path_factory.mktemp("growth"),
                n_grid=(1000, 2000, 4000, 8000, 16000), replicates=30, compute_norm="never")


def _within(observed, target, rel):
    return bool(np.all(np.abs(observed - target) <= rel * np.abs(target)))


class TestCriteria:
    def test_c1_table_reproduction(self, table_cov, verdict):
        res, elapsed = table_cov
        mean1, mean2 = res.data["mean"][(16000, 0)], res.data["mean"][(16000, 1)]
        single = res.data["single"][(2000, 0)][0][1, 1]
        ok = (_within(mean1, SIGMA1_TABLE, 0.10) and _within(mean2, SIGMA2_TABLE, 0.10)
              and 12.0 <= single <= 21.0)
        verdict("C1 table reproduction", ok,
                f"mean S1={np.round(mean1, 3).tolist()} mean S2={np.round(mean2, 3).tolist()} "
                f"n=2000 single S1(2,2)={single:.2f} ({elapsed:.0f} s incl. n=8000)")

    def test_c2_erdos_renyi(self, tmp_path, verdict):
        res, _ = _run("er-clt", tmp_path, p=0.25, n_grid=(4000,), replicates=20)
        pooled = res.data["pooled"][4000]
        ok = abs(pooled["variance"] / 0.75 - 1) < 0.05 and pooled["ks"] < 0.02
        verdict("C2 Erdos-Renyi corollary", ok,
                f"variance={pooled['variance']:.4f} (0.75) KS={pooled['ks']:.4f}")

    def test_c3_multivariate_normality(self, table_cov, verdict):
        res, _ = table_cov
        ks = res.data["ks"][(8000, 0)]
        verdict("C3 Mahalanobis KS at n=8000", max(ks) < KS_THRESHOLD_8000,
                f"per block KS={[round(v, 4) for v in ks]}")

    def test_c4_bound_audit(self, tmp_path, verdict):
        res, _ = _run("bounds-audit", tmp_path, n_grid=(2000,), replicates=100, eta=0.05,
                      compute_norm="always")
        s = res.data["summary"][2000]
        rates = {k: s[f"{k}_violation_rate"] for k in ("xhat", "vhat", "a_minus_p")}
        verdict("C4 bound audit", all(v <= 0.05 for v in rates.values()), f"violation rates {rates}")

    def test_c5_growth(self, growth, verdict):
        summary = growth[0].data["summary"]
        ratio = summary[8000]["median_lambda1_error"] / summary[1000]["median_lambda1_error"]
        vtv = [summary[n]["median_vtv_error"] for n in (1000, 4000, 16000)]
        ok = ratio < 4 and vtv[0] > vtv[1] > vtv[2]
        verdict("C5 growth properties", ok,
                f"lambda1 error ratio={ratio:.3f} median VtV error={[f'{v:.4g}' for v in vtv]}")

    def test_c6_independence(self, sbm, verdict):
        stat = independence_statistic(sbm, 4000, [0, 0, 1], 200, seed=6)
        verdict("C6 pinned-vertex independence", stat < 0.2, f"max |corr|={stat:.4f}")

    def test_c7_cluster_bench(self, tmp_path, verdict):
        res, _ = _run("cluster-bench", tmp_path, n_grid=(1000, 2500, 4000), replicates=100)
        s = res.data["summary"]
        ok = all(s[n]["gmm"] <= s[n]["kmeans"] for n in s)
        ok = ok and s[4000]["gmm"] < s[1000]["gmm"]
        ok = ok and all(s[n]["bayes"] - s[n]["bayes_se"] <= min(s[n]["gmm"], s[n]["kmeans"]) for n in s)
        detail = "; ".join(f"n={n} kmeans={s[n]['kmeans']:.4f} gmm={s[n]['gmm']:.4f} "
                           f"bayes={s[n]['bayes']:.4f}" for n in sorted(s))
        verdict("C7 clustering benchmark", ok, detail)

    def test_c8_oracle_suites(self, verdict):
        start = time.perf_counter()
        worst = 0.0
        for s in range(100):
            rng = np.random.default_rng(10_000 + s)
            M = rng.standard_normal((200, 200))
            M = (M + M.T) / 2
            eig = top_eigenpairs(as_operator(M), 200, 5, seed=s, max_iter=100)
            worst = max(worst, float(np.max(np.abs(eig.values - dense_symmetric_eigen(M).values[:5]))))
        recovered = 0
        for s in range(100):
            rng = np.random.default_rng(20_000 + s)
            X = rng.standard_normal((40, 3))
            W = random_orthogonal(3, rng)
            recovered += np.allclose(procrustes(X @ W, X), W.T, atol=1e-10)
        monotone = 0
        for s in range(50):
            rng = np.random.default_rng(30_000 + s)
            pts = np.concatenate([rng.normal(0, 1, (150, 2)), rng.normal(1.5, 0.7, (150, 2))])
            h = np.array(gmm_em(pts, 2, s).history)
            monotone += bool(np.all(np.diff(h) >= -1e-9 * np.abs(h[:-1])))
        elapsed = time.perf_counter() - start
        ok = worst <= 1e-8 and recovered == 100 and monotone == 50 and elapsed < 120
        verdict("C8 oracle suites", ok,
                f"eigenvalue error={worst:.2e} procrustes {recovered}/100 "
                f"EM monotone {monotone}/50 in {elapsed:.1f} s")

    def test_c9_determinism(self, tmp_path, verdict):
        small = {
            "table-cov": dict(n_grid=(300, 500), replicates=3),
            "ellipse-plot": dict(n_grid=(300, 400)),
            "cluster-bench": dict(n_grid=(300, 500), replicates=3),
            "er-clt": dict(n_grid=(300,), replicates=4),
            "bounds-audit": dict(n_grid=(300, 500), replicates=3),
            "sample": dict(n_grid=(200,), replicates=3),
        }
        mismatched = []
        for name, kw in small.items():
            outputs = []
            for workers in (1, 4, 16):
                out = tmp_path / f"{name}-{workers}"
                run(ExperimentConfig(name, out_dir=str(out), workers=workers, **kw))
                outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
            if not (outputs[0] == outputs[1] == outputs[2]):
                mismatched.append(name)
        verdict("C9 determinism across 1/4/16 workers", not mismatched,
                f"mismatched={mismatched or 'none'} over {len(small)} experiments")


class TestSupplementary:
    def test_single_graph_sigma11_n16000(self, table_cov, verdict):
        value = table_cov[0].data["single"][(16000, 0)][0][0, 0]
        verdict("single-graph S1(1,1) at n=16000", abs(value - 0.59) <= 0.1, f"{value:.4f}")

    def test_sigma22_shrinks_towards_limit(self, table_cov, verdict):
        single = table_cov[0].data["single"]
        larger = sum(single[(2000, r)][0][1, 1] > single[(16000, r)][0][1, 1] for r in range(10))
        verdict("S1(2,2) at n=2000 exceeds n=16000", larger > 5, f"{larger}/10 replicates")

    def test_trace_convergence(self, growth, sbm, verdict):
        traces = growth[0].data["traces"]
        target = float(np.trace(block_covariances(sbm)[0]))
        closer = sum(abs(traces[(16000, r)][0] - target) < abs(traces[(2000, r)][0] - target)
                     for r in range(30))
        verdict("trace(S1) closer to the limit at n=16000 than n=2000", closer >= 27, f"{closer}/30")

    def test_ks_decreases(self, growth, verdict):
        ks = growth[0].data["ks"]
        ordered = sum(ks[(1000, r)] > ks[(4000, r)] > ks[(16000, r)] for r in range(30))
        verdict("Mahalanobis KS decreasing over 1000, 4000, 16000", ordered >= 27, f"{ordered}/30")

    def test_vtv_decreases_1000_8000(self, growth, verdict):
        s = growth[0].data["summary"]
        verdict("median VtV error n=1000 vs 8000", s[8000]["median_vtv_error"] < s[1000]["median_vtv_error"],
                f"{s[1000]['median_vtv_error']:.4g} -> {s[8000]['median_vtv_error']:.4g}")
