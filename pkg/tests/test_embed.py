import numpy as np
import pytest
from sklearn.base import clone

from spectral_clt import (
    AdjacencySpectralEmbedding,
    ase,
    concentration_bounds,
    concentration_report,
    erdos_renyi_distribution,
    moments,
    residual_report,
    sample_graph,
    upca,
)
from spectral_clt.embed import Embedding, match_signs, read_embedding
from spectral_clt.exceptions import DegenerateSpectrumError, DomainError

from conftest import random_orthogonal


def _same_up_to_signs(A, B, atol):
    return np.allclose(A * match_signs(B, A), B, atol=atol)


class TestAse:
    def test_complete_graph(self):
        n = 50
        emb = ase(np.ones((n, n)) - np.eye(n), 1)
        assert emb.values[0] == pytest.approx(n - 1, abs=1e-10)
        np.testing.assert_allclose(emb.xhat[:, 0], np.sqrt(49 / 50), atol=1e-10)
        assert np.sqrt(49 / 50) == pytest.approx(0.98995, abs=1e-5)

    def test_erdos_renyi_concentration(self):
        dist = erdos_renyi_distribution(0.5)
        for seed in range(5):
            g = sample_graph(dist, 2000, seed)
            emb = ase(g, 1)
            g.release()
            assert np.all(np.abs(np.abs(emb.xhat[:, 0]) - np.sqrt(0.5)) < 0.1)

    def test_d_equal_n(self):
        with pytest.raises(DomainError):
            ase(np.ones((3, 3)) - np.eye(3), 3)

    def test_xhat_assembly(self, sbm):
        g = sample_graph(sbm, 600, 1)
        emb = ase(g, 2, which="LA", max_iter=50)
        np.testing.assert_array_equal(emb.xhat, emb.vectors * np.sqrt(emb.values))
        assert np.all(emb.values > 0) and emb.values[0] > emb.values[1]
        np.testing.assert_allclose(emb.vectors.T @ emb.vectors, np.eye(2), atol=1e-10)

    def test_negative_eigenvalue_outranks_signal_at_small_n(self, sbm):
        # at n = 1000 the noise bulk edge (about -31) beats the second
        # signal eigenvalue (about 18.6 + bias) in magnitude
        g = sample_graph(sbm, 1000, 0)
        with pytest.raises(DegenerateSpectrumError):
            ase(g, 2, which="LM", max_iter=50)
        emb = ase(g, 2, which="LA", max_iter=50)
        assert np.all(emb.values > 0)

    def test_noiseless_reproduces_upca(self, sbm):
        g = sample_graph(sbm, 300, 2)
        emb = ase(g.probability_matrix(), 2)
        assert _same_up_to_signs(emb.xhat, upca(g.latent).xtilde, atol=1e-8)

    def test_csv_round_trip(self, sbm, tmp_path):
        g = sample_graph(sbm, 200, 3)
        emb = ase(g.probability_matrix(), 2)
        emb.to_csv(tmp_path / "e.csv")
        back = read_embedding(tmp_path / "e.csv")
        np.testing.assert_array_equal(back.values, emb.values)
        np.testing.assert_array_equal(back.xhat, emb.xhat)
        lines = (tmp_path / "e.csv").read_text().splitlines()
        assert len(lines) == 201 and len(lines[0].split(",")) == 2


class TestUpca:
    def test_orthogonal_columns(self):
        rng = np.random.default_rng(0)
        Q, _ = np.linalg.qr(rng.standard_normal((20, 2)))
        X = Q * [2.0, 1.0]
        u = upca(X)
        np.testing.assert_allclose(u.s, [4.0, 1.0], atol=1e-12)
        assert _same_up_to_signs(u.xtilde, X, atol=1e-10)

    def test_rotation_invariance(self, sbm):
        rng = np.random.default_rng(1)
        X = sbm.atoms[sbm.sample_labels(200, rng)]
        R = random_orthogonal(2, rng)
        np.testing.assert_allclose(upca(X @ R).xtilde, upca(X).xtilde, atol=1e-10)

    def test_reassembly(self, sbm):
        X = sbm.atoms[sbm.sample_labels(500, np.random.default_rng(2))]
        u = upca(X)
        np.testing.assert_allclose(u.xtilde @ u.xtilde.T, X @ X.T, atol=1e-9)
        np.testing.assert_allclose(u.xtilde @ u.w, X, atol=1e-10)
        np.testing.assert_allclose(u.w.T @ u.w, np.eye(2), atol=1e-10)

    def test_against_dense_eigendecomposition(self, sbm):
        X = sbm.atoms[sbm.sample_labels(150, np.random.default_rng(3))]
        lam, V = np.linalg.eigh(X @ X.T)
        np.testing.assert_allclose(upca(X).s, lam[::-1][:2], rtol=1e-10)
        assert _same_up_to_signs(upca(X).v, V[:, ::-1][:, :2], atol=1e-8)

    def test_rank_deficient(self):
        with pytest.raises(DomainError):
            upca(np.ones((10, 2)))


class TestConcentration:
    def test_noiseless(self, sbm):
        g = sample_graph(sbm, 400, 4)
        P = g.probability_matrix()
        rep = concentration_report(g, ase(P, 2), upca(g.latent), 0.05, adjacency=P,
                                   norm_tol=1e-10)
        assert rep.xhat_error <= 1e-8
        assert rep.vhat_error <= 1e-8
        assert rep.s_error <= 1e-8 * rep.n
        assert rep.vtv_error <= 1e-8
        assert rep.lambda1_error <= 1e-8 * rep.n
        assert rep.a_minus_p <= 1e-10 * rep.n
        assert not any(rep.violations().values())

    def test_bound_formulas(self):
        n, d, eta, delta = 1000, 2, 0.05, 0.02
        L = np.log(n / eta)
        np.testing.assert_allclose(
            concentration_bounds(n, d, eta, delta),
            [4 / delta * np.sqrt(2 * d * L), 4 / delta * np.sqrt(2 * d * L / n), 2 * np.sqrt(n * L)])

    def test_bounds_monotone_in_eta(self):
        loose = concentration_bounds(2000, 2, 0.4, 0.02)
        tight = concentration_bounds(2000, 2, 0.01, 0.02)
        assert all(t > l for t, l in zip(tight, loose))

    def test_eta_domain(self, sbm):
        g = sample_graph(sbm, 200, 5)
        emb = ase(g.probability_matrix(), 2)
        with pytest.raises(DomainError):
            concentration_report(g, emb, upca(g.latent), 0.5)

    def test_adjacency_norm_bound_n4000(self, sbm):
        # the looser power-iteration tolerance underestimates ||A - P|| by a
        # few percent, far inside the factor-of-seven margin to the bound
        dm = moments(sbm).delta_min
        held = 0
        for r in range(100):
            g = sample_graph(sbm, 4000, 10_000 + r)
            rep = concentration_report(g, ase(g, 2, which="LA", max_iter=50), upca(g.latent),
                                       0.05, delta_min=dm, norm_tol=1e-3)
            g.release()
            held += not rep.violations()["a_minus_p"]
        assert held >= 95

    def test_vhat_bound_holds(self, sbm):
        dm = moments(sbm).delta_min
        for r in range(20):
            g = sample_graph(sbm, 2000, 20_000 + r)
            rep = concentration_report(g, ase(g, 2, which="LA", max_iter=50), upca(g.latent),
                                       0.05, delta_min=dm, compute_norm=False)
            g.release()
            assert not rep.violations()["vhat"]
            assert np.isnan(rep.a_minus_p)


class TestSignInvariance:
    def test_residual_covariances_unchanged_by_column_flips(self, sbm):
        g = sample_graph(sbm, 1500, 6)
        emb = ase(g, 2, which="LA", max_iter=50)
        flipped = Embedding(emb.values, emb.vectors * [-1, 1], emb.xhat * [-1, 1])
        a, b = residual_report(g, emb, sbm), residual_report(g, flipped, sbm)
        np.testing.assert_allclose(a.empirical_cov, b.empirical_cov, atol=1e-8)
        assert a.diagnostics["mahalanobis_ks"] == pytest.approx(b.diagnostics["mahalanobis_ks"], abs=1e-8)


class TestEstimator:
    def test_params_and_clone(self):
        est = AdjacencySpectralEmbedding(n_components=1, which="LA")
        assert est.get_params()["n_components"] == 1
        assert clone(est).get_params() == est.get_params()

    def test_fit_transform_matches_function(self, sbm):
        g = sample_graph(sbm, 500, 7)
        A = g.adjacency()
        est = AdjacencySpectralEmbedding(n_components=2, which="LA", max_iter=50, random_state=3)
        Z = est.fit_transform(A)
        np.testing.assert_array_equal(Z, ase(A, 2, which="LA", max_iter=50, seed=3).xhat)
        np.testing.assert_array_equal(est.transform(A), Z)
        assert est.n_features_in_ == 500

    def test_accepts_graph_sample(self, sbm):
        g = sample_graph(sbm, 300, 8)
        est = AdjacencySpectralEmbedding(which="LA", max_iter=50).fit(g)
        assert est.latent_position_.shape == (300, 2)

    def test_rejects_asymmetric(self):
        with pytest.raises(DomainError):
            AdjacencySpectralEmbedding().fit(np.triu(np.ones((5, 5)), 1))

    def test_unfitted(self):
        from sklearn.exceptions import NotFittedError

        with pytest.raises(NotFittedError):
            AdjacencySpectralEmbedding().transform()
