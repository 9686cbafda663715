import math

import numpy as np
import pytest
import scipy.special
import scipy.stats

from spectral_clt.special import chi2_cdf, chi2_quantile_2df, erf, gammainc, normal_cdf


class TestGammainc:
    @pytest.mark.parametrize("a", [0.5, 1.0, 1.5, 2.0, 7.5, 30.0])
    def test_against_scipy(self, a):
        x = np.concatenate([np.linspace(0, 3 * a + 10, 400), [1e-8, 1e-3, 200.0]])
        np.testing.assert_allclose(gammainc(a, x), scipy.special.gammainc(a, x), atol=1e-12)

    def test_scalar_and_zero(self):
        assert gammainc(1.0, 0.0) == 0.0
        assert gammainc(1.0, 2.0) == pytest.approx(1 - math.exp(-2.0), abs=1e-15)

    def test_bad_shape_parameter(self):
        with pytest.raises(ValueError):
            gammainc(0.0, 1.0)


class TestErfAndCdfs:
    def test_erf(self):
        xs = np.linspace(-6, 6, 1201)
        np.testing.assert_allclose(erf(xs), [math.erf(v) for v in xs], atol=1e-13)

    def test_normal_cdf(self):
        z = np.linspace(-5, 5, 201)
        for var in (0.25, 0.75, 13.07):
            np.testing.assert_allclose(normal_cdf(z, var),
                                       scipy.stats.norm.cdf(z, scale=math.sqrt(var)), atol=1e-13)

    def test_normal_cdf_variance_domain(self):
        with pytest.raises(ValueError):
            normal_cdf(0.0, 0.0)

    @pytest.mark.parametrize("df", [1, 2, 3, 5])
    def test_chi2_cdf(self, df):
        q = np.linspace(0, 30, 301)
        np.testing.assert_allclose(chi2_cdf(q, df), scipy.stats.chi2.cdf(q, df), atol=1e-12)

    def test_chi2_quantile(self):
        for level in (0.5, 0.9, 0.95, 0.999):
            assert chi2_quantile_2df(level) == pytest.approx(scipy.stats.chi2.ppf(level, 2), rel=1e-12)
        assert math.sqrt(chi2_quantile_2df(0.95)) == pytest.approx(2.4477, abs=1e-4)
