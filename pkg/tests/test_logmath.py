import math

import numpy as np
import pytest
from scipy import special

from photonlab._logmath import NEG_INF, binomial_poly, log_binom, log_poisson, lse, poly_product, separable_logsum


def test_lse_edge_cases():
    assert lse(np.array([NEG_INF, NEG_INF])) == NEG_INF
    assert lse(np.array([])) == NEG_INF
    assert lse(np.array([1000.0, 1000.0])) == pytest.approx(1000 + math.log(2))
    out = lse(np.array([[0.0, NEG_INF], [NEG_INF, NEG_INF]]), axis=1)
    assert out[0] == 0.0 and out[1] == NEG_INF


def test_log_pmfs():
    assert log_poisson(0, 0.0) == 0.0
    assert log_poisson(3, 0.0) == NEG_INF
    assert log_binom(5, 6) == NEG_INF
    assert math.exp(log_binom(10, 3)) == pytest.approx(120)


def test_binomial_polynomial_product():
    s, c = poly_product([binomial_poly(0.5, 0.5, 3), binomial_poly(1j, 1.0, 2)])
    direct = np.convolve(np.array([1, 3, 3, 1]) / 8, np.array([1, 2j, -1]))
    assert np.allclose(np.exp(s) * c, direct, atol=1e-15)


def test_separable_sum_matches_direct():
    rng = np.random.default_rng(1)
    logw = np.log(rng.random(5))
    logf = [rng.normal(size=(5, 70)), rng.normal(size=(5, 90))]
    direct = np.log(np.einsum("k,ki,kj->ij", np.exp(logw), np.exp(logf[0]), np.exp(logf[1])))
    assert np.allclose(separable_logsum(logw, logf, block=32), direct, atol=1e-12)


def test_tilt_rescues_non_separable_factor():
    # negative multinomial: gammaln(K + n1 + n2) is applied after the separable sum
    K, p = 2.0, np.array([0.48, 0.48])
    n = np.arange(1200)
    logf = [(n * math.log(pm) - special.gammaln(n + 1.0))[None, :] for pm in p]
    S = n[:, None] + n[None, :]
    norm = K * math.log(1 - p.sum()) - special.gammaln(K)

    def tilt(sl):
        slope = float(special.digamma(K + sum(0.5 * (s.start + s.stop - 1) for s in sl)))
        return [slope * np.arange(s.start, s.stop) for s in sl]

    plain = separable_logsum(np.array([norm]), logf) + special.gammaln(K + S)
    tilted = separable_logsum(np.array([norm]), logf, tilt=tilt) + special.gammaln(K + S)
    assert abs(math.exp(lse(tilted)) - 1) < 1e-12
    assert 1 - math.exp(lse(plain)) > 1e-11
