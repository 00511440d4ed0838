import itertools
import math

import numpy as np
import pytest
from scipy import integrate, stats

from linrecon.mechanisms import (analytic_gaussian_sigma, exponential_mechanism, exponential_top_k,
                                 exponential_weights, gaussian_noise, laplace_noise, mutual_information_sensitivity)
from linrecon.sdg.bayesnet import mutual_information


def test_laplace_ks():
    x = laplace_noise(2.5, 10_000, np.random.default_rng(0))
    assert stats.kstest(x, "laplace", args=(0, 2.5)).pvalue > 0.01


def test_gaussian_ks():
    x = gaussian_noise(0.7, 10_000, np.random.default_rng(1))
    assert stats.kstest(x, "norm", args=(0, 0.7)).pvalue > 0.01


def _delta_by_integration(sigma, eps, sens):
    # hockey-stick divergence between N(0, s^2) and N(sens, s^2), integrated numerically
    # the integrand is positive exactly left of the crossing point of the two weighted densities
    p = stats.norm(0, sigma).pdf
    q = stats.norm(sens, sigma).pdf
    cross = sens / 2 - eps * sigma ** 2 / sens
    f = lambda x: p(x) - math.exp(eps) * q(x)
    return integrate.quad(f, cross - 40 * sigma, cross, epsabs=0, epsrel=1e-11, limit=500)[0]


@pytest.mark.parametrize("eps,delta,sens", [(1.0, 1e-5, 1.0), (0.1, 1e-3, 2.0), (5.0, 1e-6, 0.01)])
def test_analytic_gaussian_matches_numeric_privacy_profile(eps, delta, sens):
    sigma = analytic_gaussian_sigma(eps, delta, sens)
    assert _delta_by_integration(sigma, eps, sens) == pytest.approx(delta, rel=1e-4)
    assert _delta_by_integration(sigma * 0.98, eps, sens) > delta


def test_analytic_gaussian_beats_classical_bound():
    eps, delta = 0.5, 1e-5
    classical = math.sqrt(2 * math.log(1.25 / delta)) / eps
    assert analytic_gaussian_sigma(eps, delta, 1.0) < classical


def test_exponential_mechanism_frequencies():
    scores = [0.0, 1.0, 2.0, 0.5]
    w = exponential_weights(scores, 2.0, 1.0)
    assert w.sum() == pytest.approx(1.0)
    assert w == pytest.approx(np.exp(np.array(scores)) / np.exp(scores).sum())
    rng = np.random.default_rng(2)
    counts = np.bincount([exponential_mechanism(scores, 2.0, 1.0, rng) for _ in range(10_000)], minlength=4)
    assert stats.chisquare(counts, 10_000 * w).pvalue > 0.01


def test_exponential_top_k():
    rng = np.random.default_rng(3)
    scores = np.arange(20.0)
    pick = exponential_top_k(scores, 5, 1e6, 1.0, rng)
    assert sorted(pick.tolist()) == [15, 16, 17, 18, 19]
    for _ in range(50):
        p = exponential_top_k(scores, 7, 0.5, 1.0, rng)
        assert len(set(p.tolist())) == 7


def test_exponential_top_one_is_the_exponential_mechanism():
    scores = np.array([0.0, 1.0, 3.0])
    rng = np.random.default_rng(4)
    picks = np.array([exponential_top_k(scores, 1, 1.0, 1.0, rng)[0] for _ in range(10_000)])
    expected = exponential_weights(scores, 1.0, 1.0) * 10_000
    assert stats.chisquare(np.bincount(picks, minlength=3), expected).pvalue > 0.01


def test_mutual_information_sensitivity_bounds_brute_force():
    n = 6
    cells = [(a, b) for a in range(2) for b in range(2)]
    worst = 0.0
    for combo in itertools.combinations_with_replacement(range(4), n):
        data = np.array([cells[c] for c in combo])
        base = mutual_information(data[:, 0], data[:, 1], 2, 2)
        for i in range(n):
            for c in range(4):
                alt = data.copy()
                alt[i] = cells[c]
                worst = max(worst, abs(mutual_information(alt[:, 0], alt[:, 1], 2, 2) - base))
    assert worst <= mutual_information_sensitivity(n) + 1e-12
