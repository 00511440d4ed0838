"""Differential-privacy noise and selection primitives."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import log_ndtr, softmax


def laplace_noise(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    return rng.laplace(0.0, scale, size=size)


def gaussian_noise(sigma: float, size, rng: np.random.Generator) -> np.ndarray:
    return rng.normal(0.0, sigma, size=size)


def exponential_weights(scores, epsilon: float, sensitivity: float) -> np.ndarray:
    """Selection probabilities proportional to exp(eps * score / (2 * sensitivity))."""
    scores = np.asarray(scores, dtype=float)
    return softmax(scores * epsilon / (2.0 * sensitivity))


def exponential_mechanism(scores, epsilon: float, sensitivity: float, rng: np.random.Generator) -> int:
    p = exponential_weights(scores, epsilon, sensitivity)
    return int(rng.choice(len(p), p=p))


def exponential_top_k(scores, k: int, epsilon: float, sensitivity: float, rng: np.random.Generator) -> np.ndarray:
    """``k`` distinct picks, each an exponential mechanism with ``epsilon / k``.

    Implemented with the Gumbel-max trick, which is distributionally the same
    as peeling one item at a time.
    """
    scores = np.asarray(scores, dtype=float)
    k = min(int(k), len(scores))
    z = scores * (epsilon / k) / (2.0 * sensitivity) + rng.gumbel(size=len(scores))
    return np.argsort(-z, kind="stable")[:k]


def _gaussian_delta(sigma: float, epsilon: float, sensitivity: float) -> float:
    # Exact delta of the Gaussian mechanism (Balle & Wang 2018, Thm. 8).
    a = sensitivity / (2 * sigma)
    b = epsilon * sigma / sensitivity
    first = math.exp(log_ndtr(a - b))
    lsecond = epsilon + log_ndtr(-a - b)
    return first - math.exp(lsecond) if lsecond > -745 else first


def analytic_gaussian_sigma(epsilon: float, delta: float, sensitivity: float = 1.0, tol: float = 1e-12) -> float:
    """Smallest sigma for which Gaussian noise is (epsilon, delta)-DP.

    Bisection on the exact privacy profile; delta is decreasing in sigma.
    """
    if epsilon <= 0 or not 0 < delta < 1:
        raise ValueError("need epsilon > 0 and 0 < delta < 1")
    lo, hi = 1e-12 * sensitivity, sensitivity
    while _gaussian_delta(hi, epsilon, sensitivity) > delta:
        hi *= 2.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if _gaussian_delta(mid, epsilon, sensitivity) > delta:
            lo = mid
        else:
            hi = mid
    return hi


def mutual_information_sensitivity(n: int) -> float:
    """L1 sensitivity of empirical mutual information (natural log) under record replacement."""
    return 2.0 / n * math.log((n + 1) / 2.0) + (n - 1) / n * math.log((n + 1) / (n - 1))
