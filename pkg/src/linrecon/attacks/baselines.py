"""Comparison attacks: closest record after mode collapse, and naive Bayes."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..data import Dataset, row_keys
from .lp import AttackGuess


class EmptyDataset(ValueError):
    pass


@dataclass
class CollapsedSynth:
    """One record per distinct quasi-identifier tuple of ``S``, carrying its modal secret."""

    qi: np.ndarray
    secret: np.ndarray

    def __len__(self) -> int:
        return len(self.qi)

    def rows(self) -> np.ndarray:
        return np.column_stack([self.qi, self.secret]).astype(np.int64)


def collapse_by_mode(s: Dataset, rng: np.random.Generator) -> CollapsedSynth:
    """Replace every group of records sharing quasi-identifiers by one with the group's majority secret.

    Equal counts are settled by a fair coin. Groups are visited in sorted
    key order, so the result does not depend on the row order of ``s``.
    """
    if s.n == 0:
        raise EmptyDataset("cannot collapse an empty dataset")
    rows, weights = s.compressed()
    keys = row_keys(rows[:, :-1], s.schema.cardinalities[:-1])
    uniq, first, inv = np.unique(keys, return_index=True, return_inverse=True)
    inv = inv.reshape(-1)
    ones = np.bincount(inv, weights=weights * (rows[:, -1] == 1), minlength=len(uniq))
    zeros = np.bincount(inv, weights=weights * (rows[:, -1] == 0), minlength=len(uniq))
    secret = (ones > zeros).astype(np.int64)
    tie = ones == zeros
    secret[tie] = rng.integers(0, 2, size=int(tie.sum()))
    return CollapsedSynth(rows[first, :-1].astype(np.int64), secret)


def dcr_attack(s: Dataset, x_u, rng: np.random.Generator) -> AttackGuess:
    """Pick the secret whose completion of ``x_u`` lies closest (L2 on category indices) to a collapsed record."""
    collapsed = collapse_by_mode(s, rng)
    return dcr_guess(collapsed, x_u, rng)


def dcr_guess(collapsed: CollapsedSynth, x_u, rng: np.random.Generator) -> AttackGuess:
    z = collapsed.rows().astype(float)
    x_u = np.asarray(x_u, dtype=float)
    base = ((z[:, :-1] - x_u) ** 2).sum(axis=1)
    dist = [float(np.min(base + (z[:, -1] - t) ** 2)) for t in (0, 1)]
    if dist[0] < dist[1]:
        guess = 0
    elif dist[1] < dist[0]:
        guess = 1
    else:
        guess = int(rng.integers(2))
    return AttackGuess(guess, float(guess))


@dataclass
class CategoricalNB:
    """``log_prior[c]`` and ``log_cond[a][c, v]`` for each quasi-identifier ``a``."""

    log_prior: np.ndarray
    log_cond: list[np.ndarray]
    alpha: float

    @property
    def prior(self) -> np.ndarray:
        return np.exp(self.log_prior)

    def joint_log(self, x_u) -> np.ndarray:
        out = self.log_prior.copy()
        for a, v in enumerate(np.asarray(x_u, dtype=np.int64)):
            out += self.log_cond[a][:, v]
        return out

    def posterior(self, x_u) -> np.ndarray:
        jl = self.joint_log(x_u)
        return np.exp(jl - logsumexp(jl))

    def predict(self, x_u) -> int:
        """Argmax class; equal posteriors go to class 0."""
        p = self.posterior(x_u)
        return int(p[1] > p[0])


def nb_fit(s: Dataset, alpha: float = 1.0) -> CategoricalNB:
    """Smoothed maximum-likelihood categorical naive Bayes of the secret given the quasi-identifiers."""
    if s.n == 0:
        raise EmptyDataset("cannot fit a classifier on an empty dataset")
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rows, weights = s.compressed()
    y = rows[:, -1].astype(np.int64)
    class_n = np.bincount(y, weights=weights, minlength=2)
    log_prior = np.log((class_n + alpha) / (class_n.sum() + 2 * alpha))
    log_cond = []
    for a, c in enumerate(s.schema.cardinalities[:-1]):
        counts = np.zeros((2, c))
        np.add.at(counts, (y, rows[:, a].astype(np.int64)), weights)
        log_cond.append(np.log((counts + alpha) / (class_n[:, None] + c * alpha)))
    return CategoricalNB(log_prior, log_cond, alpha)


def ml_attack(s: Dataset, x_u, alpha: float = 1.0) -> AttackGuess:
    model = nb_fit(s, alpha)
    p = model.posterior(x_u)
    return AttackGuess(int(p[1] > p[0]), float(p[1]))


def random_guess(rng: np.random.Generator) -> AttackGuess:
    """A fair coin, for calibrating the game."""
    g = int(rng.integers(2))
    return AttackGuess(g, float(g))
