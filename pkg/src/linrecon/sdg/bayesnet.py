"""Greedy Bayesian-network synthesizer, with an optional epsilon-DP fit.

Structure learning places attributes one at a time. Each step scores every
(unplaced child, parent set of already-placed attributes) pair by empirical
mutual information and keeps the best one, or samples one with the
exponential mechanism in DP mode. Conditional tables come from counts, with
Laplace noise in DP mode.

Simplifications relative to the original private algorithm: no
theta-usefulness degree selection, a fixed 50/50 budget split, and the
plain mutual-information score with its worst-case sensitivity.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from ..data import Dataset
from ..mechanisms import exponential_mechanism, laplace_noise, mutual_information_sensitivity


class DegreeTooLarge(ValueError):
    pass


@dataclass
class BayesNetModel:
    cards: tuple[int, ...]
    ordering: list[int]
    parents: list[tuple[int, ...]]
    cpts: list[np.ndarray]

    def to_json(self) -> dict:
        return {
            "cardinalities": list(self.cards),
            "ordering": list(self.ordering),
            "parents": [list(p) for p in self.parents],
            "cpts": [c.tolist() for c in self.cpts],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def joint(self) -> np.ndarray:
        """Full joint distribution implied by the network; small domains only."""
        joint = np.ones(self.cards)
        grid = np.indices(self.cards)
        for a in range(len(self.cards)):
            cfg = _config_index([grid[p] for p in self.parents[a]], [self.cards[p] for p in self.parents[a]])
            joint *= self.cpts[a][cfg, grid[a]]
        return joint


def _config_index(cols, cards) -> np.ndarray:
    out = np.zeros(np.shape(cols[0]) if cols else (), dtype=np.int64)
    for col, c in zip(cols, cards):
        out = out * c + np.asarray(col, dtype=np.int64)
    return out


def mutual_information(child: np.ndarray, parent_cfg: np.ndarray, n_child: int, n_cfg: int) -> float:
    """Empirical mutual information in nats, with 0 log 0 = 0."""
    joint = np.bincount(parent_cfg * n_child + child, minlength=n_cfg * n_child).reshape(n_cfg, n_child)
    p = joint / joint.sum()
    px = p.sum(axis=1, keepdims=True)
    py = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float((p[nz] * np.log(p[nz] / (px @ py)[nz])).sum())


def fit_bayes_net(d: Dataset, degree: int = 3, epsilon: float | None = None,
                  rng: np.random.Generator | None = None) -> BayesNetModel:
    rng = rng if rng is not None else np.random.default_rng()
    rows = d.rows.astype(np.int64)
    cards = d.schema.cardinalities
    nattr = d.d
    if degree < 1:
        raise ValueError("degree must be at least 1")
    if degree >= nattr:
        raise DegreeTooLarge(f"degree {degree} must be smaller than the number of attributes {nattr}")
    dp = epsilon is not None
    if dp and epsilon <= 0:
        raise ValueError("epsilon must be positive")

    first = int(rng.integers(nattr))
    ordering = [first]
    parents: list[tuple[int, ...]] = [()] * nattr
    remaining = [a for a in range(nattr) if a != first]
    if dp:
        eps_step = (epsilon / 2) / max(nattr - 1, 1)
        sens = mutual_information_sensitivity(d.n)
    cfg_cache: dict[tuple[int, ...], np.ndarray] = {}

    while remaining:
        size = min(degree, len(ordering))
        cands, scores = [], []
        for child in remaining:
            for par in itertools.combinations(sorted(ordering), size):
                if par not in cfg_cache:
                    cfg_cache[par] = _config_index([rows[:, p] for p in par], [cards[p] for p in par])
                n_cfg = int(np.prod([cards[p] for p in par]))
                cands.append((child, par))
                scores.append(mutual_information(rows[:, child], cfg_cache[par], cards[child], n_cfg))
        if dp:
            pick = exponential_mechanism(scores, eps_step, sens, rng)
        else:
            pick = int(np.argmax(scores))
        child, par = cands[pick]
        parents[child] = par
        ordering.append(child)
        remaining.remove(child)

    noise_scale = 2.0 * nattr / (epsilon / 2) if dp else 0.0
    cpts = []
    for a in range(nattr):
        par = parents[a]
        n_cfg = int(np.prod([cards[p] for p in par]))
        cfg = _config_index([rows[:, p] for p in par], [cards[p] for p in par]) if par else np.zeros(d.n, dtype=np.int64)
        counts = np.bincount(cfg * cards[a] + rows[:, a], minlength=n_cfg * cards[a]).reshape(n_cfg, cards[a]).astype(float)
        if dp:
            counts = np.maximum(counts + laplace_noise(noise_scale, counts.shape, rng), 0.0)
        tot = counts.sum(axis=1, keepdims=True)
        cpt = np.where(tot > 0, counts / np.where(tot > 0, tot, 1.0), 1.0 / cards[a])
        cpts.append(cpt)
    return BayesNetModel(tuple(cards), ordering, parents, cpts)


def sample_bayes_net(model: BayesNetModel, m: int, rng: np.random.Generator, chunk: int = 1 << 17) -> np.ndarray:
    """Ancestral sampling; returns an ``m x d`` index array."""
    out = np.zeros((m, len(model.cards)), dtype=np.int64)
    for a in model.ordering:
        par = model.parents[a]
        cum = np.cumsum(model.cpts[a], axis=1)
        cum[:, -1] = 1.0
        cfg = _config_index([out[:, p] for p in par], [model.cards[p] for p in par]) if par else np.zeros(m, dtype=np.int64)
        u = rng.random(m)
        for lo in range(0, m, chunk):
            sl = slice(lo, lo + chunk)
            out[sl, a] = (u[sl, None] >= cum[cfg[sl]]).sum(axis=1)
    np.minimum(out, np.asarray(model.cards) - 1, out=out)
    return out
