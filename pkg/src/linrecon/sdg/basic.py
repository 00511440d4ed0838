"""Generators with no model fitting: resampling and independent marginals."""
from __future__ import annotations

import numpy as np

from ..data import Dataset


def gen_nonprivate(d: Dataset, m: int, rng: np.random.Generator) -> Dataset:
    """Sample ``m`` records of ``d`` uniformly with replacement."""
    idx = rng.integers(0, d.n, size=m)
    return d.with_rows(d.rows[idx])


def gen_indhist(d: Dataset, m: int, rng: np.random.Generator) -> Dataset:
    """Sample each column independently from its empirical histogram."""
    out = np.empty((m, d.d), dtype=d.rows.dtype)
    for j, c in enumerate(d.schema.cardinalities):
        freq = np.bincount(d.rows[:, j], minlength=c) / d.n
        out[:, j] = rng.choice(c, size=m, p=freq)
    return d.with_rows(out)
