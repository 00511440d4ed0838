"""Utility of synthetic data measured on marginal tables."""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .data import Dataset
from .queries import KTooLarge, marginal_table


class NoQualifyingQueries(ValueError):
    pass


@dataclass
class UtilityReport:
    mre_gt10: float | None
    k_tvd: float
    query_count: int
    subset_count: int

    def to_json(self) -> dict:
        return asdict(self)


def _same_schema(d: Dataset, s: Dataset) -> None:
    if d.schema.cardinalities != s.schema.cardinalities:
        raise ValueError("datasets must share a schema")


def tvd_subset(d: Dataset, s: Dataset, attrs: Sequence[int]) -> float:
    """Half the L1 distance between the two normalised histograms over ``attrs``."""
    _same_schema(d, s)
    attrs = tuple(sorted(int(a) for a in attrs))
    p = marginal_table(d, attrs) / d.n
    q = marginal_table(s, attrs) / s.n
    return 0.5 * float(np.abs(p - q).sum())


def random_subsets(d: int, k: int, p: int, rng: np.random.Generator) -> list[tuple[int, ...]]:
    """``p`` distinct k-subsets of ``range(d)`` (all of them if fewer exist)."""
    if k > d:
        raise KTooLarge(f"k={k} exceeds d={d}")
    total = math.comb(d, k)
    if p >= total:
        return list(itertools.combinations(range(d), k))
    if total <= 200_000:
        pool = list(itertools.combinations(range(d), k))
        return [pool[i] for i in rng.choice(total, size=p, replace=False)]
    seen: set[tuple[int, ...]] = set()
    out = []
    while len(out) < p:
        sub = tuple(sorted(rng.choice(d, size=k, replace=False).tolist()))
        if sub not in seen:
            seen.add(sub)
            out.append(sub)
    return out


def k_tvd(d: Dataset, s: Dataset, k: int = 3, p: int = 100, rng: np.random.Generator | None = None) -> float:
    """Average TVD over ``p`` random k-attribute subsets."""
    rng = rng if rng is not None else np.random.default_rng()
    subsets = random_subsets(d.d, k, p, rng)
    return float(np.mean([tvd_subset(d, s, a) for a in subsets]))


def mre_gt10(d: Dataset, s: Dataset, num_queries: int = 1000, rng: np.random.Generator | None = None,
             threshold: int = 10) -> float:
    """Mean relative error over random 3-way cells whose count in ``d`` exceeds ``threshold``.

    Cells are drawn uniformly: a triple of attributes, then a value per
    attribute. Answers are compared as fractions so ``s.n`` may differ from
    ``d.n``.
    """
    return _mre(d, s, num_queries, rng if rng is not None else np.random.default_rng(), threshold)[0]


def _mre(d, s, num_queries, rng, threshold=10):
    _same_schema(d, s)
    if d.d < 3:
        raise KTooLarge("3-way queries need at least three attributes")
    cards = d.schema.cardinalities
    triples = np.array([sorted(rng.choice(d.d, size=3, replace=False)) for _ in range(num_queries)])
    values = np.stack([rng.integers(0, np.asarray(cards)[triples[:, j]]) for j in range(3)], axis=1)
    errs = []
    cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}
    for t, v in zip(map(tuple, triples.tolist()), values):
        if t not in cache:
            cache[t] = (marginal_table(d, t), marginal_table(s, t))
        cd, cs = cache[t]
        count = int(cd[tuple(v)])
        if count > threshold:
            fd = count / d.n
            fs = int(cs[tuple(v)]) / s.n
            errs.append(abs(fs - fd) / fd)
    if not errs:
        raise NoQualifyingQueries(f"none of {num_queries} random cells has a count above {threshold}")
    return float(np.mean(errs)), len(errs)


def utility_report(d: Dataset, s: Dataset, rng: np.random.Generator, num_queries: int = 1000,
                   k: int = 3, p: int = 100) -> UtilityReport:
    try:
        mre, used = _mre(d, s, num_queries, rng)
    except NoQualifyingQueries:
        mre, used = None, 0
    subsets = random_subsets(d.d, k, p, rng)
    tvd = float(np.mean([tvd_subset(d, s, a) for a in subsets]))
    return UtilityReport(mre, tvd, used, len(subsets))
