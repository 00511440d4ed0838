"""Seeded stand-ins for the census and fire-call extracts.

The real extracts are not redistributed. These generators draw populations
from random Bayesian networks whose attribute names and cardinalities mimic
them: skewed categorical marginals, chains of dependent attributes and a
binary secret tied to a few quasi-identifiers. They are good enough to
exercise every code path at realistic sizes; absolute attack numbers still
depend on the real data.
"""
from __future__ import annotations

import numpy as np

from .data import AttributeDomain, Dataset, DomainSchema

ACS_ATTRIBUTES = [
    ("AGEP", 8), ("SCHL", 10), ("MAR", 5), ("RELP", 12), ("DIS", 2), ("ESP", 6),
    ("CIT", 5), ("MIG", 3), ("MIL", 4), ("ANC", 4), ("NATIVITY", 2), ("DEAR", 2),
    ("DEYE", 2), ("DREM", 2), ("ESR", 3), ("SEX", 2),
]

FIRE_ATTRIBUTES = [
    ("Call Type Group", 4), ("Priority", 3), ("Call Type", 8), ("Zipcode of Incident", 10),
    ("Number of Alarms", 2), ("Battalion", 8), ("Call Final Disposition", 8), ("City", 4),
    ("Station Area", 10), ("ALS Unit", 2),
]


def _skewed_simplex(c: int, rng: np.random.Generator, concentration: float, decay: float) -> np.ndarray:
    base = decay ** rng.permutation(c).astype(float)
    base /= base.sum()
    return rng.dirichlet(np.maximum(concentration * c * base, 1e-3))


def random_population(cards, size: int, rng: np.random.Generator, names=None, concentration: float = 1.0,
                      decay: float = 0.6, max_parents: int = 2) -> Dataset:
    """Draw ``size`` records from a random DAG-structured categorical model.

    Attribute ``j`` depends on up to ``max_parents`` earlier attributes.
    Lower ``concentration`` and ``decay`` give more skewed marginals.
    """
    cards = [int(c) for c in cards]
    d = len(cards)
    rows = np.zeros((size, d), dtype=np.int64)
    for j, c in enumerate(cards):
        k = min(j, max_parents)
        par = sorted(rng.choice(j, size=k, replace=False).tolist()) if k else []
        n_cfg = int(np.prod([cards[p] for p in par])) if par else 1
        cpt = np.stack([_skewed_simplex(c, rng, concentration, decay) for _ in range(n_cfg)])
        cfg = np.zeros(size, dtype=np.int64)
        for p in par:
            cfg = cfg * cards[p] + rows[:, p]
        cum = np.cumsum(cpt, axis=1)
        cum[:, -1] = 1.0
        rows[:, j] = (rng.random(size)[:, None] >= cum[cfg]).sum(axis=1)
    if names is None:
        names = [f"a{i}" for i in range(d - 1)] + ["secret"]
    schema = DomainSchema(tuple(AttributeDomain(nm, tuple(str(v) for v in range(c))) for nm, c in zip(names, cards)), d - 1)
    return Dataset(schema, rows)


def acs_like(size: int = 50_000, seed: int = 0) -> Dataset:
    """16 attributes, secret ``SEX`` last; roughly 4.7k secret-containing 3-way queries."""
    names, cards = zip(*ACS_ATTRIBUTES)
    return random_population(cards, size, np.random.default_rng(seed), names=names, concentration=0.3, decay=0.45)


def fire_like(size: int = 50_000, seed: int = 0) -> Dataset:
    """10 attributes, secret ``ALS Unit`` last."""
    names, cards = zip(*FIRE_ATTRIBUTES)
    return random_population(cards, size, np.random.default_rng(seed), names=names, concentration=1.0, decay=0.7)
