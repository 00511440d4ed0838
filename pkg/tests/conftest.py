from __future__ import annotations

import itertools
import re

import numpy as np
import pytest

from linrecon.data import Dataset, DomainSchema, split_secret


def random_dataset(rng: np.random.Generator, cards, n: int) -> Dataset:
    schema = DomainSchema.from_cardinalities(cards)
    rows = np.column_stack([rng.integers(0, c, size=n) for c in cards])
    return Dataset(schema, rows)


def unique_instance(rng, cards, n):
    """``n`` records with pairwise distinct quasi-identifiers and a uniform secret."""
    schema = DomainSchema.from_cardinalities(cards)
    cells = rng.choice(int(np.prod(cards[:-1])), n, replace=False)
    qi = np.column_stack(np.unravel_index(cells, cards[:-1]))
    rows = np.column_stack([qi, rng.integers(0, cards[-1], n)])
    d = Dataset(schema, rows)
    x, y = split_secret(d)
    return d, x, y


def brute_force(p):
    """Best objective over all binary t, and every minimiser."""
    a, r = p.system()
    cand = np.array(list(itertools.product([0.0, 1.0], repeat=p.n)))
    obj = np.abs(r[None, :] - cand @ a.T.toarray()).sum(axis=1)
    best = obj.min()
    return best, cand[np.isclose(obj, best, atol=1e-12, rtol=0)]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_schema():
    return DomainSchema.from_cardinalities([3, 2, 4, 2])


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: (int(re.match(r"C(\d+)", s)[1]), s)):
            terminalreporter.write_line(line)
