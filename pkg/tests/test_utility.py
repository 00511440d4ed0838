import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_dataset
from linrecon.data import Dataset, DomainSchema
from linrecon.datasets import acs_like
from linrecon.queries import KTooLarge
from linrecon.sdg import gen_indhist, gen_nonprivate
from linrecon.utility import NoQualifyingQueries, k_tvd, mre_gt10, random_subsets, tvd_subset, utility_report


def brute_tvd(d, s, attrs):
    total = 0.0
    cards = [d.schema.cardinalities[a] for a in attrs]
    for cell in itertools.product(*(range(c) for c in cards)):
        pd = np.mean((d.rows[:, list(attrs)] == cell).all(axis=1))
        ps = np.mean((s.rows[:, list(attrs)] == cell).all(axis=1))
        total += abs(pd - ps)
    return total / 2


def test_identical_data_scores_exactly_zero(rng):
    d = random_dataset(rng, [4, 3, 5, 2], 1000)
    assert mre_gt10(d, d, rng=rng) == 0.0 and k_tvd(d, d, rng=rng) == 0.0


def test_mre_single_cell_example():
    # Q(d) = 200/1000 = 0.2 on cell (0,0,0); every other cell holds at most 5 records and fails the filter
    schema = DomainSchema.from_cardinalities([10, 10, 2])
    rest = np.column_stack(np.unravel_index(np.r_[np.tile(np.arange(1, 200), 4), 1:5], (10, 10, 2)))
    d = Dataset(schema, np.vstack([np.zeros((200, 3), np.int64), rest]))
    s = Dataset(schema, np.vstack([np.zeros((25, 3), np.int64), rest[:75]]))  # Q(s) = 0.25
    assert mre_gt10(d, s, num_queries=20_000, rng=np.random.default_rng(0)) == pytest.approx(0.25, abs=1e-12)


def test_mre_ignores_small_cells_and_raises_when_none_qualify(rng):
    schema = DomainSchema.from_cardinalities([3, 3, 2])
    cells = np.column_stack(np.unravel_index(np.arange(18), (3, 3, 2)))
    d = Dataset(schema, np.repeat(cells, 10, axis=0))  # every cell holds exactly 10 records
    with pytest.raises(NoQualifyingQueries):
        mre_gt10(d, d, num_queries=200, rng=rng)
    assert utility_report(d, d, rng, num_queries=200).mre_gt10 is None


def test_disjoint_support_has_tvd_one():
    schema = DomainSchema.from_cardinalities([3, 2])
    d = Dataset(schema, [[0, 0]] * 5)
    s = Dataset(schema, [[2, 1]] * 7)
    assert tvd_subset(d, s, (0, 1)) == 1.0 and tvd_subset(d, s, (0,)) == 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tvd_matches_cell_enumeration(seed):
    rng = np.random.default_rng(seed)
    cards = rng.integers(2, 5, 3).tolist() + [2]
    d = random_dataset(rng, cards, int(rng.integers(1, 60)))
    s = random_dataset(rng, cards, int(rng.integers(1, 60)))
    attrs = tuple(sorted(rng.choice(4, size=int(rng.integers(1, 4)), replace=False).tolist()))
    assert tvd_subset(d, s, attrs) == pytest.approx(brute_tvd(d, s, attrs), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tvd_bounds_and_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    cards = [3, 4, 3, 2]
    a, b, c = (random_dataset(rng, cards, int(rng.integers(1, 80))) for _ in range(3))
    attrs = (0, 2, 3)
    ab, bc, ac = tvd_subset(a, b, attrs), tvd_subset(b, c, attrs), tvd_subset(a, c, attrs)
    assert 0.0 <= ab <= 1.0 and ac <= ab + bc + 1e-12


def test_subsets_are_distinct_and_seeded(rng):
    subs = random_subsets(16, 3, 100, np.random.default_rng(4))
    assert len(set(subs)) == 100 and all(len(s) == 3 and list(s) == sorted(s) for s in subs)
    assert subs == random_subsets(16, 3, 100, np.random.default_rng(4))
    assert len(random_subsets(5, 3, 100, rng)) == 10
    with pytest.raises(KTooLarge):
        random_subsets(3, 4, 1, rng)
    d = random_dataset(rng, [2, 2, 2], 10)
    with pytest.raises(KTooLarge):
        k_tvd(d, d, k=4, rng=rng)


def test_k_tvd_is_deterministic_under_seed(rng):
    d = random_dataset(rng, [4, 3, 5, 3, 2], 300)
    s = random_dataset(rng, [4, 3, 5, 3, 2], 100)
    assert k_tvd(d, s, p=5, rng=np.random.default_rng(7)) == k_tvd(d, s, p=5, rng=np.random.default_rng(7))


def test_nonprivate_tvd_shrinks_with_m():
    pop = acs_like(5000)
    rng = np.random.default_rng(0)
    small, large = [], []
    for _ in range(50):
        idx = rng.choice(pop.n, 1000, replace=False)
        d = pop.with_rows(pop.rows[idx])
        small.append(k_tvd(d, gen_nonprivate(d, 100, rng), p=20, rng=rng))
        large.append(k_tvd(d, gen_nonprivate(d, 10_000, rng), p=20, rng=rng))
    assert np.mean(small) > np.mean(large)


def test_indhist_loses_joint_structure():
    pop = acs_like(5000)
    rng = np.random.default_rng(1)
    d = pop.with_rows(pop.rows[:1000])
    near = k_tvd(d, gen_nonprivate(d, 100_000, rng), rng=np.random.default_rng(2))
    far = k_tvd(d, gen_indhist(d, 100_000, rng), rng=np.random.default_rng(2))
    assert far > near + 0.05


def test_report_counts(rng):
    d = random_dataset(rng, [2, 2, 2, 2], 1000)
    rep = utility_report(d, gen_nonprivate(d, 1000, rng), rng, num_queries=300, p=2)
    assert rep.subset_count == 2 and 0 < rep.query_count <= 300 and 0 <= rep.k_tvd <= 1
    assert set(rep.to_json()) == {"mre_gt10", "k_tvd", "query_count", "subset_count"}
