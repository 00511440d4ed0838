import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linrecon.data import Dataset, DomainSchema, split_secret
from linrecon.datasets import ACS_ATTRIBUTES, acs_like
from linrecon.queries import (KTooLarge, MarginalQuery, QueryError, QuerySet, SecretAbsent, conditional_answer,
                              count_secret_queries, drop_secret, enumerate_secret_queries, eval_count,
                              eval_fraction, evaluate_counts, marginal_table, read_queries_jsonl, sample_queries,
                              write_queries_jsonl)
from linrecon.sdg import gen_nonprivate

from conftest import random_dataset


def test_eval_four_row_example():
    d = Dataset(DomainSchema.from_cardinalities([2, 2]), [[0, 0], [0, 1], [1, 1], [1, 1]])
    q = MarginalQuery((0, 1), (1, 1))
    assert eval_fraction(q, d) == 0.5
    assert eval_count(q, d) == 2
    assert eval_count(MarginalQuery((0, 1), (1, 0)), d) == 0


def test_query_validation():
    with pytest.raises(QueryError):
        MarginalQuery((1, 0), (0, 0))
    with pytest.raises(QueryError):
        MarginalQuery((0, 1), (0,))
    with pytest.raises(QueryError):
        MarginalQuery((0, 1), (2, 0)).check((2, 2))


def test_fractions_partition_to_one(rng):
    d = random_dataset(rng, [3, 4, 2, 2], 97)
    for attrs in itertools.combinations(range(4), 2):
        total = sum(eval_fraction(MarginalQuery(attrs, v), d)
                    for v in itertools.product(*(range(d.schema.cardinalities[a]) for a in attrs)))
        assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_vectorised_matches_row_scan(seed):
    rng = np.random.default_rng(seed)
    cards = [3, 2, 4, 2]
    d = random_dataset(rng, cards, int(rng.integers(1, 80)))
    k = int(rng.integers(1, 5))
    attrs = tuple(sorted(rng.choice(4, size=k, replace=False).tolist()))
    vals = tuple(int(rng.integers(cards[a])) for a in attrs)
    q = MarginalQuery(attrs, vals)
    qs = QuerySet([attrs], [vals])
    assert evaluate_counts(qs, d)[0] == eval_count(q, d)
    assert eval_fraction(q, d) == eval_count(q, d) / d.n
    assert round(d.n * eval_fraction(q, d)) == eval_count(q, d)


def test_permutation_invariance_and_purity(rng):
    d = random_dataset(rng, [3, 4, 2], 200)
    qs = enumerate_secret_queries(d.schema, 2)
    a = evaluate_counts(qs, d)
    b = evaluate_counts(qs, d.with_rows(d.rows[rng.permutation(d.n)]))
    assert np.array_equal(a, b)
    assert np.array_equal(a, evaluate_counts(qs, d))


def test_marginal_table_matches_naive(rng):
    d = random_dataset(rng, [3, 4, 2, 2], 150)
    t = marginal_table(d, (0, 2))
    for v in itertools.product(range(3), range(2)):
        assert t[v] == eval_count(MarginalQuery((0, 2), v), d)


def test_enumeration_counts_and_order():
    schema = DomainSchema.from_cardinalities([2, 2, 2])
    qs = enumerate_secret_queries(schema, 2)
    assert len(qs) == 8
    assert [tuple(q.values) for q in qs][:4] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert all(2 in q.attrs for q in qs)
    full = DomainSchema.from_cardinalities([3, 4, 2])
    assert len(enumerate_secret_queries(full, 3)) == 2 * 3 * 4
    with pytest.raises(KTooLarge):
        enumerate_secret_queries(full, 4)
    for k in (2, 3):
        assert len(enumerate_secret_queries(full, k)) == count_secret_queries(full, k)


def test_acs_style_three_way_count():
    schema = DomainSchema.from_cardinalities([c for _, c in ACS_ATTRIBUTES])
    q = count_secret_queries(schema, 3)
    assert 4000 <= q <= 6000
    assert len(enumerate_secret_queries(schema, 3)) == q


def test_drop_secret():
    assert drop_secret(MarginalQuery((2, 5), (1, 0)), 5) == MarginalQuery((2,), (1,))
    with pytest.raises(SecretAbsent):
        drop_secret(MarginalQuery((1, 2), (0, 0)), 5)


def test_drop_secret_partition(rng):
    d = random_dataset(rng, [3, 4, 2], 120)
    for q in enumerate_secret_queries(d.schema, 3):
        if q.values[-1] == 0:
            other = MarginalQuery(q.attrs, q.values[:-1] + (1,))
            assert eval_count(drop_secret(q, 2), d) == eval_count(q, d) + eval_count(other, d)


def test_conditional_answer_examples():
    schema = DomainSchema.from_cardinalities([2, 2])
    s = Dataset(schema, [[0, 1], [0, 1], [1, 0]])
    x_rows = np.array([[0]] * 3 + [[1]] * 7)
    x = split_secret(Dataset(schema, np.column_stack([x_rows, np.zeros(10, int)])))[0]
    assert conditional_answer(MarginalQuery((0, 1), (0, 1)), s, x) == pytest.approx(0.3)
    s2 = Dataset(schema, [[1, 0]])
    assert conditional_answer(MarginalQuery((0, 1), (0, 1)), s2, x) is None


def test_conditional_equals_marginal_when_s_is_d(rng):
    d = random_dataset(rng, [3, 4, 2], 300)
    x, _ = split_secret(d)
    for q in enumerate_secret_queries(d.schema, 3):
        a = conditional_answer(q, d, x)
        if a is not None:
            assert a == pytest.approx(eval_fraction(q, d), abs=1e-15)


def test_conditional_answers_are_closer_on_large_resamples():
    d = acs_like(size=1000, seed=5)
    x, _ = split_secret(d)
    s = gen_nonprivate(d, 10**6, np.random.default_rng(0))
    qs = sample_queries(enumerate_secret_queries(d.schema, 3), 400, np.random.default_rng(1))
    cond_err, marg_err = [], []
    for q in qs:
        truth = eval_fraction(q, d)
        a = conditional_answer(q, s, x)
        if a is None or truth == 0:
            continue
        cond_err.append(abs(a - truth))
        marg_err.append(abs(eval_fraction(q, s) - truth))
    assert np.mean(cond_err) < np.mean(marg_err)


def test_sample_queries(rng):
    qs = enumerate_secret_queries(DomainSchema.from_cardinalities([3, 4, 2]), 2)
    perm = sample_queries(qs, len(qs), rng)
    key = lambda s: sorted(zip(map(tuple, s.attrs.tolist()), map(tuple, s.values.tolist())))
    assert key(perm) == key(qs)
    assert np.array_equal(sample_queries(qs, 5, np.random.default_rng(3)).values,
                          sample_queries(qs, 5, np.random.default_rng(3)).values)
    assert len(sample_queries(qs, 10**6, rng)) == len(qs)


def test_sample_queries_inclusion_uniform():
    qs = enumerate_secret_queries(DomainSchema.from_cardinalities([5, 2]), 2)  # 10 queries
    rng = np.random.default_rng(8)
    hits = np.zeros(10)
    reps = 10_000
    for _ in range(reps):
        sub = sample_queries(qs, 3, rng)
        hits[sub.values[:, 0] * 2 + sub.values[:, 1]] += 1
    p = 0.3
    assert np.abs(hits - reps * p).max() < 3.5 * np.sqrt(reps * p * (1 - p))


def test_jsonl_round_trip(tmp_path):
    qs = enumerate_secret_queries(DomainSchema.from_cardinalities([3, 4, 2]), 3)
    write_queries_jsonl(qs, tmp_path / "q.jsonl")
    back = read_queries_jsonl(tmp_path / "q.jsonl", secret_index=2)
    assert np.array_equal(back.attrs, qs.attrs) and np.array_equal(back.values, qs.values)
    assert back.includes_secret
