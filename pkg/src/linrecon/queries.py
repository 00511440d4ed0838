"""k-way marginal queries: enumeration, sampling and exact evaluation.

A query is a pair (attribute subset, value assignment). Its answer on a
dataset is the fraction (or count) of rows agreeing with the assignment on
every attribute of the subset. Evaluation always counts integers first and
divides once.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .data import Dataset, DomainSchema, QuasiIdentifierTable


class QueryError(ValueError):
    pass


class KTooLarge(QueryError):
    pass


class SecretAbsent(QueryError):
    pass


@dataclass(frozen=True)
class MarginalQuery:
    attrs: tuple[int, ...]
    values: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "attrs", tuple(int(a) for a in self.attrs))
        object.__setattr__(self, "values", tuple(int(v) for v in self.values))
        if len(self.attrs) != len(self.values):
            raise QueryError("attrs and values must align")
        if len(self.attrs) < 1:
            raise QueryError("a marginal query needs at least one attribute")
        if any(b <= a for a, b in zip(self.attrs, self.attrs[1:])):
            raise QueryError(f"attrs must be strictly increasing: {self.attrs}")

    @property
    def k(self) -> int:
        return len(self.attrs)

    def check(self, cards: Sequence[int]) -> None:
        for a, v in zip(self.attrs, self.values):
            if not 0 <= a < len(cards) or not 0 <= v < cards[a]:
                raise QueryError(f"query {self} invalid for cardinalities {tuple(cards)}")

    def to_json(self) -> dict:
        return {"attrs": list(self.attrs), "values": list(self.values)}


class QuerySet:
    """A homogeneous batch of k-way queries held as two ``q x k`` arrays."""

    def __init__(self, attrs, values, includes_secret: bool = False, secret_index: int | None = None):
        attrs = np.asarray(attrs, dtype=np.int64)
        values = np.asarray(values, dtype=np.int64)
        if attrs.ndim != 2 or attrs.shape != values.shape:
            raise QueryError("attrs and values must be equal-shaped 2-d arrays")
        if attrs.shape[1] >= 2 and (np.diff(attrs, axis=1) <= 0).any():
            raise QueryError("attrs rows must be strictly increasing")
        if includes_secret:
            if secret_index is None:
                raise QueryError("secret_index is required when includes_secret is set")
            if len(attrs) and not (attrs == secret_index).any(axis=1).all():
                raise QueryError("every query must contain the secret attribute")
        self.attrs = attrs
        self.values = values
        self.includes_secret = includes_secret
        self.secret_index = secret_index

    @classmethod
    def from_queries(cls, queries: Sequence[MarginalQuery], **kw) -> "QuerySet":
        if not queries:
            raise QueryError("empty query list")
        return cls([q.attrs for q in queries], [q.values for q in queries], **kw)

    @property
    def k(self) -> int:
        return self.attrs.shape[1]

    def __len__(self) -> int:
        return self.attrs.shape[0]

    def __getitem__(self, i) -> MarginalQuery | "QuerySet":
        if isinstance(i, (int, np.integer)):
            return MarginalQuery(tuple(self.attrs[i]), tuple(self.values[i]))
        return QuerySet(self.attrs[i], self.values[i], self.includes_secret, self.secret_index)

    def __iter__(self) -> Iterator[MarginalQuery]:
        for a, v in zip(self.attrs, self.values):
            yield MarginalQuery(tuple(a), tuple(v))

    def groups(self) -> Iterator[tuple[tuple[int, ...], np.ndarray]]:
        """Yield (attribute subset, positions of queries over that subset)."""
        if not len(self):
            return
        uniq, inv = np.unique(self.attrs, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
        for g, attrs in enumerate(uniq):
            yield tuple(int(a) for a in attrs), order[bounds[g]:bounds[g + 1]]


def marginal_table(d: Dataset | QuasiIdentifierTable, attrs: Sequence[int]) -> np.ndarray:
    """Exact contingency counts of ``d`` over ``attrs`` (int64, one axis per attribute)."""
    if isinstance(d, Dataset):
        rows, weights = d.compressed()
        cards = d.schema.cardinalities
    else:
        rows, weights = d.rows, None
        cards = d.cardinalities
    shape = tuple(cards[a] for a in attrs)
    if not attrs:
        total = len(rows) if weights is None else int(weights.sum())
        return np.array(total, dtype=np.int64)
    flat = np.ravel_multi_index(tuple(rows[:, a].astype(np.int64) for a in attrs), shape)
    counts = np.bincount(flat, weights=weights, minlength=int(np.prod(shape)))
    return np.rint(counts).astype(np.int64).reshape(shape)


def _cards(d) -> tuple[int, ...]:
    return d.schema.cardinalities if isinstance(d, Dataset) else d.cardinalities


def eval_count(q: MarginalQuery, d: Dataset) -> int:
    q.check(_cards(d))
    rows = d.rows
    match = np.ones(len(rows), dtype=bool)
    for a, v in zip(q.attrs, q.values):
        match &= rows[:, a] == v
    return int(match.sum())


def eval_fraction(q: MarginalQuery, d: Dataset) -> float:
    return eval_count(q, d) / d.n


def evaluate_counts(qs: QuerySet, d: Dataset | QuasiIdentifierTable) -> np.ndarray:
    """Vectorised counts for every query of ``qs`` (one contingency table per subset)."""
    out = np.zeros(len(qs), dtype=np.int64)
    cards = _cards(d)
    for attrs, pos in qs.groups():
        table = marginal_table(d, attrs)
        shape = tuple(cards[a] for a in attrs)
        out[pos] = table.reshape(-1)[np.ravel_multi_index(tuple(qs.values[pos].T), shape)]
    return out


def evaluate_fractions(qs: QuerySet, d: Dataset | QuasiIdentifierTable) -> np.ndarray:
    return evaluate_counts(qs, d) / d.n


def enumerate_secret_queries(schema: DomainSchema, k: int) -> QuerySet:
    """Every k-way query whose subset contains the secret, over all value cells.

    Order: (k-1)-subsets of quasi-identifiers lexicographically, then QI cells
    in row-major order, then secret value 0 before 1.
    """
    d = schema.d
    if k > d:
        raise KTooLarge(f"k={k} exceeds the number of attributes d={d}")
    if k < 2:
        raise QueryError("secret-containing queries need k >= 2")
    cards = schema.cardinalities
    s = schema.secret_index
    attrs_out, values_out = [], []
    for sub in itertools.combinations(range(d - 1), k - 1):
        cells = np.indices(tuple(cards[a] for a in sub)).reshape(k - 1, -1).T
        c = len(cells)
        vals = np.empty((2 * c, k), dtype=np.int64)
        vals[:, :-1] = np.repeat(cells, 2, axis=0)
        vals[:, -1] = np.tile([0, 1], c)
        attrs_out.append(np.tile(np.array(sub + (s,)), (2 * c, 1)))
        values_out.append(vals)
    return QuerySet(np.concatenate(attrs_out), np.concatenate(values_out), includes_secret=True, secret_index=s)


def count_secret_queries(schema: DomainSchema, k: int) -> int:
    cards = schema.cardinalities[:-1]
    return sum(2 * int(np.prod([cards[a] for a in sub])) for sub in itertools.combinations(range(len(cards)), k - 1))


def drop_secret(q: MarginalQuery, secret_index: int) -> MarginalQuery:
    if secret_index not in q.attrs:
        raise SecretAbsent(f"query {q} does not involve attribute {secret_index}")
    if q.k == 1:
        raise QueryError("dropping the secret from a 1-way query leaves nothing")
    keep = [i for i, a in enumerate(q.attrs) if a != secret_index]
    return MarginalQuery(tuple(q.attrs[i] for i in keep), tuple(q.values[i] for i in keep))


def conditional_answer(q: MarginalQuery, s: Dataset, x: QuasiIdentifierTable) -> float | None:
    """Rescale the synthetic answer by the adversary's exact parent marginal.

    Returns ``(Q(S) / Q-(S)) * Q-(X)``, or ``None`` when the parent query has
    no support in ``s`` (the answer is undefined).
    """
    parent = drop_secret(q, s.schema.secret_index)
    parent_s = eval_count(parent, s)
    if parent_s == 0:
        return None
    rows = x.rows
    match = np.ones(len(rows), dtype=bool)
    for a, v in zip(parent.attrs, parent.values):
        match &= rows[:, a] == v
    return eval_count(q, s) / parent_s * (int(match.sum()) / x.n)


def sample_queries(qs: QuerySet, count: int, rng: np.random.Generator) -> QuerySet:
    """Uniform subset without replacement; ``count >= len(qs)`` permutes everything."""
    idx = rng.choice(len(qs), size=min(int(count), len(qs)), replace=False)
    return qs[idx]


def write_queries_jsonl(qs: QuerySet, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in qs:
            fh.write(json.dumps(q.to_json()) + "\n")


def read_queries_jsonl(path: str | Path, secret_index: int | None = None) -> QuerySet:
    attrs, values = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                attrs.append(obj["attrs"])
                values.append(obj["values"])
    inc = secret_index is not None and all(secret_index in a for a in attrs)
    return QuerySet(attrs, values, includes_secret=inc, secret_index=secret_index)
