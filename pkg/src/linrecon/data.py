"""Discrete tabular datasets with a binary secret attribute.

Rows are stored as integer category indices. The schema fixes the label order
of every attribute, so the label <-> index encoding is a bijection, and the
secret attribute always sits in the last column once the schema is
canonicalized.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np


class DataError(ValueError):
    """Base class for ingestion and schema problems."""


class SchemaError(DataError):
    pass


class UnknownColumn(DataError):
    def __init__(self, column: str, detail: str = "not present in schema"):
        super().__init__(f"column {column!r}: {detail}")
        self.column = column


class UnknownLabel(DataError):
    def __init__(self, row: int, column: str, value: str):
        super().__init__(f"row {row}, column {column!r}: label {value!r} is not in the schema")
        self.row = row
        self.column = column
        self.value = value


class RaggedRow(DataError):
    def __init__(self, row: int, expected: int, got: int):
        super().__init__(f"row {row}: expected {expected} fields, got {got}")
        self.row = row


class SampleTooLarge(DataError):
    pass


@dataclass(frozen=True)
class AttributeDomain:
    name: str
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(v) for v in self.labels))
        if len(self.labels) < 1:
            raise SchemaError(f"attribute {self.name!r} has no labels")
        if len(set(self.labels)) != len(self.labels):
            raise SchemaError(f"attribute {self.name!r} has duplicate labels")

    @property
    def cardinality(self) -> int:
        return len(self.labels)


@dataclass(frozen=True)
class DomainSchema:
    """Ordered attribute domains; ``secret_index`` marks the binary secret."""

    attributes: tuple[AttributeDomain, ...]
    secret_index: int

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        d = len(self.attributes)
        if d < 2:
            raise SchemaError("a schema needs at least one quasi-identifier and the secret")
        if not 0 <= self.secret_index < d:
            raise SchemaError(f"secret index {self.secret_index} out of range")
        if self.attributes[self.secret_index].cardinality != 2:
            raise SchemaError("the secret attribute must have exactly two labels")
        names = [a.name for a in self.attributes]
        if len(set(names)) != d:
            raise SchemaError("attribute names must be distinct")

    @classmethod
    def from_cardinalities(cls, cards: Sequence[int], names: Sequence[str] | None = None) -> "DomainSchema":
        """Schema with labels ``"0".."c-1"``; the last attribute is the secret."""
        if names is None:
            names = [f"a{i}" for i in range(len(cards) - 1)] + ["secret"]
        attrs = tuple(AttributeDomain(nm, tuple(str(v) for v in range(c))) for nm, c in zip(names, cards))
        return cls(attrs, len(attrs) - 1)

    @classmethod
    def from_json(cls, obj: dict) -> "DomainSchema":
        try:
            attrs = tuple(AttributeDomain(a["name"], tuple(a["labels"])) for a in obj["attributes"])
            secret = obj["secret"]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from None
        names = [a.name for a in attrs]
        if secret not in names:
            raise SchemaError(f"secret attribute {secret!r} is not among the attributes")
        return cls(attrs, names.index(secret)).canonical()

    def to_json(self) -> dict:
        return {
            "attributes": [{"name": a.name, "labels": list(a.labels)} for a in self.attributes],
            "secret": self.secret.name,
        }

    @property
    def d(self) -> int:
        return len(self.attributes)

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(a.cardinality for a in self.attributes)

    @property
    def secret(self) -> AttributeDomain:
        return self.attributes[self.secret_index]

    @property
    def is_canonical(self) -> bool:
        return self.secret_index == self.d - 1

    def canonical(self) -> "DomainSchema":
        if self.is_canonical:
            return self
        order = self.canonical_order()
        return DomainSchema(tuple(self.attributes[i] for i in order), self.d - 1)

    def canonical_order(self) -> list[int]:
        return [i for i in range(self.d) if i != self.secret_index] + [self.secret_index]

    def qi_attributes(self) -> tuple[AttributeDomain, ...]:
        return tuple(a for i, a in enumerate(self.attributes) if i != self.secret_index)


def load_schema(path: str | Path) -> DomainSchema:
    with open(path, encoding="utf-8") as fh:
        return DomainSchema.from_json(json.load(fh))


def save_schema(schema: DomainSchema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_json(), fh, indent=2)


def _index_dtype(cards: Sequence[int]) -> np.dtype:
    return np.dtype(np.min_scalar_type(max(cards) - 1)) if max(cards) <= 65536 else np.dtype(np.int64)


def row_keys(rows: np.ndarray, cards: Sequence[int]) -> np.ndarray:
    """Integer id per row such that equal rows share an id and distinct rows do not.

    Uses a mixed-radix code when the domain fits in int64, otherwise falls
    back to lexicographic ``np.unique`` ids.
    """
    rows = np.asarray(rows)
    if rows.shape[1] == 0:
        return np.zeros(len(rows), dtype=np.int64)
    if float(np.prod([float(c) for c in cards])) < 2.0**62:
        key = np.zeros(len(rows), dtype=np.int64)
        for j, c in enumerate(cards):
            key *= int(c)
            key += rows[:, j]
        return key
    _, inv = np.unique(rows, axis=0, return_inverse=True)
    return inv.reshape(-1).astype(np.int64)


class Dataset:
    """A multiset of ``n`` records over a canonical schema (secret last).

    ``rows`` is an ``n x d`` array of category indices and is made read-only
    so datasets can be shared freely between callers.
    """

    def __init__(self, schema: DomainSchema, rows, validate: bool = True):
        if not schema.is_canonical:
            raise SchemaError("datasets require a canonical schema (secret last)")
        rows = np.asarray(rows)
        if rows.ndim != 2 or rows.shape[1] != schema.d:
            raise DataError(f"rows must have shape (n, {schema.d}), got {rows.shape}")
        if rows.shape[0] < 1:
            raise DataError("a dataset needs at least one row")
        if validate:
            if rows.dtype.kind not in "iub":
                raise DataError("rows must hold integer category indices")
            bad = (rows < 0) | (rows >= np.asarray(schema.cardinalities))
            if bad.any():
                i, j = map(int, np.argwhere(bad)[0])
                raise DataError(f"cell ({i}, {j}) = {rows[i, j]} outside domain of {schema.names[j]!r}")
        self.schema = schema
        self.rows = np.ascontiguousarray(rows, dtype=_index_dtype(schema.cardinalities))
        self.rows.setflags(write=False)
        self._compressed = None

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, d={self.d})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.rows, other.rows)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.schema.d

    @property
    def secret(self) -> np.ndarray:
        return self.rows[:, -1]

    def with_rows(self, rows) -> "Dataset":
        return Dataset(self.schema, rows, validate=False)

    def compressed(self) -> tuple[np.ndarray, np.ndarray]:
        """Distinct rows and their multiplicities (cached).

        Marginal evaluation on large synthetic datasets runs on this form.
        """
        if self._compressed is None:
            keys = row_keys(self.rows, self.schema.cardinalities)
            _, first, counts = np.unique(keys, return_index=True, return_counts=True)
            self._compressed = (self.rows[first], counts.astype(np.int64))
        return self._compressed


@dataclass(frozen=True, eq=False)
class QuasiIdentifierTable:
    """The non-secret columns of a dataset, row-aligned with their source."""

    attributes: tuple[AttributeDomain, ...]
    rows: np.ndarray

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def cardinalities(self) -> tuple[int, ...]:
        return tuple(a.cardinality for a in self.attributes)

    def __len__(self) -> int:
        return self.n

    def find(self, x_u) -> int:
        """Index of the first row equal to ``x_u``; -1 if absent."""
        hit = np.nonzero((self.rows == np.asarray(x_u)).all(axis=1))[0]
        return int(hit[0]) if len(hit) else -1


def split_secret(d: Dataset) -> tuple[QuasiIdentifierTable, np.ndarray]:
    x = QuasiIdentifierTable(d.schema.qi_attributes(), d.rows[:, :-1])
    return x, np.asarray(d.rows[:, -1], dtype=np.int64)


def join_secret(x: QuasiIdentifierTable, y, schema: DomainSchema) -> Dataset:
    y = np.asarray(y).reshape(-1, 1)
    return Dataset(schema, np.hstack([x.rows.astype(np.int64), y.astype(np.int64)]))


def unique_qi_indices(x: QuasiIdentifierTable) -> list[int]:
    """Rows whose quasi-identifier tuple occurs exactly once, ascending."""
    keys = row_keys(x.rows, x.cardinalities)
    _, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
    return np.nonzero(counts[inv.reshape(-1)] == 1)[0].tolist()


def subsample(d: Dataset, n: int, rng: np.random.Generator) -> Dataset:
    if n > d.n:
        raise SampleTooLarge(f"cannot draw {n} rows without replacement from {d.n}")
    if n < 1:
        raise DataError("sample size must be positive")
    idx = rng.choice(d.n, size=n, replace=False)
    return d.with_rows(d.rows[idx])


def _schema_from(schema) -> DomainSchema:
    if isinstance(schema, DomainSchema):
        return schema.canonical()
    return load_schema(schema)


def load_csv(path: str | Path, schema_path) -> Dataset:
    """Read a labelled CSV and encode it against the schema.

    ``schema_path`` may also be a :class:`DomainSchema`. Columns may appear in
    any order; the result is in canonical schema order.
    """
    schema = _schema_from(schema_path)
    lookup = [{lab: i for i, lab in enumerate(a.labels)} for a in schema.attributes]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        pos = {}
        for j, col in enumerate(header):
            if col not in schema.names:
                raise UnknownColumn(col)
            if col in pos:
                raise UnknownColumn(col, "duplicated in header")
            pos[col] = j
        for name in schema.names:
            if name not in pos:
                raise UnknownColumn(name, "missing from CSV header")
        order = [pos[name] for name in schema.names]
        out = []
        for i, rec in enumerate(reader):
            if len(rec) != len(header):
                raise RaggedRow(i, len(header), len(rec))
            enc = []
            for j, src in enumerate(order):
                try:
                    enc.append(lookup[j][rec[src]])
                except KeyError:
                    raise UnknownLabel(i, schema.names[j], rec[src]) from None
            out.append(enc)
    if not out:
        raise DataError(f"{path}: no data rows")
    return Dataset(schema, np.asarray(out, dtype=np.int64))


def write_csv(d: Dataset, path: str | Path) -> None:
    labels = [a.labels for a in d.schema.attributes]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(d.schema.names)
        for row in d.rows:
            w.writerow([labels[j][v] for j, v in enumerate(row)])
