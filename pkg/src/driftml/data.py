"""Typed tabular data model, CSV ingestion and sequential batch splitting.

Values are held in a dense float64 matrix. Numeric cells hold the parsed
value, categorical cells hold the level index within the feature's declared
level list. Two sentinel encodings exist:

* missing cell           -> NaN          (``?`` or empty cell in CSV)
* unseen categorical     -> ``UNSEEN``   (-1.0; value-at-predict-time not in
                                          the schema's level list)

Labels are class indices; ``-1`` marks an unlabeled instance. All containers
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

MISSING = float("nan")
UNSEEN = -1.0

_MISSING_TOKENS = ("", "?")


class DataError(Exception):
    """Raised for malformed files, schema violations and bad split arguments."""


@dataclass(frozen=True)
class Feature:
    """One column: ``levels`` is None for numeric, an ordered tuple otherwise."""

    name: str
    levels: Optional[tuple[str, ...]] = None

    @property
    def is_categorical(self) -> bool:
        return self.levels is not None


@dataclass(frozen=True)
class Schema:
    features: tuple[Feature, ...]
    label_name: str
    classes: tuple[str, ...]

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise DataError("duplicate feature names in schema")
        if len(self.classes) < 2:
            raise DataError("schema needs at least 2 classes")
        if len(set(self.classes)) != len(self.classes):
            raise DataError("duplicate class names in schema")
        for f in self.features:
            if f.levels is not None:
                if len(f.levels) == 0:
                    raise DataError(f"categorical feature {f.name!r} has no levels")
                if len(set(f.levels)) != len(f.levels):
                    raise DataError(f"duplicate levels in feature {f.name!r}")

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def compatible_with(self, other: "Schema") -> bool:
        """Feature count and per-column kind match (names may differ)."""
        if self.n_features != other.n_features or self.n_classes != other.n_classes:
            return False
        return all(
            a.is_categorical == b.is_categorical
            for a, b in zip(self.features, other.features)
        )


@dataclass(frozen=True)
class Instance:
    """One row; ``values`` aligned to the schema features, label index or None."""

    values: tuple[float, ...]
    label: Optional[int] = None


class Batch:
    """An ordered block of instances sharing one schema.

    Arrival order is preserved exactly (the drift detector consumes
    correctness in this order). The backing arrays are read-only.
    """

    __slots__ = ("schema", "X", "y", "index")

    def __init__(self, schema: Schema, X: np.ndarray, y: np.ndarray, index: int = 0):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if X.ndim != 2 or X.shape[1] != schema.n_features:
            raise DataError(
                f"value matrix has shape {X.shape}, schema expects "
                f"{schema.n_features} features"
            )
        if y.shape != (X.shape[0],):
            raise DataError("label vector length does not match instance count")
        if y.size and (y.max(initial=-1) >= schema.n_classes or y.min(initial=0) < -1):
            raise DataError("label index outside schema classes")
        X = X.copy()
        y = y.copy()
        X.setflags(write=False)
        y.setflags(write=False)
        self.schema = schema
        self.X = X
        self.y = y
        self.index = int(index)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_labeled(self) -> int:
        return int((self.y >= 0).sum())

    @property
    def fully_labeled(self) -> bool:
        return bool((self.y >= 0).all())

    def instance(self, i: int) -> Instance:
        label = int(self.y[i])
        return Instance(tuple(self.X[i]), None if label < 0 else label)

    def instances(self) -> Iterable[Instance]:
        return (self.instance(i) for i in range(len(self)))

    def with_index(self, index: int) -> "Batch":
        return Batch(self.schema, self.X, self.y, index)

    @staticmethod
    def from_instances(schema: Schema, rows: Sequence[Instance], index: int = 0) -> "Batch":
        X = np.array([r.values for r in rows], dtype=np.float64).reshape(
            len(rows), schema.n_features
        )
        y = np.array([-1 if r.label is None else r.label for r in rows], dtype=np.int64)
        return Batch(schema, X, y, index)


def _parse_numeric(token: str) -> Optional[float]:
    try:
        v = float(token)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _infer_schema(header: list[str], rows: list[list[str]], label_column: str) -> Schema:
    label_pos = header.index(label_column)
    features = []
    for j, name in enumerate(header):
        if j == label_pos:
            continue
        cells = [r[j] for r in rows if r[j] not in _MISSING_TOKENS]
        if cells and all(_parse_numeric(c) is not None for c in cells):
            features.append(Feature(name))
        else:
            features.append(Feature(name, tuple(sorted(set(cells)))))
    labels = sorted({r[label_pos] for r in rows if r[label_pos] not in _MISSING_TOKENS})
    if len(labels) < 2:
        raise DataError(f"label column {label_column!r} holds fewer than 2 classes")
    return Schema(tuple(features), label_column, tuple(labels))


def load_csv(
    path: str,
    label_column: str,
    schema_hint: Optional[Schema] = None,
) -> tuple[Schema, Batch]:
    """Load a whole CSV file (UTF-8, header row, comma separated) as one Batch.

    ``?`` or an empty cell is missing. Without a schema hint, a column whose
    every non-missing cell parses as a number is numeric, anything else is
    categorical with lexicographically ordered levels; classes are likewise
    ordered. With a hint, unseen categorical values map to the reserved
    ``UNSEEN`` marker, but label values outside the declared classes are an
    error (the class set is fixed by the initial training schema).
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError(f"{path}: empty file") from None
            rows = list(reader)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc

    header = [h.strip() for h in header]
    if label_column not in header:
        raise DataError(f"{path}: label column {label_column!r} not in header {header}")
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(header)
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 2} has {len(row)} cells, expected {width}")

    schema = schema_hint if schema_hint is not None else _infer_schema(header, rows, label_column)
    label_pos = header.index(label_column)
    feat_pos = [j for j in range(width) if j != label_pos]
    if len(feat_pos) != schema.n_features:
        raise DataError(
            f"{path}: {len(feat_pos)} feature columns, schema expects {schema.n_features}"
        )

    level_maps = [
        {lv: float(i) for i, lv in enumerate(f.levels)} if f.levels is not None else None
        for f in schema.features
    ]
    class_map = {c: i for i, c in enumerate(schema.classes)}

    X = np.empty((len(rows), schema.n_features), dtype=np.float64)
    y = np.empty(len(rows), dtype=np.int64)
    for i, row in enumerate(rows):
        for k, j in enumerate(feat_pos):
            cell = row[j]
            if cell in _MISSING_TOKENS:
                X[i, k] = MISSING
            elif level_maps[k] is None:
                v = _parse_numeric(cell)
                if v is None:
                    raise DataError(
                        f"{path}: row {i + 2}: {cell!r} is not numeric "
                        f"(column {schema.features[k].name!r})"
                    )
                X[i, k] = v
            else:
                X[i, k] = level_maps[k].get(cell, UNSEEN)
        cell = row[label_pos]
        if cell in _MISSING_TOKENS:
            y[i] = -1
        elif cell in class_map:
            y[i] = class_map[cell]
        else:
            raise DataError(f"{path}: row {i + 2}: unknown class {cell!r}")
    return schema, Batch(schema, X, y, index=0)


def write_csv(batch: Batch, path: str) -> None:
    """Emit a batch in the load_csv format (missing and unlabeled become ``?``)."""
    schema = batch.schema
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f.name for f in schema.features] + [schema.label_name])
        for i in range(len(batch)):
            row = []
            for k, f in enumerate(schema.features):
                v = batch.X[i, k]
                if math.isnan(v):
                    row.append("?")
                elif f.levels is not None:
                    row.append("?" if v == UNSEEN else f.levels[int(v)])
                else:
                    row.append(repr(float(v)))
            label = int(batch.y[i])
            row.append("?" if label < 0 else schema.classes[label])
            writer.writerow(row)


def split_stream(data: Batch, batch_size: int) -> list[Batch]:
    """Cut a batch into ceil(N / batch_size) consecutive batches.

    All but the last have exactly ``batch_size`` instances; concatenating the
    result reproduces the input sequence.
    """
    if batch_size < 1:
        raise DataError("batch_size must be >= 1")
    out = []
    for i, start in enumerate(range(0, len(data), batch_size)):
        stop = min(start + batch_size, len(data))
        out.append(Batch(data.schema, data.X[start:stop], data.y[start:stop], index=i))
    return out


def concat_batches(batches: Sequence[Batch], index: int = 0) -> Batch:
    """Concatenate batches (same schema) preserving order."""
    if not batches:
        raise DataError("cannot concatenate zero batches")
    schema = batches[0].schema
    for b in batches[1:]:
        if b.schema is not schema and b.schema != schema:
            raise DataError("cannot concatenate batches with differing schemas")
    X = np.concatenate([b.X for b in batches], axis=0)
    y = np.concatenate([b.y for b in batches], axis=0)
    return Batch(schema, X, y, index)
