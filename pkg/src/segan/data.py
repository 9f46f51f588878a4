"""CSV ingestion, min-max / one-hot encoding, and missingness protocols.

Encoded matrices are ``(d, n)``: one row per encoded feature, one column per
sample. Missing entries hold NaN in the value matrix and 0 in the mask.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DatasetTooSmallError, ParseError, SchemaError, ShapeError

log = logging.getLogger(__name__)

MISSING_TOKENS = frozenset({"", "NA", "NaN"})


@dataclass
class RawTable:
    columns: list  # feature column names, in file order (label excluded)
    rows: list  # list of rows; each cell is a str or None (missing)
    label_column: str | None = None
    labels: list | None = None  # raw label cells (str or None)
    header: list = field(default_factory=list)  # full original header

    @property
    def n(self) -> int:
        return len(self.rows)


@dataclass
class ColumnSchema:
    kinds: list  # "numeric" | "categorical", per feature column
    categories: dict  # column index -> list of category strings (index = code)
    minimums: dict  # column index -> float
    maximums: dict
    columns: list = field(default_factory=list)
    label_classes: list | None = None

    @property
    def n_classes(self) -> int:
        return len(self.label_classes) if self.label_classes else 0

    def blocks(self):
        """Encoded row span ``(start, stop)`` for every source column."""
        spans, start = [], 0
        for j, kind in enumerate(self.kinds):
            width = len(self.categories[j]) if kind == "categorical" else 1
            spans.append((start, start + width))
            start += width
        return spans

    @property
    def d(self) -> int:
        return self.blocks()[-1][1] if self.kinds else 0

    def groups(self) -> np.ndarray:
        """Source-column index of every encoded row."""
        return np.concatenate(
            [np.full(stop - start, j) for j, (start, stop) in enumerate(self.blocks())]
        ).astype(int)

    def to_dict(self) -> dict:
        return {
            "columns": self.columns,
            "kinds": self.kinds,
            "categories": {str(k): v for k, v in self.categories.items()},
            "minimums": {str(k): v for k, v in self.minimums.items()},
            "maximums": {str(k): v for k, v in self.maximums.items()},
            "label_classes": self.label_classes,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ColumnSchema":
        return cls(
            kinds=list(obj["kinds"]),
            categories={int(k): list(v) for k, v in obj["categories"].items()},
            minimums={int(k): float(v) for k, v in obj["minimums"].items()},
            maximums={int(k): float(v) for k, v in obj["maximums"].items()},
            columns=list(obj["columns"]),
            label_classes=obj.get("label_classes"),
        )

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Dataset:
    """Encoded data: values and mask are (d, n); labels use -1 for absent."""

    values: np.ndarray
    mask: np.ndarray
    labels: np.ndarray
    n_classes: int = 0
    groups: np.ndarray | None = None
    fingerprint: str | None = None

    @property
    def d(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def with_mask(self, mask: np.ndarray) -> "Dataset":
        """Copy with a new (sub-)mask; entries it hides become NaN."""
        values = np.where(mask == 1, self.values, np.nan)
        return Dataset(values, mask.astype(float), self.labels.copy(), self.n_classes,
                       self.groups, self.fingerprint)


def _parse_float(cell):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if np.isfinite(v) else None


def load_csv(path, label_column: str | None = None):
    """Read a headered CSV; returns ``(RawTable, ColumnSchema)``.

    Empty cells and the tokens NA/NaN are missing. A column is numeric when
    every present cell parses as a finite float, otherwise categorical.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file, expected a header row") from None
        body = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: line {reader.line_num} has {len(row)} fields, header has {len(header)}"
                )
            body.append([None if c.strip() in MISSING_TOKENS else c for c in row])
    if label_column is not None and label_column not in header:
        raise ConfigError(f"label column {label_column!r} not found in {path}")

    feature_idx = [i for i, name in enumerate(header) if name != label_column]
    rows = [[r[i] for i in feature_idx] for r in body]
    labels = None
    if label_column is not None:
        li = header.index(label_column)
        labels = [r[li] for r in body]
    table = RawTable([header[i] for i in feature_idx], rows, label_column, labels, list(header))
    return table, infer_schema(table)


def infer_schema(table: RawTable) -> ColumnSchema:
    kinds, categories, minimums, maximums = [], {}, {}, {}
    for j in range(len(table.columns)):
        present = [r[j] for r in table.rows if r[j] is not None]
        parsed = [_parse_float(c) for c in present]
        if all(v is not None for v in parsed):
            kinds.append("numeric")
            minimums[j] = min(parsed) if parsed else 0.0
            maximums[j] = max(parsed) if parsed else 0.0
        else:
            kinds.append("categorical")
            categories[j] = sorted(set(present))
    label_classes = None
    if table.labels is not None:
        label_classes = sorted({c for c in table.labels if c is not None}, key=_label_sort_key)
    return ColumnSchema(kinds, categories, minimums, maximums, list(table.columns), label_classes)


def _label_sort_key(value):
    v = _parse_float(value)
    return (0, v, value) if v is not None else (1, 0.0, value)


def encode(table: RawTable, schema: ColumnSchema) -> Dataset:
    """Min-max scale numeric columns, one-hot categorical ones.

    A constant numeric column encodes to zeros. A missing categorical cell
    blanks its whole one-hot block.
    """
    if len(schema.kinds) != len(table.columns):
        raise SchemaError(f"schema has {len(schema.kinds)} columns, table has {len(table.columns)}")
    n = table.n
    values = np.full((schema.d, n), np.nan)
    for j, ((start, stop), kind) in enumerate(zip(schema.blocks(), schema.kinds)):
        if kind == "numeric":
            lo, hi = schema.minimums[j], schema.maximums[j]
            span = hi - lo
            for i, row in enumerate(table.rows):
                if row[j] is None:
                    continue
                v = _parse_float(row[j])
                if v is None:
                    raise SchemaError(f"column {table.columns[j]!r} row {i}: {row[j]!r} is not numeric")
                values[start, i] = (v - lo) / span if span > 0 else 0.0
        else:
            lookup = {c: k for k, c in enumerate(schema.categories[j])}
            for i, row in enumerate(table.rows):
                if row[j] is None:
                    continue
                if row[j] not in lookup:
                    raise SchemaError(f"column {table.columns[j]!r}: unseen category {row[j]!r}")
                values[start:stop, i] = 0.0
                values[start + lookup[row[j]], i] = 1.0
    mask = (~np.isnan(values)).astype(float)

    labels = np.full(n, -1, dtype=int)
    if table.labels is not None and schema.label_classes:
        lookup = {c: k for k, c in enumerate(schema.label_classes)}
        for i, c in enumerate(table.labels):
            if c is not None:
                if c not in lookup:
                    raise SchemaError(f"unseen label {c!r}")
                labels[i] = lookup[c]
    return Dataset(values, mask, labels, schema.n_classes, schema.groups(), schema.fingerprint())


def _format_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def decode(values: np.ndarray, schema: ColumnSchema):
    """Map an encoded (d, n) matrix back to raw cells (list of rows).

    Numeric cells are returned as floats, categorical ones as strings.
    """
    if values.shape[0] != schema.d:
        raise ShapeError(f"matrix has {values.shape[0]} rows, schema expects {schema.d}")
    rows = [[None] * len(schema.kinds) for _ in range(values.shape[1])]
    for j, ((start, stop), kind) in enumerate(zip(schema.blocks(), schema.kinds)):
        if kind == "numeric":
            lo, hi = schema.minimums[j], schema.maximums[j]
            col = lo + values[start] * (hi - lo)
            for i, v in enumerate(col):
                rows[i][j] = float(v)
        else:
            codes = np.argmax(values[start:stop], axis=0)
            for i, k in enumerate(codes):
                rows[i][j] = schema.categories[j][k]
    return rows


def write_csv(path, table: RawTable, imputed_rows, labels=None):
    """Write ``imputed_rows`` in the input's column order.

    Observed cells keep their original text; imputed numeric cells use
    ``repr`` formatting. ``labels`` overrides the label column when given.
    """
    label_cells = labels if labels is not None else table.labels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table.header)
        for i, raw in enumerate(table.rows):
            feature_iter = iter(
                raw[j] if raw[j] is not None else _as_cell(imputed_rows[i][j])
                for j in range(len(raw))
            )
            out = []
            for name in table.header:
                if name == table.label_column:
                    cell = label_cells[i]
                    out.append("" if cell is None else cell)
                else:
                    out.append(next(feature_iter))
            writer.writerow(out)


def _as_cell(v):
    return v if isinstance(v, str) else _format_number(v)


def _check_rate(name, rate, low_open=True, high_open=True):
    lo_ok = rate > 0 if low_open else rate >= 0
    hi_ok = rate < 1 if high_open else rate <= 1
    if not (lo_ok and hi_ok):
        raise ConfigError(f"{name} out of range: {rate}")


def _group_mask(mask, groups):
    """Per-(group, sample) view: a group counts as observed if any of its rows is."""
    if groups is None:
        return mask.astype(bool), None
    uniq, inverse = np.unique(groups, return_inverse=True)
    gm = np.zeros((len(uniq), mask.shape[1]), dtype=bool)
    for g in range(len(uniq)):
        gm[g] = mask[inverse == g].max(axis=0) > 0
    return gm, inverse


def _expand(group_matrix, inverse):
    return group_matrix if inverse is None else group_matrix[inverse]


def inject_mcar(dataset: Dataset, rate: float, rng: np.random.Generator,
                groups: np.ndarray | None = None) -> Dataset:
    """Delete every observed entry independently with probability ``rate``.

    With ``groups`` (encoded row -> source column) whole one-hot blocks are
    deleted together.
    """
    _check_rate("missing rate", rate)
    observed, inverse = _group_mask(dataset.mask, groups)
    delete = (rng.random(observed.shape) < rate) & observed
    new_mask = dataset.mask * (~_expand(delete, inverse))
    return dataset.with_mask(new_mask)


def holdout_known(mask: np.ndarray, fraction: float, rng: np.random.Generator,
                  groups: np.ndarray | None = None):
    """Hide a uniformly random ``fraction`` of the observed entries.

    Returns ``(training_mask, holdout)`` where ``holdout`` is a boolean (d, n)
    matrix marking the hidden entries.
    """
    _check_rate("holdout fraction", fraction)
    observed, inverse = _group_mask(mask, groups)
    flat = np.flatnonzero(observed)
    if flat.size < 1:
        raise DatasetTooSmallError("no observed entries to hold out")
    k = int(round(fraction * flat.size))
    chosen = np.zeros(observed.size, dtype=bool)
    chosen[rng.choice(flat, size=k, replace=False)] = True
    hidden = _expand(chosen.reshape(observed.shape), inverse) & (mask > 0)
    return mask * (~hidden), hidden


def mask_labels(labels: np.ndarray, label_rate: float, rng: np.random.Generator) -> np.ndarray:
    """Remove a uniformly random (1 - label_rate) share of the labels."""
    if not 0 < label_rate <= 1:
        raise ConfigError(f"label rate must lie in (0, 1], got {label_rate}")
    out = labels.copy()
    present = np.flatnonzero(labels >= 0)
    drop = int(round((1.0 - label_rate) * present.size))
    if drop:
        out[rng.choice(present, size=drop, replace=False)] = -1
    return out
