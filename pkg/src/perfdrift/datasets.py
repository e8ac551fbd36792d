"""CSV ingestion and normalization for semi-synthetic streams.

Categorical columns are dropped; numeric columns are min-max scaled to
[-1, 1] when they contain negative values and to [0, 1] otherwise, matching
the declared feature ranges the generator and detector expect.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .stream_model import FeatureRange, Instance, StreamSchema, make_stream_schema

MISSING_TOKENS = {"", "na", "nan", "null", "none", "?"}


class DatasetError(ValueError):
    """Unusable input file: missing columns, bad labels, nothing numeric."""


@dataclass
class RawDataset:
    """Parsed CSV: rows of raw feature strings plus a binary label."""

    name: str
    columns: list[str]
    kinds: list[str]  # "numeric" | "categorical" per column
    rows: list[list[str]]
    labels: np.ndarray
    dropped_label_rows: int = 0

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class ColumnReport:
    name: str
    dropped: bool
    minimum: float | None = None
    maximum: float | None = None
    target: tuple[float, float] | None = None


@dataclass
class NormalizationReport:
    columns: list[ColumnReport] = field(default_factory=list)
    dropped_rows: int = 0  # rows lost to missing numeric values

    def kept_columns(self) -> list[ColumnReport]:
        return [c for c in self.columns if not c.dropped]


@dataclass
class NormalizedDataset:
    """Normalization output: dense features, labels, schema and the report."""

    name: str
    feature_names: list[str]
    features: np.ndarray
    labels: np.ndarray
    schema: StreamSchema
    report: NormalizationReport

    def instances(self) -> list[Instance]:
        return [Instance(tuple(row), int(lab)) for row, lab in zip(self.features, self.labels)]


def _is_missing(token: str) -> bool:
    return token.strip().lower() in MISSING_TOKENS


def _parse_numeric(token: str) -> float | None:
    try:
        return float(token)
    except ValueError:
        return None


def load_csv(path, label_column: str, positive_label_value: str) -> RawDataset:
    """Parse a headed CSV into rows plus {0,1} labels.

    The label column must hold exactly two distinct values, one of them
    ``positive_label_value`` (which maps to 1). Column kinds are inferred:
    a column is numeric when every non-missing value parses as a float.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetError(f"{path} is empty") from None
        if label_column not in header:
            raise DatasetError(f"label column {label_column!r} not in {path} header")
        label_idx = header.index(label_column)
        feature_cols = [c for i, c in enumerate(header) if i != label_idx]

        rows: list[list[str]] = []
        label_tokens: list[str] = []
        dropped_label = 0
        for line in reader:
            if not line or all(_is_missing(v) for v in line):
                continue
            if len(line) != len(header):
                raise DatasetError(f"{path}: row with {len(line)} fields, expected {len(header)}")
            token = line[label_idx].strip()
            if _is_missing(token):
                dropped_label += 1
                continue
            label_tokens.append(token)
            rows.append([v for i, v in enumerate(line) if i != label_idx])

    if not rows:
        raise DatasetError(f"{path} holds no usable rows")
    distinct = sorted(set(label_tokens))
    if len(distinct) != 2:
        raise DatasetError(
            f"{path}: binary labels required, found {len(distinct)} distinct values {distinct[:5]}")
    if positive_label_value not in distinct:
        raise DatasetError(
            f"{path}: positive label {positive_label_value!r} not among {distinct}")
    labels = np.array([1 if t == positive_label_value else 0 for t in label_tokens], dtype=np.int8)

    kinds = []
    for col in range(len(feature_cols)):
        numeric = all(
            _is_missing(row[col]) or _parse_numeric(row[col]) is not None for row in rows
        )
        kinds.append("numeric" if numeric else "categorical")
    return RawDataset(name=path.stem, columns=feature_cols, kinds=kinds, rows=rows,
                      labels=labels, dropped_label_rows=dropped_label)


def normalize(dataset: RawDataset) -> NormalizedDataset:
    """Drop categorical columns, min-max scale numeric ones, drop gappy rows.

    Scaling target per column: [-1, 1] when the observed minimum is negative,
    else [0, 1]. Constant columns map to 0.5 (inside either target, and stable
    under repeated normalization).
    """
    keep_idx = [i for i, kind in enumerate(dataset.kinds) if kind == "numeric"]
    if not keep_idx:
        raise DatasetError(f"{dataset.name}: no numeric feature columns survive")

    parsed = np.full((len(dataset.rows), len(keep_idx)), np.nan, dtype=np.float64)
    for r, row in enumerate(dataset.rows):
        for j, col in enumerate(keep_idx):
            token = row[col]
            if not _is_missing(token):
                value = _parse_numeric(token)
                if value is not None and np.isfinite(value):
                    parsed[r, j] = value

    complete = ~np.isnan(parsed).any(axis=1)
    report = NormalizationReport(dropped_rows=int(len(parsed) - complete.sum()))
    feats = parsed[complete]
    labels = dataset.labels[complete]
    if len(feats) == 0:
        raise DatasetError(f"{dataset.name}: every row has missing numeric values")

    ranges: list[FeatureRange] = []
    kept_names: list[str] = []
    out = np.empty_like(feats)
    kept_j = 0
    for i, (name, kind) in enumerate(zip(dataset.columns, dataset.kinds)):
        if kind != "numeric":
            report.columns.append(ColumnReport(name=name, dropped=True))
            continue
        col = feats[:, kept_j]
        lo, hi = float(col.min()), float(col.max())
        target = (-1.0, 1.0) if lo < 0.0 else (0.0, 1.0)
        if hi == lo:
            out[:, kept_j] = 0.5
        else:
            scale = (target[1] - target[0]) / (hi - lo)
            out[:, kept_j] = target[0] + (col - lo) * scale
        report.columns.append(ColumnReport(name=name, dropped=False, minimum=lo,
                                           maximum=hi, target=target))
        ranges.append(FeatureRange(*target))
        kept_names.append(name)
        kept_j += 1

    np.clip(out, [r.low for r in ranges], [r.high for r in ranges], out=out)
    schema = make_stream_schema(len(ranges), ranges)
    return NormalizedDataset(name=dataset.name, feature_names=kept_names, features=out,
                             labels=labels, schema=schema, report=report)


def class_balance(labels) -> dict[int, float]:
    """Fraction of rows per class; sums to 1."""
    labels = np.asarray(labels)
    n = len(labels)
    if n == 0:
        raise DatasetError("cannot compute class balance of an empty dataset")
    return {c: float((labels == c).sum()) / n for c in (0, 1)}
