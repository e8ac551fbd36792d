"""Core vocabulary for binary prediction streams.

Everything downstream (generator, detector, harness) speaks in terms of the
types defined here: a feature schema, labelled instances, and per-timestep
prediction records that remember which predictor produced them.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

BINARY_LABELS = (0, 1)


class Source(IntEnum):
    """Which predictor classified an instance. Fixed at routing time."""

    CHECKERBOARD = 0
    DEPLOYED_MODEL = 1


def validate_label(value: int) -> int:
    """Return ``value`` as a plain int, rejecting anything outside {0, 1}."""
    label = int(value)
    if label not in BINARY_LABELS:
        raise ValueError(f"labels must be 0 or 1, got {value!r}")
    return label


@dataclass(frozen=True)
class FeatureRange:
    """Closed interval a feature may take values in."""

    low: float = -1.0
    high: float = 1.0

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"feature range needs low < high, got [{self.low}, {self.high}]")

    @property
    def width(self) -> float:
        return self.high - self.low


@dataclass(frozen=True)
class StreamSchema:
    """Declared dimensionality and per-feature ranges of a stream."""

    ranges: tuple[FeatureRange, ...]

    @property
    def dims(self) -> int:
        return len(self.ranges)

    def lows(self) -> np.ndarray:
        return np.array([r.low for r in self.ranges], dtype=np.float64)

    def highs(self) -> np.ndarray:
        return np.array([r.high for r in self.ranges], dtype=np.float64)

    def contains(self, features: np.ndarray) -> bool:
        """True when every component of ``features`` is within its declared range."""
        x = np.asarray(features, dtype=np.float64)
        if x.shape[-1] != self.dims:
            return False
        return bool(np.all(x >= self.lows()) and np.all(x <= self.highs()))


def make_stream_schema(dims: int, ranges: Sequence[FeatureRange] | None = None) -> StreamSchema:
    """Build an immutable schema; ``ranges`` defaults to [-1, 1] per feature."""
    if dims <= 0:
        raise ValueError(f"schema needs at least one feature, got dims={dims}")
    if ranges is None:
        ranges = [FeatureRange() for _ in range(dims)]
    ranges = tuple(ranges)
    if len(ranges) != dims:
        raise ValueError(f"got {len(ranges)} ranges for {dims} features")
    return StreamSchema(ranges=ranges)


@dataclass(frozen=True)
class Instance:
    """One labelled observation: feature vector plus true class."""

    features: tuple[float, ...]
    label: int

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        object.__setattr__(self, "label", validate_label(self.label))


@dataclass(frozen=True)
class PredictionRecord:
    """An instance together with the prediction assigned to it at a timestep."""

    timestep: int
    instance: Instance
    prediction: int
    source: Source

    def __post_init__(self):
        if self.timestep < 0:
            raise ValueError("timesteps are non-negative")
        object.__setattr__(self, "prediction", validate_label(self.prediction))
        object.__setattr__(self, "source", Source(self.source))


class StreamRecording:
    """Column-oriented buffer of prediction records.

    The array form is what the detector and harness actually consume; the
    record objects above are the per-item view for interactive use.
    Columns: ``features`` (T, dims), ``y``, ``yhat`` and ``source`` (all T).
    """

    def __init__(self, schema: StreamSchema, features, y, yhat, source):
        self.schema = schema
        self.features = np.asarray(features, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int8)
        self.yhat = np.asarray(yhat, dtype=np.int8)
        self.source = np.asarray(source, dtype=np.int8)
        if self.features.ndim != 2 or self.features.shape[1] != schema.dims:
            raise ValueError("feature array does not match schema dimensionality")
        n = len(self.features)
        if not (len(self.y) == len(self.yhat) == len(self.source) == n):
            raise ValueError("columns must share one length")

    def __len__(self) -> int:
        return len(self.y)

    @classmethod
    def from_records(cls, schema: StreamSchema, records: Sequence[PredictionRecord]) -> "StreamRecording":
        feats = np.array([r.instance.features for r in records], dtype=np.float64)
        if feats.size == 0:
            feats = feats.reshape(0, schema.dims)
        return cls(
            schema,
            feats,
            [r.instance.label for r in records],
            [r.prediction for r in records],
            [int(r.source) for r in records],
        )

    def records(self) -> list[PredictionRecord]:
        return [
            PredictionRecord(
                timestep=t,
                instance=Instance(tuple(self.features[t]), int(self.y[t])),
                prediction=int(self.yhat[t]),
                source=Source(int(self.source[t])),
            )
            for t in range(len(self))
        ]

    def validate(self) -> None:
        """Assert every stored instance obeys the schema. Used by tests."""
        lo, hi = self.schema.lows(), self.schema.highs()
        if len(self) and not (np.all(self.features >= lo) and np.all(self.features <= hi)):
            raise AssertionError("recorded features violate the schema ranges")
        for arr in (self.y, self.yhat):
            if len(arr) and not np.isin(arr, BINARY_LABELS).all():
                raise AssertionError("labels outside {0, 1}")
