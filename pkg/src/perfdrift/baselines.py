"""Deployed-model stand-ins and traditional drift detectors.

The random and threshold classifiers are the two reference models the stream
can be mixed with; ADWIN and DDM are the conventional detectors used for
comparison runs. Both detector classes are deliberately written in plain
scalar arithmetic: the compiled engine transcribes them one to one, and the
equivalence tests hold the two sides to identical output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


@dataclass(frozen=True)
class ThresholdModel:
    """Predict ``positive_class`` iff the selected feature exceeds ``threshold``."""

    threshold: float = 0.0
    positive_class: int = 1
    feature: int = 0


def tc_predict(features, model: ThresholdModel = ThresholdModel()) -> int:
    x = features[model.feature]
    return model.positive_class if x > model.threshold else 1 - model.positive_class


def rc_predict(rng) -> int:
    """Fair-coin class guess."""
    return 1 if rng.random() < 0.5 else 0


@dataclass(frozen=True)
class MixPolicy:
    """Probability that an instance is routed to the deployed model.

    ``Fixed``: constant probability ``start``. ``LinearRamp``: probability
    grows linearly from ``start`` at t=0 to ``end`` at t=T.
    """

    start: float = 0.0
    end: float | None = None  # None = fixed policy

    def __post_init__(self):
        for v in (self.start, self.end):
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"mix probabilities live in [0, 1], got {v}")

    def probability(self, timestep: int, horizon: int) -> float:
        if self.end is None:
            return self.start
        return self.start + (self.end - self.start) * (timestep / horizon)


def route(policy: MixPolicy, timestep: int, horizon: int, rng):
    """Randomly assign one instance to the checkerboard or the deployed model."""
    from .stream_model import Source

    p = policy.probability(timestep, horizon)
    return Source.DEPLOYED_MODEL if rng.random() < p else Source.CHECKERBOARD


class _Row:
    """One resolution level of the ADWIN exponential histogram."""

    __slots__ = ("sums", "variances", "count")

    def __init__(self, capacity: int):
        self.sums = [0.0] * capacity
        self.variances = [0.0] * capacity
        self.count = 0

    def append(self, total: float, variance: float):
        self.sums[self.count] = total
        self.variances[self.count] = variance
        self.count += 1

    def drop_oldest(self, k: int = 1):
        for i in range(self.count - k):
            self.sums[i] = self.sums[i + k]
            self.variances[i] = self.variances[i + k]
        self.count -= k


class AdwinDetector:
    """ADWIN adaptive-windowing detector (exponential histogram variant).

    Buckets in row r summarise 2**r observations; a row overflowing
    ``max_buckets`` merges its two oldest buckets one row up. Every ``clock``
    observations all admissible prefix/suffix cuts are tested against the
    Hoeffding-style bound at confidence ``delta``; on a detected difference the
    oldest buckets are shed and ``update`` reports True.
    """

    def __init__(self, delta: float = 0.002, max_buckets: int = 5, clock: int = 32,
                 min_window: int = 5, grace: int = 10):
        if not 0.0 < delta < 1.0:
            raise ValueError("delta must be in (0, 1)")
        self.delta = delta
        self.max_buckets = max_buckets
        self.clock = clock
        self.min_window = min_window
        self.grace = grace
        self.rows: list[_Row] = [_Row(max_buckets + 1)]
        self.width = 0
        self.total = 0.0
        self.variance_sum = 0.0  # sum of squared deviations over the window
        self.n_seen = 0
        self.n_detections = 0

    # --- bookkeeping -----------------------------------------------------
    def bucket_counts(self) -> int:
        """Observations summarised across all buckets (equals ``width``)."""
        return sum((1 << r) * row.count for r, row in enumerate(self.rows))

    def mean(self) -> float:
        return self.total / self.width if self.width else 0.0

    def _insert(self, value: float):
        if self.width > 0:
            mean = self.total / self.width
            self.variance_sum += self.width * (value - mean) * (value - mean) / (self.width + 1.0)
        self.width += 1
        self.total += value
        self.rows[0].append(value, 0.0)

    def _compress(self):
        r = 0
        while r < len(self.rows):
            row = self.rows[r]
            if row.count <= self.max_buckets:
                break
            if r + 1 == len(self.rows):
                self.rows.append(_Row(self.max_buckets + 1))
            n = float(1 << r)
            u1 = row.sums[0] / n
            u2 = row.sums[1] / n
            merged_var = (row.variances[0] + row.variances[1]
                          + n * n / (n + n) * (u1 - u2) * (u1 - u2))
            self.rows[r + 1].append(row.sums[0] + row.sums[1], merged_var)
            row.drop_oldest(2)
            r += 1

    def _drop_oldest_bucket(self):
        r = len(self.rows) - 1
        while r > 0 and self.rows[r].count == 0:
            r -= 1
        row = self.rows[r]
        n = float(1 << r)
        u = row.sums[0] / n
        self.width -= 1 << r
        self.total -= row.sums[0]
        self.variance_sum -= row.variances[0]
        if self.width > 0:
            mu_rest = self.total / self.width
            self.variance_sum -= n * self.width / (n + self.width) * (u - mu_rest) * (u - mu_rest)
        if self.variance_sum < 0.0:
            self.variance_sum = 0.0
        row.drop_oldest(1)
        while len(self.rows) > 1 and self.rows[-1].count == 0:
            self.rows.pop()

    def _find_cut(self) -> bool:
        if self.width <= self.min_window * 2:
            return False
        dd = math.log(2.0 * math.log(self.width) / self.delta)
        v = self.variance_sum / self.width
        n0 = 0.0
        u0 = 0.0
        for r in range(len(self.rows) - 1, -1, -1):
            row = self.rows[r]
            size = float(1 << r)
            for k in range(row.count):
                n0 += size
                u0 += row.sums[k]
                n1 = self.width - n0
                if n0 >= self.min_window and n1 >= self.min_window:
                    m_inv = 1.0 / (n0 - self.min_window + 1.0) + 1.0 / (n1 - self.min_window + 1.0)
                    eps = math.sqrt(2.0 * m_inv * v * dd) + (2.0 / 3.0) * m_inv * dd
                    if abs(u0 / n0 - (self.total - u0) / n1) > eps:
                        return True
        return False

    # --- public API ------------------------------------------------------
    def update(self, value: float) -> bool:
        """Insert one observation; True when drift was detected (window cut)."""
        self._insert(value)
        self._compress()
        self.n_seen += 1
        detected = False
        if self.n_seen % self.clock == 0 and self.width > self.grace:
            while self._find_cut():
                self._drop_oldest_bucket()
                detected = True
        if detected:
            self.n_detections += 1
        return detected


class DdmLevel(Enum):
    STABLE = "stable"
    WARNING = "warning"
    DRIFT = "drift"


class DdmDetector:
    """DDM error-rate drift detector.

    Tracks the running error rate p and its binomial deviation s; keeps the
    best (p + s) seen so far and raises warning / drift when the current value
    exceeds it by 2 / 3 stored deviations. Statistics reset after a drift.
    """

    def __init__(self, warm_up: int = 30, warning_scale: float = 2.0, drift_scale: float = 3.0):
        self.warm_up = warm_up
        self.warning_scale = warning_scale
        self.drift_scale = drift_scale
        self.reset()

    def reset(self):
        self.n = 0
        self.p = 1.0
        self.s = 0.0
        self.p_min = math.inf
        self.s_min = math.inf

    def update(self, correct: bool) -> DdmLevel:
        error = 0.0 if correct else 1.0
        self.n += 1
        self.p += (error - self.p) / self.n
        self.s = math.sqrt(self.p * (1.0 - self.p) / self.n)
        if self.n < self.warm_up:
            return DdmLevel.STABLE
        ps = self.p + self.s
        if ps <= self.p_min + self.s_min:
            self.p_min = self.p
            self.s_min = self.s
        if ps > self.p_min + self.drift_scale * self.s_min:
            self.reset()
            return DdmLevel.DRIFT
        if ps > self.p_min + self.warning_scale * self.s_min:
            return DdmLevel.WARNING
        return DdmLevel.STABLE
