"""Checkerboard intervention detector.

Stage 1 classifies instances by a checkerboard over (feature band, trial
parity); stage 2 extracts one relative density change per trial and class
(end-window accuracy minus start-window accuracy among instances predicted as
that class); stage 3 runs a Mann-Whitney U test of those deltas against their
negation and flags drift when the p-value clears the confidence level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .stats import UTestResult, mann_whitney_u
from .stream_model import Source, StreamRecording, StreamSchema

PREDICTORS = (1, 0, 0, 1)
DEFAULT_MIN_TRIALS = 5

PARITY_ALL_FEATURES = None  # feature_mode sentinel


@dataclass(frozen=True)
class CheckerboardParams:
    """Stage-1/2 configuration.

    ``feature`` selects the single feature driving the band pattern; ``None``
    means the parity of all per-feature bands. The split ``f`` must induce at
    least two bands over every feature it is applied to.
    """

    f: float = 1.0
    tau: int = 1000
    window: int = 100
    alpha: float = 0.01
    feature: int | None = 0
    min_trials: int = DEFAULT_MIN_TRIALS

    def __post_init__(self):
        if self.f <= 0.0:
            raise ValueError("feature split f must be positive")
        if self.tau <= 0:
            raise ValueError("trial length tau must be positive")
        if not 0 < self.window <= self.tau // 2:
            raise ValueError(f"window must be in [1, tau/2], got {self.window} for tau={self.tau}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.min_trials < 1:
            raise ValueError("min_trials must be at least 1")

    def validate_for(self, schema: StreamSchema) -> None:
        """Check band validity: every used feature needs >= 2 bands of width f."""
        used = range(schema.dims) if self.feature is None else [self.feature]
        for idx in used:
            if not 0 <= idx < schema.dims:
                raise ValueError(f"feature index {idx} outside schema with {schema.dims} features")
            width = schema.ranges[idx].width
            if width / self.f < 2.0:
                raise ValueError(
                    f"f={self.f} produces fewer than two bands over feature {idx} "
                    f"(range width {width}); use f <= {width / 2.0}")


def band_index(x: float, f: float) -> int:
    """Alternating band of a feature value: Euclidean floor(x/f) mod 2."""
    if f <= 0.0:
        raise ValueError("feature split f must be positive")
    return int(math.floor(x / f)) % 2


def cb_predict(features, timestep: int, params: CheckerboardParams) -> int:
    """Stage-1 label for one instance at a timestep."""
    if timestep < 0:
        raise ValueError("timestep must be non-negative")
    features = np.atleast_1d(np.asarray(features, dtype=np.float64))
    if params.feature is None:
        f_id = int(sum(band_index(float(x), params.f) for x in features)) % 2
    else:
        if not 0 <= params.feature < features.shape[0]:
            raise ValueError(f"feature index {params.feature} out of range")
        f_id = band_index(float(features[params.feature]), params.f)
    t_id = (timestep // params.tau) % 2
    return PREDICTORS[f_id + 2 * t_id]


@dataclass
class TrialDeltas:
    """Per-class trial deltas (group A); group B is the elementwise negation."""

    a_values: dict[int, np.ndarray]
    skipped: dict[int, int]

    def b_values(self, label: int) -> np.ndarray:
        return -self.a_values[label]


@dataclass(frozen=True)
class ClassDecision:
    p_value: float
    detected: bool
    trials_used: int
    skipped: int
    sufficient: bool
    test: UTestResult | None = None


@dataclass(frozen=True)
class DetectionReport:
    per_class: dict[int, ClassDecision]
    any_detected: bool = field(init=False)
    all_detected: bool = field(init=False)

    def __post_init__(self):
        flags = [d.detected for d in self.per_class.values()]
        object.__setattr__(self, "any_detected", any(flags))
        object.__setattr__(self, "all_detected", all(flags))


def compute_trial_deltas(recording: StreamRecording, params: CheckerboardParams) -> TrialDeltas:
    """Stage 2: one accuracy delta per complete trial and class.

    Windows are the first and last ``window`` stream positions of each trial,
    filtered to checkerboard-routed records predicted as the class. Trials
    where either window holds no such record are skipped and counted. A
    trailing partial trial is discarded.
    """
    tau, w = params.tau, params.window
    n_trials = len(recording) // tau
    a_values: dict[int, np.ndarray] = {}
    skipped: dict[int, int] = {}
    if n_trials == 0:
        return TrialDeltas({0: np.zeros(0), 1: np.zeros(0)}, {0: 0, 1: 0})

    usable = n_trials * tau
    yhat = recording.yhat[:usable].reshape(n_trials, tau)
    y = recording.y[:usable].reshape(n_trials, tau)
    cb = (recording.source[:usable] == int(Source.CHECKERBOARD)).reshape(n_trials, tau)

    for label in (0, 1):
        pred_c = cb & (yhat == label)
        corr_c = pred_c & (y == label)
        d1 = pred_c[:, :w].sum(axis=1)
        d2 = pred_c[:, tau - w:].sum(axis=1)
        c1 = corr_c[:, :w].sum(axis=1)
        c2 = corr_c[:, tau - w:].sum(axis=1)
        valid = (d1 > 0) & (d2 > 0)
        a = c2[valid] / d2[valid] - c1[valid] / d1[valid]
        a_values[label] = a.astype(np.float64)
        skipped[label] = int(n_trials - valid.sum())
    return TrialDeltas(a_values, skipped)


def detect(recording: StreamRecording, params: CheckerboardParams) -> DetectionReport:
    """Stage 3: per-class Mann-Whitney U of (A, -A) at confidence alpha.

    Classes with fewer than ``min_trials`` usable trials report p=1 and no
    detection, flagged as insufficient.
    """
    deltas = compute_trial_deltas(recording, params)
    decisions: dict[int, ClassDecision] = {}
    for label in (0, 1):
        a = deltas.a_values[label]
        used = len(a)
        if used >= params.min_trials:
            result = mann_whitney_u(a, -a, alternative="two-sided")
            decisions[label] = ClassDecision(
                p_value=result.p_value,
                detected=bool(result.p_value < params.alpha),
                trials_used=used,
                skipped=deltas.skipped[label],
                sufficient=True,
                test=result,
            )
        else:
            decisions[label] = ClassDecision(
                p_value=1.0, detected=False, trials_used=used,
                skipped=deltas.skipped[label], sufficient=False,
            )
    return DetectionReport(per_class=decisions)
