"""Model-agnostic performative data-stream generator.

Instances come from weighted Gaussian centroids chosen by roulette-wheel
selection. Each emitted instance is classified (checkerboard, deployed model,
or a mix of the two) and the emitting centroid's weight moves by the feedback
strength whenever the prediction hits the class's target: up for a
self-fulfilling loop, down (clamped at zero) for a self-defeating one.
Optional intrinsic drift relocates centroids, either suddenly or via
per-step velocities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Sequence

import numpy as np

from . import engine
from .baselines import MixPolicy, ThresholdModel
from .stream_model import (
    Instance,
    PredictionRecord,
    Source,
    StreamRecording,
    StreamSchema,
    validate_label,
)

Predictor = Callable[[np.ndarray, int], int]


class EndOfStreamError(RuntimeError):
    """Raised when more instances are requested than the horizon allows."""


class DegenerateWeightsError(RuntimeError):
    """All weights zero where a positive total is required."""


class LoopKind(IntEnum):
    NONE = 0
    SELF_FULFILLING = 1
    SELF_DEFEATING = 2


class DriftKind(IntEnum):
    NONE = 0
    SUDDEN = 1
    INCREMENTAL = 2


@dataclass(frozen=True)
class ClassFeedback:
    """Feedback behaviour of one class: target prediction, loop type, strength."""

    target_prediction: int
    loop: LoopKind = LoopKind.NONE
    strength: float = 0.0

    def __post_init__(self):
        validate_label(self.target_prediction)
        if self.strength < 0.0:
            raise ValueError("feedback strength must be non-negative")


@dataclass(frozen=True)
class FeedbackSpec:
    """Per-class feedback entries (index = class label)."""

    class0: ClassFeedback = ClassFeedback(target_prediction=0)
    class1: ClassFeedback = ClassFeedback(target_prediction=1)

    @classmethod
    def self_fulfilling(cls, strength: float, classes: Sequence[int] = (0, 1)) -> "FeedbackSpec":
        return cls._uniform(LoopKind.SELF_FULFILLING, strength, classes)

    @classmethod
    def self_defeating(cls, strength: float, classes: Sequence[int] = (0, 1)) -> "FeedbackSpec":
        return cls._uniform(LoopKind.SELF_DEFEATING, strength, classes)

    @classmethod
    def _uniform(cls, loop: LoopKind, strength: float, classes: Sequence[int]) -> "FeedbackSpec":
        def entry(label: int) -> ClassFeedback:
            if label in classes:
                return ClassFeedback(target_prediction=label, loop=loop, strength=strength)
            return ClassFeedback(target_prediction=label)

        return cls(class0=entry(0), class1=entry(1))

    def for_class(self, label: int) -> ClassFeedback:
        return self.class0 if label == 0 else self.class1

    def arrays(self):
        entries = (self.class0, self.class1)
        return (
            np.array([int(e.loop) for e in entries], dtype=np.int8),
            np.array([e.target_prediction for e in entries], dtype=np.int8),
            np.array([e.strength for e in entries], dtype=np.float64),
        )


@dataclass(frozen=True)
class DriftSpec:
    """Intrinsic drift configuration: kind, number of events, velocity scale."""

    kind: DriftKind = DriftKind.NONE
    events: int = 0
    velocity_scale: float = 0.0001

    def __post_init__(self):
        if self.events < 0:
            raise ValueError("event count must be non-negative")
        if self.kind == DriftKind.NONE and self.events != 0:
            raise ValueError("drift kind 'none' cannot schedule events")


def event_schedule(horizon: int, events: int) -> np.ndarray:
    """Evenly spaced event timesteps: floor(horizon*(j+1)/(events+1))."""
    return np.array(
        [horizon * (j + 1) // (events + 1) for j in range(events)], dtype=np.int64
    )


@dataclass(frozen=True)
class Centroid:
    """Generator atom: position, class label, weight, velocity, Gaussian spread."""

    position: tuple[float, ...]
    label: int
    weight: float
    velocity: tuple[float, ...] = ()
    spread: float = 0.0

    def __post_init__(self):
        validate_label(self.label)
        if self.weight < 0.0:
            raise ValueError("centroid weight must be non-negative")
        if self.spread < 0.0:
            raise ValueError("Gaussian spread must be non-negative")
        vel = self.velocity or tuple(0.0 for _ in self.position)
        if len(vel) != len(self.position):
            raise ValueError("velocity and position dimensionality differ")
        if any(abs(v) > 1.0 for v in vel):
            raise ValueError("velocity components live in [-1, 1]")
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "velocity", tuple(float(v) for v in vel))


def roulette_select(weights, rng) -> int:
    """Index i with probability weights[i] / sum(weights)."""
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0 or np.any(w < 0.0):
        raise ValueError("weights must be a non-empty, non-negative sequence")
    cum = np.cumsum(w)
    total = cum[-1]
    if total <= 0.0:
        raise DegenerateWeightsError("all selection weights are zero")
    u = rng.random() * total
    return int(np.searchsorted(cum, u, side="right"))


def apply_feedback(centroid: Centroid, predicted: int, feedback: FeedbackSpec) -> Centroid:
    """Weight update for one prediction: +strength / clamped -strength / no-op."""
    entry = feedback.for_class(centroid.label)
    if entry.loop == LoopKind.NONE or predicted != entry.target_prediction:
        return centroid
    if entry.loop == LoopKind.SELF_FULFILLING:
        new_weight = centroid.weight + entry.strength
    else:
        new_weight = max(0.0, centroid.weight - entry.strength)
    return Centroid(
        position=centroid.position,
        label=centroid.label,
        weight=new_weight,
        velocity=centroid.velocity,
        spread=centroid.spread,
    )


@dataclass
class RoutingConfig:
    """How emitted instances get their predictions.

    ``checkerboard`` is a CheckerboardParams (stage-1 predictor); ``model`` an
    optional deployed model ("rc" or a ThresholdModel) taking the share of
    instances given by ``mix``.
    """

    checkerboard: "object | None" = None  # CheckerboardParams; typed loosely to avoid a cycle
    model: "str | ThresholdModel | None" = None
    mix: MixPolicy = field(default_factory=MixPolicy)

    def kernel_args(self, schema: StreamSchema) -> dict:
        if self.model is None:
            model_kind = engine._pykernel.MODEL_NONE
            tc = ThresholdModel()
        elif self.model == "rc":
            model_kind = engine._pykernel.MODEL_RANDOM
            tc = ThresholdModel()
        elif isinstance(self.model, ThresholdModel):
            model_kind = engine._pykernel.MODEL_THRESHOLD
            tc = self.model
        else:
            raise ValueError(f"unknown deployed model {self.model!r}")

        cb = self.checkerboard
        if cb is None:
            if self.model is None or self.mix.probability(0, 1) < 1.0 or self.mix.end is not None:
                raise ValueError("checkerboard parameters required unless mix is fixed at 1.0")
            cb_f, cb_tau, cb_feature = 1.0, 1, 0
        else:
            cb.validate_for(schema)
            cb_f, cb_tau = cb.f, cb.tau
            cb_feature = -1 if cb.feature is None else cb.feature
        return dict(
            cb_f=float(cb_f),
            cb_tau=int(cb_tau),
            cb_feature=int(cb_feature),
            model_kind=int(model_kind),
            tc_feature=int(tc.feature),
            tc_threshold=float(tc.threshold),
            tc_positive=int(tc.positive_class),
            mix_mode=0 if self.mix.end is None else 1,
            mix_a=float(self.mix.start),
            mix_b=float(self.mix.end if self.mix.end is not None else self.mix.start),
        )


class GeneratorState:
    """Mutable stream state: centroid arrays, feedback, drift, RNG, horizon.

    Single-threaded by design (weights and the RNG mutate as instances are
    drawn); run one state per repetition and parallelise across states.
    """

    def __init__(self, schema: StreamSchema, *, positions, labels, weights, spreads,
                 feedback: FeedbackSpec, drift: DriftSpec, horizon: int, rng,
                 velocities=None, reset_mode: int | None = None, reset_value: float = 1.0,
                 feedback_mode: str = "selected", engine_name: str | None = None):
        if horizon <= 0:
            raise ValueError("horizon must be positive")
        self.schema = schema
        self.positions = np.ascontiguousarray(positions, dtype=np.float64)
        self.labels = np.ascontiguousarray(labels, dtype=np.int8)
        self.weights = np.ascontiguousarray(weights, dtype=np.float64)
        self.spreads = np.ascontiguousarray(spreads, dtype=np.float64)
        n = len(self.weights)
        if self.positions.shape != (n, schema.dims):
            raise ValueError("positions must be (n_centroids, dims)")
        if velocities is None:
            velocities = np.zeros_like(self.positions)
        self.velocities = np.ascontiguousarray(velocities, dtype=np.float64)
        self.feedback = feedback
        self.drift = drift
        self.horizon = int(horizon)
        self.rng = rng
        self.emitted = 0
        self.resets = 0
        self._engine = engine.get_engine(engine_name)
        self._events = event_schedule(self.horizon, drift.events) if drift.kind != DriftKind.NONE \
            else np.zeros(0, dtype=np.int64)
        if reset_mode is None:
            reset_mode = engine._pykernel.RESET_UNIFORM
        self._reset_mode = reset_mode
        self._reset_value = float(reset_value)
        if feedback_mode not in ("selected", "transfer"):
            raise ValueError(f"unknown feedback mode {feedback_mode!r}")
        self.feedback_mode = feedback_mode
        self._features = np.zeros((self.horizon, schema.dims), dtype=np.float64)
        self._y = np.zeros(self.horizon, dtype=np.int8)
        self._yhat = np.zeros(self.horizon, dtype=np.int8)
        self._src = np.zeros(self.horizon, dtype=np.int8)

    # --- construction ----------------------------------------------------
    @classmethod
    def equidistant(cls, schema: StreamSchema, per_class: int, *, spread: float,
                    weights_random: bool, rng, feedback: FeedbackSpec,
                    drift: DriftSpec = DriftSpec(), horizon: int = 100_000,
                    feedback_mode: str = "selected",
                    engine_name: str | None = None) -> "GeneratorState":
        """2*per_class centroids spaced evenly over a 1-D schema, labels alternating."""
        if schema.dims != 1:
            raise ValueError("equidistant placement is defined for 1-D schemas; "
                             "use from_dataset for multivariate streams")
        if per_class < 1:
            raise ValueError("need at least one centroid per class")
        n = 2 * per_class
        rng_range = schema.ranges[0]
        gap = rng_range.width / n
        positions = np.array([[rng_range.low + (k + 0.5) * gap] for k in range(n)])
        labels = np.array([k % 2 for k in range(n)], dtype=np.int8)
        weights = rng.random(n) if weights_random else np.ones(n)
        velocities = None
        if drift.kind == DriftKind.INCREMENTAL:
            velocities = rng.uniform(-1.0, 1.0, size=(n, 1))
        reset_mode = engine._pykernel.RESET_UNIFORM if weights_random \
            else engine._pykernel.RESET_CONSTANT
        return cls(schema, positions=positions, labels=labels, weights=weights,
                   spreads=np.full(n, spread, dtype=np.float64), feedback=feedback,
                   drift=drift, horizon=horizon, rng=rng, velocities=velocities,
                   reset_mode=reset_mode, reset_value=1.0,
                   feedback_mode=feedback_mode, engine_name=engine_name)

    @classmethod
    def from_dataset(cls, schema: StreamSchema, features, labels, *,
                     feedback: FeedbackSpec, rng, horizon: int = 100_000,
                     feedback_mode: str = "selected",
                     engine_name: str | None = None) -> "GeneratorState":
        """One zero-spread centroid per instance, every weight 1/N."""
        feats = np.ascontiguousarray(features, dtype=np.float64)
        if feats.ndim != 2 or len(feats) == 0:
            raise ValueError("from_dataset needs a non-empty 2-D feature array")
        n = len(feats)
        weights = np.full(n, 1.0 / n, dtype=np.float64)
        return cls(schema, positions=feats, labels=labels, weights=weights,
                   spreads=np.zeros(n, dtype=np.float64), feedback=feedback,
                   drift=DriftSpec(), horizon=horizon, rng=rng,
                   reset_mode=engine._pykernel.RESET_CONSTANT, reset_value=1.0 / n,
                   feedback_mode=feedback_mode, engine_name=engine_name)

    @classmethod
    def from_centroids(cls, schema: StreamSchema, centroids: Sequence[Centroid], *,
                       feedback: FeedbackSpec, rng, drift: DriftSpec = DriftSpec(),
                       horizon: int = 100_000, engine_name: str | None = None) -> "GeneratorState":
        positions = np.array([c.position for c in centroids], dtype=np.float64)
        return cls(schema,
                   positions=positions,
                   labels=np.array([c.label for c in centroids], dtype=np.int8),
                   weights=np.array([c.weight for c in centroids], dtype=np.float64),
                   spreads=np.array([c.spread for c in centroids], dtype=np.float64),
                   velocities=np.array([c.velocity for c in centroids], dtype=np.float64),
                   feedback=feedback, drift=drift, horizon=horizon, rng=rng,
                   engine_name=engine_name)

    # --- streaming -------------------------------------------------------
    def _base_kernel_args(self) -> dict:
        loops, targets, strengths = self.feedback.arrays()
        return dict(
            positions=self.positions,
            labels=self.labels,
            weights=self.weights,
            velocities=self.velocities,
            spreads=self.spreads,
            lows=self.schema.lows(),
            highs=self.schema.highs(),
            loop_kind=loops,
            targets=targets,
            strengths=strengths,
            drift_kind=int(self.drift.kind),
            event_steps=self._events,
            velocity_scale=float(self.drift.velocity_scale),
            reset_mode=self._reset_mode,
            reset_value=self._reset_value,
            feedback_mode=0 if self.feedback_mode == "selected" else 1,
            horizon=self.horizon,
            out_features=self._features,
            out_y=self._y,
            out_yhat=self._yhat,
            out_src=self._src,
        )

    def run(self, routing: RoutingConfig, steps: int | None = None) -> StreamRecording:
        """Advance the stream ``steps`` steps (default: to the horizon)."""
        if steps is None:
            steps = self.horizon - self.emitted
        if steps < 0 or self.emitted + steps > self.horizon:
            raise EndOfStreamError(
                f"requested {steps} steps at t={self.emitted} with horizon {self.horizon}")
        args = self._base_kernel_args()
        args.update(routing.kernel_args(self.schema))
        try:
            self.resets += self._engine.run_stream(
                self.rng, t0=self.emitted, n_steps=steps, **args)
        except engine.DEGENERATE_ERRORS as exc:
            raise DegenerateWeightsError(str(exc)) from exc
        self.emitted += steps
        return self.recording()

    def next_instance(self, predictor: Predictor,
                      source: Source = Source.DEPLOYED_MODEL) -> PredictionRecord:
        """Emit one instance classified by an arbitrary callable predictor.

        Always runs on the Python engine (callables have no compiled path) but
        consumes the same RNG stream, so interleaving with run() stays
        deterministic.
        """
        if self.emitted >= self.horizon:
            raise EndOfStreamError(f"horizon of {self.horizon} instances exhausted")
        args = self._base_kernel_args()
        t = self.emitted
        try:
            self.resets += engine._pykernel.run_stream(
                self.rng, t0=t, n_steps=1,
                cb_f=1.0, cb_tau=1, cb_feature=0,
                model_kind=engine._pykernel.MODEL_NONE,
                tc_feature=0, tc_threshold=0.0, tc_positive=1,
                mix_mode=0, mix_a=0.0, mix_b=0.0,
                predictor=predictor, predictor_source=int(source),
                **args)
        except engine._pykernel.DegenerateWeightsError as exc:
            raise DegenerateWeightsError(str(exc)) from exc
        self.emitted += 1
        return PredictionRecord(
            timestep=t,
            instance=Instance(tuple(self._features[t]), int(self._y[t])),
            prediction=int(self._yhat[t]),
            source=Source(int(self._src[t])),
        )

    def apply_sudden_event(self) -> None:
        """Relocate every centroid uniformly within the schema box.

        Manual-stepping counterpart of the scheduled sudden-drift events the
        engine fires (same formula, same RNG); labels, weights and spreads
        are untouched.
        """
        if self.drift.kind is not DriftKind.SUDDEN:
            raise ValueError("sudden events need drift kind 'sudden'")
        lows, highs = self.schema.lows(), self.schema.highs()
        for c in range(len(self.weights)):
            for d in range(self.schema.dims):
                self.positions[c, d] = lows[d] + (highs[d] - lows[d]) * self.rng.random()

    def apply_incremental_step(self) -> None:
        """Move every centroid one velocity step, reflecting at the bounds."""
        if self.drift.kind is not DriftKind.INCREMENTAL:
            raise ValueError("incremental steps need drift kind 'incremental'")
        lows, highs = self.schema.lows(), self.schema.highs()
        scale = self.drift.velocity_scale
        for c in range(len(self.weights)):
            for d in range(self.schema.dims):
                p = self.positions[c, d] + self.velocities[c, d] * scale
                if p > highs[d]:
                    p = 2.0 * highs[d] - p
                    self.velocities[c, d] = -self.velocities[c, d]
                elif p < lows[d]:
                    p = 2.0 * lows[d] - p
                    self.velocities[c, d] = -self.velocities[c, d]
                self.positions[c, d] = p

    def recording(self) -> StreamRecording:
        """View of everything emitted so far."""
        n = self.emitted
        return StreamRecording(self.schema, self._features[:n], self._y[:n],
                               self._yhat[:n], self._src[:n])

    def centroids(self) -> list[Centroid]:
        return [
            Centroid(position=tuple(self.positions[i]), label=int(self.labels[i]),
                     weight=float(self.weights[i]), velocity=tuple(self.velocities[i]),
                     spread=float(self.spreads[i]))
            for i in range(len(self.weights))
        ]
