"""Seeded experiment harness.

A scenario file declares one generator setup, one detector, an optional
deployed model, a swept parameter and a strength grid. The harness expands
that into cells, runs ``repetitions`` seeded streams per cell (repetition r
always uses ``base_seed XOR (r * 0x9E3779B97F4A7C15)``, so corresponding
repetitions share randomness across cells), and aggregates detection rates
into result rows. Everything is a pure function of the base seed.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import cbpdd, engine
from .baselines import MixPolicy, ThresholdModel
from .datasets import NormalizedDataset, load_csv, normalize
from .generator import (
    DriftKind,
    DriftSpec,
    FeedbackSpec,
    GeneratorState,
    LoopKind,
    RoutingConfig,
)
from .stream_model import FeatureRange, Source, StreamRecording, make_stream_schema

SEED_STRIDE = 0x9E3779B97F4A7C15  # odd 64-bit constant mixing the repetition index
MASK64 = (1 << 64) - 1

RESULT_HEADER = [
    "scenario", "swept_param", "swept_value", "sigma", "class",
    "detection_rate", "any_rate", "all_rate", "mean_p", "n",
]

_LOOPS = {
    "none": LoopKind.NONE,
    "fulfilling": LoopKind.SELF_FULFILLING,
    "defeating": LoopKind.SELF_DEFEATING,
}


def repetition_seed(base_seed: int, rep_index: int) -> int:
    return (base_seed ^ (rep_index * SEED_STRIDE)) & MASK64


# --------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class GeneratorConfig:
    kind: str = "equidistant"  # equidistant | dataset
    per_class: int = 100
    spread: float = 0.01
    weights_random: bool = True
    feedback_mode: str = "transfer"  # selected | transfer
    loops: tuple[str, str] = ("fulfilling", "fulfilling")  # per class 0/1
    targets: tuple[int, int] = (0, 1)
    drift_kind: str = "none"
    drift_events: int = 0
    velocity_scale: float = 0.0001
    dataset_path: str | None = None
    label_column: str | None = None
    positive_label: str | None = None

    def feedback(self, sigma: float) -> FeedbackSpec:
        from .generator import ClassFeedback

        entries = []
        for cls in (0, 1):
            loop = _LOOPS[self.loops[cls]]
            entries.append(ClassFeedback(
                target_prediction=self.targets[cls],
                loop=loop,
                strength=sigma if loop != LoopKind.NONE else 0.0,
            ))
        return FeedbackSpec(class0=entries[0], class1=entries[1])

    def drift(self) -> DriftSpec:
        kind = {"none": DriftKind.NONE, "sudden": DriftKind.SUDDEN,
                "incremental": DriftKind.INCREMENTAL}[self.drift_kind]
        events = self.drift_events if kind != DriftKind.NONE else 0
        return DriftSpec(kind=kind, events=events, velocity_scale=self.velocity_scale)


@dataclass(frozen=True)
class DetectorConfig:
    kind: str = "cbpdd"  # cbpdd | adwin | ddm
    f: float = 1.0
    tau: int = 1000
    window: int = 100
    alpha: float = 0.01
    feature: int | str = 0  # column index or "parity"
    min_trials: int = 5
    adwin_delta: float = 0.002
    adwin_monitor: str = "error"  # error | feature
    adwin_feature: int = 0
    ddm_warm_up: int = 30

    def checkerboard(self) -> cbpdd.CheckerboardParams:
        feature = None if self.feature == "parity" else int(self.feature)
        window = min(self.window, self.tau // 2)  # keep both windows inside the trial
        return cbpdd.CheckerboardParams(
            f=self.f, tau=self.tau, window=window, alpha=self.alpha,
            feature=feature, min_trials=self.min_trials)


@dataclass(frozen=True)
class ModelConfig:
    kind: str = "none"  # none | rc | tc
    threshold: float = 0.0
    feature: int = 0
    mix_start: float = 0.0
    mix_end: float | None = None

    def deployed(self):
        if self.kind == "none":
            return None
        if self.kind == "rc":
            return "rc"
        if self.kind == "tc":
            return ThresholdModel(threshold=self.threshold, positive_class=1, feature=self.feature)
        raise ValueError(f"unknown model kind {self.kind!r}")

    def mix(self) -> MixPolicy:
        return MixPolicy(start=self.mix_start, end=self.mix_end)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    generator: GeneratorConfig = GeneratorConfig()
    detector: DetectorConfig = DetectorConfig()
    model: ModelConfig = ModelConfig()
    horizon: int = 100_000
    repetitions: int = 50
    base_seed: int = 20260809
    sigma_grid: tuple[float, ...] = (0.0, 0.0001, 0.001, 0.01, 0.1)
    sweep_param: str = "sigma"  # sigma | tau | f | mix | events
    sweep_values: tuple[float, ...] = ()

    def cells(self) -> list[tuple[float, float]]:
        """(swept_value, sigma) pairs, in declaration order."""
        if self.sweep_param == "sigma":
            return [(s, s) for s in self.sigma_grid]
        return [(v, s) for v in self.sweep_values for s in self.sigma_grid]

    def cell_config(self, swept_value: float, sigma: float) -> "CellConfig":
        gen, det, model = self.generator, self.detector, self.model
        if self.sweep_param == "tau":
            det = replace(det, tau=int(swept_value))
        elif self.sweep_param == "f":
            det = replace(det, f=float(swept_value))
        elif self.sweep_param == "mix":
            model = replace(model, mix_start=float(swept_value))
        elif self.sweep_param == "events":
            gen = replace(gen, drift_events=int(swept_value))
        elif self.sweep_param != "sigma":
            raise ValueError(f"unknown swept parameter {self.sweep_param!r}")
        return CellConfig(scenario=self.name, generator=gen, detector=det, model=model,
                          horizon=self.horizon, base_seed=self.base_seed, sigma=sigma,
                          swept_param=self.sweep_param, swept_value=swept_value)


@dataclass(frozen=True)
class CellConfig:
    """One fully resolved (swept value, sigma) combination."""

    scenario: str
    generator: GeneratorConfig
    detector: DetectorConfig
    model: ModelConfig
    horizon: int
    base_seed: int
    sigma: float
    swept_param: str
    swept_value: float


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    gen_doc = dict(doc.get("generator", {}))
    feedback = gen_doc.pop("feedback", {"0": "fulfilling", "1": "fulfilling"})
    targets = gen_doc.pop("targets", {"0": 0, "1": 1})
    drift_doc = dict(doc.get("drift", {}))
    dataset_doc = dict(doc.get("dataset", {}))
    gen = GeneratorConfig(
        kind=gen_doc.get("kind", "equidistant"),
        per_class=int(gen_doc.get("per_class", 100)),
        spread=float(gen_doc.get("spread", 0.01)),
        weights_random=bool(gen_doc.get("weights_random", True)),
        feedback_mode=gen_doc.get("feedback_mode", "transfer"),
        loops=(str(feedback.get("0", feedback.get(0, "fulfilling"))),
               str(feedback.get("1", feedback.get(1, "fulfilling")))),
        targets=(int(targets.get("0", targets.get(0, 0))),
                 int(targets.get("1", targets.get(1, 1)))),
        drift_kind=drift_doc.get("kind", "none"),
        drift_events=int(drift_doc.get("events", 0)),
        velocity_scale=float(drift_doc.get("velocity_scale", 0.0001)),
        dataset_path=dataset_doc.get("path"),
        label_column=dataset_doc.get("label_column"),
        positive_label=None if dataset_doc.get("positive_label") is None
        else str(dataset_doc.get("positive_label")),
    )
    det_doc = dict(doc.get("detector", {}))
    det = DetectorConfig(
        kind=det_doc.get("kind", "cbpdd"),
        f=float(det_doc.get("f", 1.0)),
        tau=int(det_doc.get("tau", 1000)),
        window=int(det_doc.get("window", 100)),
        alpha=float(det_doc.get("alpha", 0.01)),
        feature=det_doc.get("feature", 0),
        min_trials=int(det_doc.get("min_trials", 5)),
        adwin_delta=float(det_doc.get("adwin_delta", 0.002)),
        adwin_monitor=det_doc.get("adwin_monitor", "error"),
        adwin_feature=int(det_doc.get("adwin_feature", 0)),
        ddm_warm_up=int(det_doc.get("ddm_warm_up", 30)),
    )
    model_doc = dict(doc.get("model", {}))
    mix = model_doc.get("mix", 0.0)
    if isinstance(mix, dict):
        mix_start, mix_end = float(mix["start"]), float(mix["end"])
    else:
        mix_start, mix_end = float(mix), None
    model = ModelConfig(
        kind=model_doc.get("kind", "none"),
        threshold=float(model_doc.get("threshold", 0.0)),
        feature=int(model_doc.get("feature", 0)),
        mix_start=mix_start,
        mix_end=mix_end,
    )
    sweep_doc = dict(doc.get("sweep", {"parameter": "sigma"}))
    return ScenarioConfig(
        name=doc["name"],
        generator=gen,
        detector=det,
        model=model,
        horizon=int(doc.get("horizon", 100_000)),
        repetitions=int(doc.get("repetitions", 50)),
        base_seed=int(doc.get("base_seed", 20260809)),
        sigma_grid=tuple(float(s) for s in doc.get("sigma_grid", (0.0, 0.0001, 0.001, 0.01, 0.1))),
        sweep_param=sweep_doc.get("parameter", "sigma"),
        sweep_values=tuple(float(v) for v in sweep_doc.get("values", ())),
    )


def bundled_scenario_names() -> list[str]:
    root = resources.files("perfdrift") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(ref: str | Path, data_dir: str | Path | None = None) -> ScenarioConfig:
    """Load a scenario by bundled name or filesystem path.

    ``data_dir`` rebases a relative dataset path (user-supplied CSVs live
    outside the repo).
    """
    path = Path(ref)
    if path.suffix in (".yaml", ".yml") and path.exists():
        text = path.read_text(encoding="utf-8")
    else:
        candidate = resources.files("perfdrift") / "scenarios" / f"{ref}.yaml"
        if not candidate.is_file():
            raise FileNotFoundError(
                f"no scenario file {ref!r}; bundled names: {', '.join(bundled_scenario_names())}")
        text = candidate.read_text(encoding="utf-8")
    scenario = scenario_from_dict(yaml.safe_load(text))
    if data_dir and scenario.generator.dataset_path:
        ds = Path(scenario.generator.dataset_path)
        if not ds.is_absolute():
            scenario = replace(scenario, generator=replace(
                scenario.generator, dataset_path=str(Path(data_dir) / ds)))
    return scenario


# --------------------------------------------------------------------------
# execution

_DATASET_CACHE: dict[tuple[str, str, str], NormalizedDataset] = {}


def _normalized_dataset(cfg: GeneratorConfig) -> NormalizedDataset:
    if not (cfg.dataset_path and cfg.label_column and cfg.positive_label is not None):
        raise ValueError("dataset scenarios need dataset.path, label_column and positive_label")
    key = (cfg.dataset_path, cfg.label_column, cfg.positive_label)
    if key not in _DATASET_CACHE:
        raw = load_csv(cfg.dataset_path, cfg.label_column, cfg.positive_label)
        _DATASET_CACHE[key] = normalize(raw)
    return _DATASET_CACHE[key]


def build_generator(cell: CellConfig, rep_index: int) -> GeneratorState:
    rng = np.random.Generator(np.random.PCG64(repetition_seed(cell.base_seed, rep_index)))
    gen = cell.generator
    feedback = gen.feedback(cell.sigma)
    if gen.kind == "equidistant":
        schema = make_stream_schema(1, [FeatureRange(-1.0, 1.0)])
        return GeneratorState.equidistant(
            schema, gen.per_class, spread=gen.spread, weights_random=gen.weights_random,
            rng=rng, feedback=feedback, drift=gen.drift(), horizon=cell.horizon,
            feedback_mode=gen.feedback_mode)
    if gen.kind == "dataset":
        data = _normalized_dataset(gen)
        return GeneratorState.from_dataset(
            data.schema, data.features, data.labels,
            feedback=feedback, rng=rng, horizon=cell.horizon,
            feedback_mode=gen.feedback_mode)
    raise ValueError(f"unknown generator kind {gen.kind!r}")


def _routing(cell: CellConfig) -> RoutingConfig:
    det = cell.detector
    if det.kind == "cbpdd":
        return RoutingConfig(checkerboard=det.checkerboard(),
                             model=cell.model.deployed(), mix=cell.model.mix())
    # traditional detectors observe a deployed model handling the whole stream
    deployed = cell.model.deployed()
    if deployed is None:
        raise ValueError(f"{det.kind} runs need a deployed model (rc or tc)")
    return RoutingConfig(checkerboard=None, model=deployed, mix=MixPolicy(start=1.0))


@dataclass(frozen=True)
class RepetitionOutcome:
    detected: tuple[bool, bool]
    p_values: tuple[float, float]
    trials_used: tuple[int, int]
    skipped: tuple[int, int]

    @property
    def any_detected(self) -> bool:
        return self.detected[0] or self.detected[1]

    @property
    def all_detected(self) -> bool:
        return self.detected[0] and self.detected[1]


def run_repetition(cell: CellConfig, rep_index: int) -> RepetitionOutcome:
    """One seeded stream through the configured detector."""
    state = build_generator(cell, rep_index)
    recording = state.run(_routing(cell))
    det = cell.detector
    if det.kind == "cbpdd":
        report = cbpdd.detect(recording, det.checkerboard())
        c0, c1 = report.per_class[0], report.per_class[1]
        return RepetitionOutcome(
            detected=(c0.detected, c1.detected),
            p_values=(c0.p_value, c1.p_value),
            trials_used=(c0.trials_used, c1.trials_used),
            skipped=(c0.skipped, c1.skipped),
        )
    if det.kind == "adwin":
        if det.adwin_monitor == "feature":
            signal = np.ascontiguousarray(recording.features[:, det.adwin_feature])
        elif det.adwin_monitor == "error":
            signal = np.ascontiguousarray((recording.yhat != recording.y), dtype=np.float64)
        else:
            raise ValueError(f"unknown adwin monitor {det.adwin_monitor!r}")
        hit = len(engine.adwin_run(signal, delta=det.adwin_delta)) > 0
    elif det.kind == "ddm":
        errors = np.ascontiguousarray((recording.yhat != recording.y), dtype=np.uint8)
        hit = len(engine.ddm_run(errors, warm_up=det.ddm_warm_up)) > 0
    else:
        raise ValueError(f"unknown detector kind {det.kind!r}")
    nan = float("nan")
    return RepetitionOutcome(detected=(hit, hit), p_values=(nan, nan),
                             trials_used=(0, 0), skipped=(0, 0))


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    swept_param: str
    swept_value: float
    sigma: float
    label: int
    detection_rate: float
    any_rate: float
    all_rate: float
    mean_p: float  # nan for detectors without p-values
    n: int


def aggregate(cell: CellConfig, outcomes: list[RepetitionOutcome]) -> list[ResultRow]:
    n = len(outcomes)
    any_rate = sum(o.any_detected for o in outcomes) / n
    all_rate = sum(o.all_detected for o in outcomes) / n
    rows = []
    for label in (0, 1):
        rate = sum(o.detected[label] for o in outcomes) / n
        ps = [o.p_values[label] for o in outcomes]
        mean_p = float(np.mean(ps)) if not any(math.isnan(p) for p in ps) else float("nan")
        rows.append(ResultRow(
            scenario=cell.scenario, swept_param=cell.swept_param,
            swept_value=cell.swept_value, sigma=cell.sigma, label=label,
            detection_rate=rate, any_rate=any_rate, all_rate=all_rate,
            mean_p=mean_p, n=n))
    return rows


def _run_chunk(args) -> tuple[int, int, list[RepetitionOutcome]]:
    cell, cell_idx, rep_start, rep_end = args
    try:
        return cell_idx, rep_start, [run_repetition(cell, r) for r in range(rep_start, rep_end)]
    except Exception as exc:
        raise RuntimeError(
            f"scenario {cell.scenario!r} failed at swept_value={cell.swept_value} "
            f"sigma={cell.sigma} repetitions {rep_start}..{rep_end - 1}: {exc}") from exc


def run_experiment(scenario: ScenarioConfig, jobs: int | None = None,
                   base_seed: int | None = None) -> list[ResultRow]:
    """Execute every (swept value, sigma, repetition) combination and aggregate.

    Repetitions run in parallel across processes; aggregation order is fixed,
    so the output is identical to a sequential run.
    """
    if base_seed is not None:
        scenario = replace(scenario, base_seed=base_seed)
    cells = [scenario.cell_config(v, s) for v, s in scenario.cells()]
    n_reps = scenario.repetitions
    jobs = jobs or min(os.cpu_count() or 1, 8)

    if scenario.generator.kind == "dataset":  # load once, share with forked workers
        _normalized_dataset(scenario.generator)

    chunk = n_reps if len(cells) >= 2 * jobs else max(1, math.ceil(n_reps / jobs))
    tasks = []
    for idx, cell in enumerate(cells):
        for start in range(0, n_reps, chunk):
            tasks.append((cell, idx, start, min(start + chunk, n_reps)))

    per_cell: dict[int, dict[int, list[RepetitionOutcome]]] = {i: {} for i in range(len(cells))}
    if jobs == 1 or len(tasks) == 1:
        results = map(_run_chunk, tasks)
    else:
        pool = ProcessPoolExecutor(max_workers=jobs)
        try:
            results = list(pool.map(_run_chunk, tasks))
        finally:
            pool.shutdown()
    for cell_idx, rep_start, outcomes in results:
        per_cell[cell_idx][rep_start] = outcomes

    rows: list[ResultRow] = []
    for idx, cell in enumerate(cells):
        ordered: list[RepetitionOutcome] = []
        for start in sorted(per_cell[idx]):
            ordered.extend(per_cell[idx][start])
        rows.extend(aggregate(cell, ordered))
    return rows


# --------------------------------------------------------------------------
# serialization

def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return ""
    return format(value, ".10g")


def write_results(rows: list[ResultRow], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_HEADER)
        for r in rows:
            writer.writerow([
                r.scenario, r.swept_param, _fmt(r.swept_value), _fmt(r.sigma), r.label,
                _fmt(r.detection_rate), _fmt(r.any_rate), _fmt(r.all_rate),
                _fmt(r.mean_p), r.n,
            ])


def read_results(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_stream_csv(recording: StreamRecording, path) -> None:
    """Raw stream dump: t, f0..fk, y, yhat, source (cb | model)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dims = recording.schema.dims
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"f{d}" for d in range(dims)] + ["y", "yhat", "source"])
        for t in range(len(recording)):
            writer.writerow(
                [t] + [format(v, ".17g") for v in recording.features[t]]
                + [int(recording.y[t]), int(recording.yhat[t]),
                   "cb" if recording.source[t] == int(Source.CHECKERBOARD) else "model"])


def read_stream_csv(path) -> StreamRecording:
    """Load a stream dump; feature ranges are inferred ([-1,1] or [0,1])."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dims = sum(1 for c in header if c.startswith("f") and c[1:].isdigit())
        feats, ys, yhats, srcs = [], [], [], []
        for line in reader:
            feats.append([float(v) for v in line[1:1 + dims]])
            ys.append(int(line[1 + dims]))
            yhats.append(int(line[2 + dims]))
            srcs.append(0 if line[3 + dims] == "cb" else 1)
    features = np.asarray(feats, dtype=np.float64)
    if len(features) == 0:
        raise ValueError(f"{path} holds no stream rows")
    ranges = [
        FeatureRange(-1.0, 1.0) if features[:, d].min() < 0.0 else FeatureRange(0.0, 1.0)
        for d in range(dims)
    ]
    return StreamRecording(make_stream_schema(dims, ranges), features, ys, yhats, srcs)


def summarize(rows: list[dict]) -> str:
    """Plain-text table of a results CSV for terminal display."""
    if not rows:
        return "(no result rows)"
    cols = RESULT_HEADER
    widths = {c: max(len(c), max(len(str(r.get(c, ""))) for r in rows)) for c in cols}
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    lines.append("  ".join("-" * widths[c] for c in cols))
    for r in rows:
        lines.append("  ".join(str(r.get(c, "")).ljust(widths[c]) for c in cols))
    return "\n".join(lines)
