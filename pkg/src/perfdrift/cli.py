"""perfdrift command line: simulate, detect, experiment, impute, report."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np

from . import cbpdd, engine, harness
from .datasets import load_csv, normalize
from .generator import FeedbackSpec, GeneratorState, RoutingConfig


def _add_simulate(sub):
    p = sub.add_parser("simulate", help="run one seeded stream of a scenario and dump it as CSV")
    p.add_argument("scenario", help="bundled scenario name or path to a YAML file")
    p.add_argument("--out", required=True, help="output stream CSV")
    p.add_argument("--sigma", type=float, default=None,
                   help="feedback strength (default: largest value of the scenario grid)")
    p.add_argument("--value", type=float, default=None,
                   help="swept-parameter value (default: first configured)")
    p.add_argument("--rep", type=int, default=0, help="repetition index (seed offset)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario base seed")
    p.add_argument("--data-dir", default=None, help="directory for user-supplied dataset CSVs")


def _cmd_simulate(args) -> int:
    scenario = harness.load_scenario(args.scenario, data_dir=args.data_dir)
    if args.seed is not None:
        scenario = replace(scenario, base_seed=args.seed)
    sigma = args.sigma if args.sigma is not None else max(scenario.sigma_grid)
    if args.value is not None:
        value = args.value
    elif scenario.sweep_param == "sigma":
        value = sigma
    else:
        value = scenario.sweep_values[0]
    cell = scenario.cell_config(value, sigma)
    state = harness.build_generator(cell, args.rep)
    recording = state.run(harness._routing(cell))
    harness.write_stream_csv(recording, args.out)
    print(f"wrote {len(recording)} instances to {args.out} "
          f"(sigma={sigma}, {scenario.sweep_param}={value}, engine={engine.backend()})")
    return 0


def _add_detect(sub):
    p = sub.add_parser("detect", help="run checkerboard detection over a stream CSV")
    p.add_argument("--in", dest="stream", required=True, help="stream CSV (t,f0..fk,y,yhat,source)")
    p.add_argument("--out", default=None, help="report CSV (default: stdout)")
    p.add_argument("--f", type=float, default=1.0)
    p.add_argument("--tau", type=int, default=1000)
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--feature-mode", default="0",
                   help="feature index for the band pattern, or 'parity'")
    p.add_argument("--min-trials", type=int, default=cbpdd.DEFAULT_MIN_TRIALS)


def _cmd_detect(args) -> int:
    recording = harness.read_stream_csv(args.stream)
    feature = None if args.feature_mode == "parity" else int(args.feature_mode)
    params = cbpdd.CheckerboardParams(
        f=args.f, tau=args.tau, window=min(args.window, args.tau // 2),
        alpha=args.alpha, feature=feature, min_trials=args.min_trials)
    params.validate_for(recording.schema)
    report = cbpdd.detect(recording, params)
    lines = ["class,p_value,detected,trials_used,skipped"]
    for label in (0, 1):
        d = report.per_class[label]
        lines.append(f"{label},{d.p_value:.10g},{str(d.detected).lower()},"
                     f"{d.trials_used},{d.skipped}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def _add_experiment(sub):
    p = sub.add_parser("experiment", help="run a full scenario grid and write result rows")
    p.add_argument("scenario", help="bundled scenario name or path to a YAML file")
    p.add_argument("--out", required=True, help="results CSV path")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: cpu count)")
    p.add_argument("--seed", type=int, default=None, help="override the scenario base seed")
    p.add_argument("--reps", type=int, default=None, help="override the repetition count")
    p.add_argument("--data-dir", default=None, help="directory for user-supplied dataset CSVs")


def _cmd_experiment(args) -> int:
    scenario = harness.load_scenario(args.scenario, data_dir=args.data_dir)
    if args.reps is not None:
        scenario = replace(scenario, repetitions=args.reps)
    rows = harness.run_experiment(scenario, jobs=args.jobs, base_seed=args.seed)
    harness.write_results(rows, args.out)
    print(f"wrote {len(rows)} result rows to {args.out} (engine={engine.backend()})")
    return 0


def _add_impute(sub):
    p = sub.add_parser("impute", help="impute performative drift into a CSV dataset")
    p.add_argument("--dataset", required=True, help="input dataset CSV")
    p.add_argument("--label-col", required=True, help="name of the label column")
    p.add_argument("--positive-label", default="1", help="label value mapped to class 1")
    p.add_argument("--sigma", type=float, required=True, help="feedback strength")
    p.add_argument("--loop", choices=("fulfilling", "defeating"), default="fulfilling")
    p.add_argument("--out", required=True, help="output stream CSV")
    p.add_argument("--instances", type=int, default=100_000, help="stream length T")
    p.add_argument("--f", type=float, default=0.5)
    p.add_argument("--tau", type=int, default=1000)
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--feature-mode", default="0")
    p.add_argument("--seed", type=int, default=20260809)
    p.add_argument("--feedback-mode", choices=("selected", "transfer"), default="transfer",
                   help="selected: raw +/-sigma on the emitting centroid; "
                        "transfer: class-conserving mass transfer (default)")


def _cmd_impute(args) -> int:
    data = normalize(load_csv(args.dataset, args.label_col, args.positive_label))
    make = FeedbackSpec.self_fulfilling if args.loop == "fulfilling" else FeedbackSpec.self_defeating
    rng = np.random.Generator(np.random.PCG64(args.seed))
    state = GeneratorState.from_dataset(
        data.schema, data.features, data.labels,
        feedback=make(args.sigma), rng=rng, horizon=args.instances,
        feedback_mode=args.feedback_mode)
    feature = None if args.feature_mode == "parity" else int(args.feature_mode)
    params = cbpdd.CheckerboardParams(
        f=args.f, tau=args.tau, window=min(args.window, args.tau // 2), feature=feature)
    recording = state.run(RoutingConfig(checkerboard=params))
    harness.write_stream_csv(recording, args.out)
    dropped = data.report.dropped_rows
    print(f"imputed {len(recording)} instances from {data.name} "
          f"({len(data.features)} rows kept, {dropped} dropped) -> {args.out}")
    return 0


def _add_report(sub):
    p = sub.add_parser("report", help="print a results CSV as a terminal table")
    p.add_argument("--in", dest="results", required=True, help="results CSV")


def _cmd_report(args) -> int:
    print(harness.summarize(harness.read_results(args.results)))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="perfdrift",
        description="Performative drift simulation and checkerboard detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_simulate(sub)
    _add_detect(sub)
    _add_experiment(sub)
    _add_impute(sub)
    _add_report(sub)
    args = parser.parse_args(argv)
    handler = {
        "simulate": _cmd_simulate,
        "detect": _cmd_detect,
        "experiment": _cmd_experiment,
        "impute": _cmd_impute,
        "report": _cmd_report,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    raise SystemExit(main())
