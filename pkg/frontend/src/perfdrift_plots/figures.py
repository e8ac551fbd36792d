"""Figure rendering over the documented perfdrift CSV schemas.

Results CSV: scenario,swept_param,swept_value,sigma,class,detection_rate,
any_rate,all_rate,mean_p,n -- one row per (cell, class).
Stream CSV: t,f0..fk,y,yhat,source.

This package reads those files only; it never imports the simulation library,
so either side can be rebuilt independently. Output is deterministic SVG
(fixed hash salt, no embedded dates); PNG is available via the CLI flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "perfdrift-plots"

RATE_COLUMNS = ("detection_rate", "any_rate", "all_rate")


class FigureError(ValueError):
    """Unusable input: missing file, empty body, or unknown columns."""


@dataclass(frozen=True)
class FigureSpec:
    """One detection-rate figure: x = swept value, one line per sigma."""

    input_path: str
    output_path: str
    y_column: str = "detection_rate"
    title: str | None = None

    def __post_init__(self):
        if self.y_column not in RATE_COLUMNS:
            raise FigureError(f"y column must be one of {RATE_COLUMNS}, got {self.y_column!r}")


def _read_rows(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        raise FigureError(f"input CSV not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise FigureError(f"{path} holds a header but no data rows")
    return rows


def _save(fig, output_path):
    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    fmt = output_path.suffix.lstrip(".").lower() or "svg"
    fig.savefig(output_path, format=fmt, metadata={"Date": None} if fmt == "svg" else None)
    plt.close(fig)


def render_rate_figure(spec: FigureSpec) -> Path:
    """Line plot of a results CSV: detection rate vs swept value, per sigma.

    ``detection_rate`` rows come per class; they are averaged per cell (the
    harness's headline rate). ``any_rate``/``all_rate`` are cell-level already.
    """
    rows = _read_rows(spec.input_path)
    required = {"scenario", "swept_param", "swept_value", "sigma", spec.y_column}
    missing = required - set(rows[0])
    if missing:
        raise FigureError(f"{spec.input_path} lacks columns: {sorted(missing)}")

    cells: dict[tuple[float, float], list[float]] = {}
    for row in rows:
        key = (float(row["sigma"]), float(row["swept_value"]))
        cells.setdefault(key, []).append(float(row[spec.y_column]))
    series: dict[float, list[tuple[float, float]]] = {}
    for (sigma, swept), ys in sorted(cells.items()):
        series.setdefault(sigma, []).append((swept, sum(ys) / len(ys)))

    scenario = rows[0]["scenario"]
    swept_param = rows[0]["swept_param"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for sigma, points in series.items():
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        ax.plot(xs, ys, marker="o", label=f"sigma={sigma:g}")
    ax.set_xlabel(swept_param)
    ax.set_ylabel(spec.y_column.replace("_", " "))
    ax.set_ylim(0.0, 1.0)
    ax.set_title(spec.title or scenario)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize="small")
    _save(fig, spec.output_path)
    return Path(spec.output_path)


def render_stream_density(stream_csv, output_path, bins: int = 50,
                          bucket: int = 1000, feature: int = 0,
                          title: str | None = None) -> Path:
    """Majority-class map over (time bucket x feature bin) of a stream CSV.

    Cell colour encodes the majority true class of the instances falling in
    that bucket/bin; empty cells stay blank. Saturation shows up as solid
    bands that stop changing over time.
    """
    rows = _read_rows(stream_csv)
    col = f"f{feature}"
    for needed in ("t", col, "y"):
        if needed not in rows[0]:
            raise FigureError(f"{stream_csv} lacks column {needed!r}")
    t = np.array([int(r["t"]) for r in rows])
    x = np.array([float(r[col]) for r in rows])
    y = np.array([int(r["y"]) for r in rows])

    n_buckets = int(t.max() // bucket) + 1
    lo, hi = float(x.min()), float(x.max())
    if hi <= lo:
        hi = lo + 1e-9
    xbin = np.minimum(((x - lo) / (hi - lo) * bins).astype(int), bins - 1)
    tbin = np.minimum(t // bucket, n_buckets - 1)

    counts = np.zeros((2, bins, n_buckets), dtype=np.int64)
    np.add.at(counts, (y, xbin, tbin), 1)
    total = counts.sum(axis=0)
    share1 = np.divide(counts[1], total, out=np.full(total.shape, np.nan, dtype=float),
                       where=total > 0)

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    mesh = ax.imshow(share1, origin="lower", aspect="auto",
                     extent=(0, n_buckets * bucket, lo, hi),
                     cmap="coolwarm", vmin=0.0, vmax=1.0, interpolation="nearest")
    fig.colorbar(mesh, ax=ax, label="class-1 share")
    ax.set_xlabel("timestep")
    ax.set_ylabel(col)
    ax.set_title(title or f"stream density ({Path(str(stream_csv)).stem})")
    _save(fig, output_path)
    return Path(output_path)
