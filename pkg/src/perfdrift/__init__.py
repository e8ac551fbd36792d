"""Performative drift simulation and checkerboard intervention detection.

A weighted-centroid stream generator with prediction feedback loops, the
three-stage checkerboard drift detector, baseline detectors (ADWIN, DDM),
and a seeded experiment harness. The hot stream loop runs on a compiled
kernel when available and on a bit-identical pure-Python engine otherwise
(see :func:`perfdrift.engine.backend`).
"""

from . import baselines, cbpdd, datasets, engine, generator, harness, stats, stream_model
from .engine import backend

__version__ = "0.1.0"

__all__ = [
    "backend",
    "baselines",
    "cbpdd",
    "datasets",
    "engine",
    "generator",
    "harness",
    "stats",
    "stream_model",
    "__version__",
]
