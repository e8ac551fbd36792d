"""Engine selection: compiled kernel when available, pure Python otherwise.

Set ``PERFDRIFT_PURE_PYTHON=1`` to force the fallback (used by the benchmark
and the cross-engine tests). Both engines implement the same contract and
produce bit-identical streams for the same seed.
"""

from __future__ import annotations

import os

from . import _pykernel

__all__ = ["backend", "get_engine", "run_stream", "adwin_run", "ddm_run", "_pykernel"]

_FORCED_PYTHON = os.environ.get("PERFDRIFT_PURE_PYTHON", "") not in ("", "0")

try:
    from . import _kernel  # compiled extension; absent on pure installs
except ImportError:  # pragma: no cover - depends on the build environment
    _kernel = None

_ACTIVE = _pykernel if (_FORCED_PYTHON or _kernel is None) else _kernel

# each engine raises its own class; callers catch the pair
DEGENERATE_ERRORS = tuple(
    mod.DegenerateWeightsError for mod in (_pykernel, _kernel) if mod is not None
)


def backend() -> str:
    """Name of the active engine: ``"cython"`` or ``"python"``."""
    return "python" if _ACTIVE is _pykernel else "cython"


def get_engine(name: str | None = None):
    """Return an engine module by name (``None`` = the active one)."""
    if name in (None, "auto"):
        return _ACTIVE
    if name == "python":
        return _pykernel
    if name == "cython":
        if _kernel is None:
            raise RuntimeError("compiled kernel is not available in this install")
        return _kernel
    raise ValueError(f"unknown engine {name!r}")


run_stream = _ACTIVE.run_stream
adwin_run = _ACTIVE.adwin_run
ddm_run = _ACTIVE.ddm_run
