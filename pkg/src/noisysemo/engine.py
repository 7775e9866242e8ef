"""Backend selection for full trials.

The compiled kernel is used when it was built and ``NOISYSEMO_PURE`` is not
set to ``1``; otherwise trials run on the pure-Python state machines. Both
produce identical records for the same seed.
"""
from __future__ import annotations

import math
import os
from typing import Optional

from .algorithms import AlgorithmConfig, Variant, simulate_python
from .diagnostics import RunRecord, Trace
from .noise import RngHandle

try:
    from . import _kernel
except ImportError:  # pragma: no cover - depends on the build
    _kernel = None

HAVE_EXTENSION = _kernel is not None
DEFAULT_BACKEND = "compiled" if HAVE_EXTENSION and os.environ.get("NOISYSEMO_PURE") != "1" else "python"

_CODES = {Variant.CACHED: 0, Variant.REEVAL: 1, Variant.KEEP: 2}


def simulate_compiled(
    config: AlgorithmConfig, budget: int, seed: int, trace_stride: Optional[int] = None
) -> RunRecord:
    if _kernel is None:
        raise RuntimeError("compiled kernel not available; reinstall with Cython present")
    rng = RngHandle(seed)
    K = config.K if config.variant is Variant.KEEP else 0
    out = _kernel.simulate(
        rng.bit_generator, config.n, config.noise.p, _CODES[config.variant],
        float(K), int(budget), int(trace_stride or 0),
    )
    return RunRecord(
        variant=config.variant.value,
        n=config.n,
        p=config.noise.p,
        K=K,
        seed=seed,
        budget=budget,
        T_total=out["T_total"],
        T_total_censored=out["T_total_censored"],
        T_ex=out["T_ex"],
        T_ex_censored=out["T_ex_censored"],
        iterations=out["iterations"],
        evaluations=out["evaluations"],
        trace=Trace(out["trace"]) if out["trace"] is not None else None,
        population=out["population"],
    )


def simulate(
    config: AlgorithmConfig,
    budget: int,
    seed: int,
    trace_stride: Optional[int] = None,
    backend: Optional[str] = None,
) -> RunRecord:
    """Run one trial from a fresh random start until full coverage or ``budget`` iterations."""
    backend = backend or DEFAULT_BACKEND
    if backend == "compiled":
        return simulate_compiled(config, budget, seed, trace_stride)
    if backend == "python":
        return simulate_python(config, budget, seed, trace_stride)
    raise ValueError(f"unknown backend {backend!r}")


def is_infinite(K) -> bool:
    return isinstance(K, float) and math.isinf(K)
