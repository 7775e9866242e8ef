"""Ground-truth observers: stopping predicates, potentials, traces, drift.

Everything here reads true OneMax values of genomes, which the algorithms
themselves never look at.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

TRACE_COLUMNS = ("t", "L", "d", "ell", "j", "covered", "extremes_noisy", "extremes_true")


def _is_cached(pop) -> bool:
    return getattr(pop, "kind", None) == "cached"


def true_values(pop) -> list[int]:
    if _is_cached(pop):
        return [m.genome.ones for m in pop.members]
    return [x.ones for x in pop.members]


def pareto_covered(pop) -> bool:
    """True iff the true values of the members are exactly ``[0..n]``."""
    vals = set(true_values(pop))
    return len(vals) == pop.n + 1 and min(vals) == 0 and max(vals) == pop.n


def extremes_found(pop, mode: str = "true_values") -> bool:
    """Whether both extreme values 0 and n are present.

    Args:
        pop: A cached or reevaluating population.
        mode: ``"noisy_cached"`` tests the stored noisy values (cached
            populations only); ``"true_values"`` tests true values.
    """
    if mode == "noisy_cached":
        if not _is_cached(pop):
            raise ValueError("noisy_cached mode needs a cached population")
        vals = {m.value[0] for m in pop.members}
    elif mode == "true_values":
        vals = set(true_values(pop))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return 0 in vals and pop.n in vals


def default_extremes_mode(pop) -> str:
    return "noisy_cached" if _is_cached(pop) else "true_values"


def potential_ell(pop) -> int:
    """``j + 1``, minus one when the member holding the minimal stored value ``j`` is correctly valued."""
    if not pop.members:
        raise ValueError("empty population")
    holder = min(pop.members, key=lambda m: m.value[0])
    j = holder.value[0]
    return j + 1 - (1 if holder.genome.ones == j else 0)


@dataclass(frozen=True)
class TraceSample:
    t: int
    L: int
    d: int
    ell: Optional[int]
    j: Optional[int]
    covered: bool
    extremes_noisy: Optional[bool]
    extremes_true: bool


def trace_sample(pop) -> TraceSample:
    vals = true_values(pop)
    distinct = set(vals)
    n = pop.n
    L = len(distinct)
    if _is_cached(pop):
        ell = potential_ell(pop)
        j = min(m.value[0] for m in pop.members)
        noisy = extremes_found(pop, "noisy_cached")
    else:
        ell = j = noisy = None
    return TraceSample(
        t=pop.iteration,
        L=L,
        d=n + min(vals) - max(vals),
        ell=ell,
        j=j,
        covered=L == n + 1,
        extremes_noisy=noisy,
        extremes_true=0 in distinct and n in distinct,
    )


class Trace:
    """Columnar trace; ``ell``, ``j`` and ``extremes_noisy`` hold -1 where undefined."""

    def __init__(self, columns: dict):
        self.columns = {name: np.asarray(columns[name], dtype=np.int64) for name in TRACE_COLUMNS}

    @classmethod
    def from_samples(cls, samples: Iterable[TraceSample]) -> "Trace":
        rows = [
            (
                s.t,
                s.L,
                s.d,
                -1 if s.ell is None else s.ell,
                -1 if s.j is None else s.j,
                int(s.covered),
                -1 if s.extremes_noisy is None else int(s.extremes_noisy),
                int(s.extremes_true),
            )
            for s in samples
        ]
        arr = np.array(rows, dtype=np.int64).reshape(-1, len(TRACE_COLUMNS))
        return cls({name: arr[:, i] for i, name in enumerate(TRACE_COLUMNS)})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["t"])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return all(np.array_equal(self[c], other[c]) for c in TRACE_COLUMNS)

    def samples(self) -> list[TraceSample]:
        out = []
        for row in zip(*(self.columns[c].tolist() for c in TRACE_COLUMNS)):
            t, L, d, ell, j, cov, noisy, ext = row
            out.append(
                TraceSample(
                    t, L, d,
                    None if ell < 0 else ell,
                    None if j < 0 else j,
                    bool(cov),
                    None if noisy < 0 else bool(noisy),
                    bool(ext),
                )
            )
        return out


@dataclass
class RunRecord:
    """Outcome of one trial.

    Censored times hold the number of iterations actually run, a lower bound
    on the true stopping time.
    """

    variant: str
    n: int
    p: float
    K: float
    seed: Optional[int]
    budget: int
    T_total: int
    T_total_censored: bool
    T_ex: int
    T_ex_censored: bool
    iterations: int
    evaluations: int
    trace: Optional[Trace] = field(default=None, compare=False)
    population: tuple = field(default=(), compare=False)


@dataclass(frozen=True)
class DriftEstimate:
    value: float
    mean: float
    ci_low: float
    ci_high: float
    count: int


def _one_step_pairs(traces: Iterable[Trace], name: str):
    before, after = [], []
    for tr in traces:
        t = tr["t"]
        x = tr[name]
        if len(t) < 2:
            continue
        ok = (t[1:] == t[:-1] + 1) & (x[:-1] >= 0) & (x[1:] >= 0)
        before.append(x[:-1][ok])
        after.append(x[1:][ok])
    if not before:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(before), np.concatenate(after)


def _estimate(deltas: np.ndarray, z: float) -> tuple[float, float, float]:
    mean = float(deltas.mean())
    if len(deltas) > 1:
        half = z * float(deltas.std(ddof=1)) / math.sqrt(len(deltas))
    else:
        half = math.inf
    return mean, mean - half, mean + half


def estimate_drift(
    traces: Sequence[Trace],
    field_name: str = "L",
    condition: Callable[[int], bool] | None = None,
    confidence: float = 0.95,
    min_samples: int = 30,
) -> list[DriftEstimate]:
    """Per-value mean one-step change ``X[t+1] - X[t]`` given ``X[t] = v``.

    Only consecutive samples (stride 1) contribute. Values with fewer than
    ``min_samples`` transitions are dropped with a warning.
    """
    if not traces:
        raise ValueError("no traces given")
    if field_name not in ("L", "d", "ell"):
        raise ValueError(f"drift field must be L, d or ell, not {field_name!r}")
    from scipy.stats import norm

    z = float(norm.ppf(0.5 + confidence / 2))
    x0, x1 = _one_step_pairs(traces, field_name)
    out = []
    skipped = []
    for v in np.unique(x0):
        if condition is not None and not condition(int(v)):
            continue
        deltas = x1[x0 == v] - v
        if len(deltas) < min_samples:
            skipped.append(int(v))
            continue
        mean, lo, hi = _estimate(deltas, z)
        out.append(DriftEstimate(float(v), mean, lo, hi, len(deltas)))
    if skipped:
        warnings.warn(f"drift of {field_name}: too few samples for values {skipped}", stacklevel=2)
    return out


def pooled_drift(
    traces: Sequence[Trace],
    field_name: str = "L",
    condition: Callable[[int], bool] | None = None,
    confidence: float = 0.95,
) -> DriftEstimate:
    """Mean one-step change over all transitions whose start value meets ``condition``."""
    if not traces:
        raise ValueError("no traces given")
    from scipy.stats import norm

    z = float(norm.ppf(0.5 + confidence / 2))
    x0, x1 = _one_step_pairs(traces, field_name)
    if condition is not None:
        keep = condition(x0)  # vectorised predicates like ``lambda v: v >= 90``
        if not (isinstance(keep, np.ndarray) and keep.shape == x0.shape):
            keep = np.fromiter((condition(int(v)) for v in x0), bool, len(x0))
        x0, x1 = x0[keep], x1[keep]
    if len(x0) == 0:
        return DriftEstimate(math.nan, math.nan, math.nan, math.nan, 0)
    mean, lo, hi = _estimate(x1 - x0, z)
    return DriftEstimate(math.nan, mean, lo, hi, len(x0))


def jump_frequencies(traces: Sequence[Trace], field_name: str = "L") -> dict[int, int]:
    """Histogram of ``|X[t+1] - X[t]|`` over consecutive samples."""
    x0, x1 = _one_step_pairs(traces, field_name)
    sizes, counts = np.unique(np.abs(x1 - x0), return_counts=True)
    return {int(s): int(c) for s, c in zip(sizes, counts)}
