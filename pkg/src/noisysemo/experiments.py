"""Seeded trial batteries, parameter sweeps, summaries and scaling fits."""
from __future__ import annotations

import math
import re
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .algorithms import AlgorithmConfig, Variant, budget_for
from .diagnostics import RunRecord
from .engine import simulate
from .noise import NoiseSpec, derive_seeds


class RuleError(ValueError):
    """Unparseable noise-rate rule; ``position`` indexes the offending character."""

    def __init__(self, text: str, position: int, expected: str):
        self.text = text
        self.position = position
        super().__init__(f"bad noise rule {text!r} at position {position}: expected {expected}\n"
                         f"  {text}\n  {' ' * position}^")


_NUMBER = re.compile(r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?")


@dataclass(frozen=True)
class NoiseRule:
    """Noise rate ``coef * ln(n)**log_power / n**n_power``.

    Text forms: ``0.01``, ``0.25/n``, ``0.1/n2``, ``4logn/n2``, ``logn/n^2``.
    """

    coef: float
    log_power: int = 0
    n_power: int = 0
    text: str = ""

    @classmethod
    def parse(cls, text: str) -> "NoiseRule":
        s = text
        i = 0
        coef = 1.0
        m = _NUMBER.match(s, i)
        if m:
            coef = float(m.group())
            i = m.end()
            if s.startswith("*", i):
                i += 1
        log_power = 0
        if s.startswith("logn", i) or s.startswith("lnn", i):
            log_power = 1
            i += 4 if s.startswith("logn", i) else 3
        elif not m:
            raise RuleError(text, i, "a number or 'logn'")
        n_power = 0
        if i < len(s) and s[i] == "/":
            i += 1
            if not s.startswith("n", i):
                raise RuleError(text, i, "'n'")
            i += 1
            if s.startswith("^", i):
                i += 1
            digits = re.compile(r"[0-9]+").match(s, i)
            if digits:
                n_power = int(digits.group())
                i = digits.end()
            elif s.startswith("^", i - 1):
                raise RuleError(text, i, "an exponent")
            else:
                n_power = 1
        if i != len(s):
            raise RuleError(text, i, "end of rule" if i else "a number or 'logn'")
        return cls(coef, log_power, n_power, text)

    @classmethod
    def constant(cls, p: float) -> "NoiseRule":
        return cls(float(p), 0, 0, repr(float(p)))

    def __call__(self, n: int) -> float:
        p = self.coef * math.log(n) ** self.log_power / n**self.n_power
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"rule {self.text!r} gives p={p} outside [0, 1] at n={n}")
        return p

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class VariantSpec:
    variant: Variant
    K: float = 0

    @classmethod
    def parse(cls, text: str, K: Optional[float] = None) -> "VariantSpec":
        t = text.strip().lower()
        if t in ("cached", "reeval"):
            return cls(Variant(t))
        if t.startswith("keep"):
            suffix = t[4:]
            if suffix in ("", "k"):
                if K is None:
                    raise ValueError(f"variant {text!r} needs --K")
                return cls(Variant.KEEP, K)
            if suffix in ("inf", "infinity"):
                return cls(Variant.KEEP, math.inf)
            if suffix.isdigit():
                return cls(Variant.KEEP, int(suffix))
        raise ValueError(f"unknown variant {text!r}; expected cached, reeval or keep<K>")

    @property
    def code(self) -> int:
        return {Variant.CACHED: 0, Variant.REEVAL: 1, Variant.KEEP: 2}[self.variant]

    def __str__(self) -> str:
        if self.variant is Variant.KEEP:
            return "keepinf" if math.isinf(self.K) else f"keep{int(self.K)}"
        return self.variant.value


@dataclass(frozen=True)
class Cell:
    variant: VariantSpec
    rule: NoiseRule
    n: int
    trials: int
    budget: int
    seed: int

    @property
    def p(self) -> float:
        return self.rule(self.n)

    def config(self) -> AlgorithmConfig:
        return AlgorithmConfig(self.n, NoiseSpec(self.p), self.variant.variant, self.variant.K)


def cell_seed(master_seed: int, variant: VariantSpec, rule: NoiseRule, n: int) -> int:
    """Seed of one cell, a function of the master seed and the cell's content only."""
    k = (1 << 63) if math.isinf(variant.K) else int(variant.K)
    return derive_seeds(master_seed, 1, n, variant.code, k, zlib.crc32(rule.text.encode()))[0]


@dataclass(frozen=True)
class SweepGrid:
    n_values: tuple
    p_rules: tuple
    variants: tuple
    trials_per_cell: int = 20
    budget_multiple: float = 20.0
    master_seed: int = 0

    def __post_init__(self):
        if self.trials_per_cell < 1:
            raise ValueError("trials_per_cell must be >= 1")
        for n in self.n_values:
            for rule in self.p_rules:
                rule(n)

    def cells(self) -> list[Cell]:
        return [
            Cell(v, r, n, self.trials_per_cell, budget_for(n, self.budget_multiple),
                 cell_seed(self.master_seed, v, r, n))
            for v in self.variants
            for r in self.p_rules
            for n in self.n_values
        ]

    def describe(self) -> dict:
        return {
            "n": list(self.n_values),
            "p": [r.text for r in self.p_rules],
            "variant": [str(v) for v in self.variants],
            "trials": self.trials_per_cell,
            "budget_multiple": self.budget_multiple,
            "seed": self.master_seed,
        }


def _trial(args) -> RunRecord:
    config, budget, seed, stride, backend = args
    return simulate(config, budget, seed, stride, backend)


def _map(tasks: list, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [_trial(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def run_cell(
    n: int,
    p: float,
    variant,
    trials: int,
    budget: int,
    seed: int,
    *,
    K: float = 0,
    workers: int = 1,
    trace_stride: Optional[int] = None,
    backend: Optional[str] = None,
) -> list[RunRecord]:
    """``trials`` independent trials until full coverage; records are in trial order.

    Trial ``i`` uses the ``i``-th seed derived from ``seed``, so the output
    does not depend on ``workers``.
    """
    if isinstance(variant, VariantSpec):
        spec = variant
    elif isinstance(variant, str):
        spec = VariantSpec.parse(variant, K)
    else:
        spec = VariantSpec(Variant(variant), K)
    config = AlgorithmConfig(n, NoiseSpec(p), spec.variant, spec.K)
    tasks = [(config, budget, s, trace_stride, backend) for s in derive_seeds(seed, trials)]
    return _map(tasks, workers)


def run_sweep(
    grid: SweepGrid, workers: int = 1, backend: Optional[str] = None, log: Callable[[str], None] | None = None
) -> list[tuple[Cell, list[RunRecord]]]:
    cells = grid.cells()
    results = []
    for cell in cells:
        records = run_cell(
            cell.n, cell.p, cell.variant, cell.trials, cell.budget, cell.seed,
            workers=workers, backend=backend,
        )
        results.append((cell, records))
        if log is not None:
            s = summarize(records)
            log(f"{cell.variant} n={cell.n} p={cell.rule.text} median T_total={s.median_T_total} "
                f"censored={s.censored_fraction:.3f}")
    return results


QUANTILES = (0.1, 0.25, 0.5, 0.75, 0.9)


@dataclass
class CellSummary:
    variant: str
    n: int
    p: float
    K: float
    trials: int
    uncensored_count: int
    censored_fraction: float
    median_T_total: Optional[float]
    mean_T_total: Optional[float]
    quantiles_T_total: dict = field(default_factory=dict)
    median_T_ex: Optional[float] = None
    mean_T_ex: Optional[float] = None
    quantiles_T_ex: dict = field(default_factory=dict)
    mean_evaluations: float = 0.0
    median_evaluations: Optional[float] = None
    p_rule: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(self.K, float) and math.isinf(self.K):
            d["K"] = "inf"
        return d


def _stats(values: Sequence[float]):
    if not len(values):
        return None, None, {}
    arr = np.asarray(values, dtype=float)
    qs = np.quantile(arr, QUANTILES)
    return float(np.median(arr)), float(arr.mean()), {str(q): float(v) for q, v in zip(QUANTILES, qs)}


def summarize(records: Sequence[RunRecord], p_rule: str = "") -> CellSummary:
    """Statistics over uncensored trials; censored trials only enter the censored fraction."""
    if not records:
        raise ValueError("no records")
    first = records[0]
    done = [r for r in records if not r.T_total_censored]
    med, mean, qs = _stats([r.T_total for r in done])
    ex = [r.T_ex for r in records if not r.T_ex_censored]
    med_ex, mean_ex, qs_ex = _stats(ex)
    med_ev, _, _ = _stats([r.evaluations for r in done])
    return CellSummary(
        variant=first.variant,
        n=first.n,
        p=first.p,
        K=first.K,
        trials=len(records),
        uncensored_count=len(done),
        censored_fraction=(len(records) - len(done)) / len(records),
        median_T_total=med,
        mean_T_total=mean,
        quantiles_T_total=qs,
        median_T_ex=med_ex,
        mean_T_ex=mean_ex,
        quantiles_T_ex=qs_ex,
        mean_evaluations=float(np.mean([r.evaluations for r in records])),
        median_evaluations=med_ev,
        p_rule=p_rule,
    )


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    constant: float
    residual: float
    points: int
    regressor: str = "n"


REGRESSORS: dict[str, Callable[[float], float]] = {
    "n": lambda n: n,
    "n2logn": lambda n: n * n * math.log(n),
}


def fit_scaling(points: Iterable[tuple[float, float]], regressor: str = "n") -> ScalingFit:
    """Least-squares line through ``(log r(n), log statistic)``.

    With ``regressor="n"`` the slope is the power-law exponent in ``n``; with
    ``"n2logn"`` the constant is the prefactor of ``n^2 ln n`` (and the slope
    should be near 1 when that shape holds).
    """
    pts = list(points)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if regressor not in REGRESSORS:
        raise ValueError(f"unknown regressor {regressor!r}")
    ns = np.array([float(n) for n, _ in pts])
    ys = np.array([float(y) for _, y in pts])
    if np.any(ys <= 0) or np.any(ns <= 0):
        raise ValueError("all points must be positive")
    x = np.log([REGRESSORS[regressor](n) for n in ns])
    if regressor == "n2logn" and np.any(~np.isfinite(x)):
        raise ValueError("n2logn regressor needs n > 1")
    y = np.log(ys)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sum((y - (slope * x + intercept)) ** 2))
    return ScalingFit(float(slope), float(math.exp(intercept)), resid, len(pts), regressor)


@dataclass
class SeparationRow:
    n: int
    p: float
    cached_median: Optional[float]
    reeval_median: Optional[float]
    median_ratio: Optional[float]
    cached_censored: float
    reeval_censored: float
    flagged: bool


def separation_report(summaries: Sequence[CellSummary], threshold: float = 0.5) -> list[SeparationRow]:
    """Contrast cached and reevaluating cells that share ``(n, p)``.

    ``median_ratio`` is reeval over cached (uncensored medians). A row is
    flagged when the reevaluating variant's censored fraction exceeds
    ``threshold`` while the cached variant's stays at or below it.
    """
    cached = {(s.n, s.p): s for s in summaries if s.variant == Variant.CACHED.value}
    reeval = {(s.n, s.p): s for s in summaries if s.variant == Variant.REEVAL.value}
    rows = []
    for key in sorted(cached.keys() & reeval.keys()):
        c, r = cached[key], reeval[key]
        ratio = None
        if c.median_T_total and r.median_T_total is not None:
            ratio = r.median_T_total / c.median_T_total
        rows.append(
            SeparationRow(
                n=key[0], p=key[1],
                cached_median=c.median_T_total, reeval_median=r.median_T_total, median_ratio=ratio,
                cached_censored=c.censored_fraction, reeval_censored=r.censored_fraction,
                flagged=r.censored_fraction > threshold and c.censored_fraction <= threshold,
            )
        )
    return rows
