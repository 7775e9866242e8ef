"""Invariant and oracle suite behind ``noisysemo validate``.

Each check returns a :class:`CheckResult`. The oracles here are written
independently of the code they check: brute-force subset enumeration for
elimination, and exhaustive branch enumeration (with the OneMinMax
"same value replaces" reading) for one-step transition distributions.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional

from .algorithms import (
    AlgorithmConfig,
    CachedIndividual,
    CachedPopulation,
    ReevalPopulation,
    Variant,
    advance,
    cached_init,
    cached_step,
    elim,
    reeval_init,
    reeval_step,
    run_until,
)
from .core import Bitstring, weakly_dominates
from .diagnostics import extremes_found, pareto_covered, true_values
from .invariants import InvariantViolation
from .noise import NoiseSpec, RngHandle, derive_seeds, noisy_variant


@dataclass
class CheckResult:
    name: str
    passed: bool
    violations: int
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def cached_invariant_check(n: int, p: float, total_steps: int, seed: int = 0) -> CheckResult:
    """Full cached runs (to coverage) until ``total_steps`` iterations were checked."""
    noise = NoiseSpec(p)
    steps = violations = runs = 0
    messages: list[str] = []
    run_seeds = iter(derive_seeds(seed, 10_000))
    while steps < total_steps:
        rng = RngHandle(next(run_seeds))
        pop = cached_init(AlgorithmConfig(n, noise), rng)
        runs += 1
        prev = {"L": len(set(true_values(pop))), "noisy": extremes_found(pop, "noisy_cached"), "evals": pop.evaluations}

        def on_step(state):
            problems = []
            L = len(set(true_values(state)))
            if abs(L - prev["L"]) > 1:
                problems.append(f"L jumped {prev['L']} -> {L}")
            noisy = extremes_found(state, "noisy_cached")
            if prev["noisy"] and not noisy:
                problems.append("noisy extremes lost")
            if state.evaluations - prev["evals"] != 1:
                problems.append("cached step did not use exactly one evaluation")
            prev.update(L=L, noisy=noisy, evals=state.evaluations)
            if problems:
                raise InvariantViolation("; ".join(problems))

        try:
            rec = run_until(pop, noise, rng, pareto_covered, total_steps - steps, check=True, on_step=on_step)
            steps += rec.iterations
        except InvariantViolation as exc:
            violations += 1
            steps += pop.iteration
            messages.append(str(exc))
    detail = f"n={n} p={p:.4g}: {steps} steps over {runs} runs, {violations} violations"
    if messages:
        detail += " | " + messages[0]
    return CheckResult("cached invariants", violations == 0, violations, detail)


def reeval_invariant_check(n: int, p: float, steps: int, seed: int = 0, keep: float = 0) -> CheckResult:
    noise = NoiseSpec(p)
    rng = RngHandle(seed)
    variant = Variant.KEEP if keep else Variant.REEVAL
    pop = reeval_init(AlgorithmConfig(n, noise, variant, keep), rng)
    violations = 0
    messages = []
    for _ in range(steps):
        before = pop.evaluations
        size = len(pop.members)
        try:
            advance(pop, noise, rng, check=True)
        except InvariantViolation as exc:
            violations += 1
            messages.append(str(exc))
            break
        if pop.evaluations - before != size + 1:
            violations += 1
            messages.append(f"step used {pop.evaluations - before} evaluations, expected {size + 1}")
    name = "keep-extremes invariants" if keep else "reeval invariants"
    detail = f"n={n} p={p:.4g}: {pop.iteration} steps, {violations} violations"
    if messages:
        detail += " | " + messages[0]
    return CheckResult(name, violations == 0, violations, detail)


def noiseless_monotone_check(n: int, steps: int, seed: int = 0) -> CheckResult:
    """With p = 0 neither variant ever loses a true value."""
    violations = 0
    for variant in (Variant.CACHED, Variant.REEVAL):
        rng = RngHandle(seed)
        config = AlgorithmConfig(n, NoiseSpec(0.0), variant)
        pop = cached_init(config, rng) if variant is Variant.CACHED else reeval_init(config, rng)
        seen = set(true_values(pop))

        def on_step(state):
            nonlocal seen, violations
            now = set(true_values(state))
            if not seen <= now:
                violations += 1
            seen = now

        run_until(pop, config.noise, rng, lambda s: False, steps, on_step=on_step)
    return CheckResult("noiseless value monotonicity", violations == 0, violations,
                       f"n={n}, {steps} steps per variant")


def brute_force_dominant_subsets(values: list) -> list[frozenset]:
    """All index subsets that weakly cover every value and are pairwise incomparable."""
    idx = range(len(values))
    valid = []
    for r in range(1, len(values) + 1):
        for combo in itertools.combinations(idx, r):
            covers = all(any(weakly_dominates(values[g], values[x]) for g in combo) for x in idx)
            incomparable = all(
                not weakly_dominates(values[a], values[b]) and not weakly_dominates(values[b], values[a])
                for a, b in itertools.combinations(combo, 2)
            )
            if covers and incomparable:
                valid.append(frozenset(combo))
    return valid


def elim_oracle_check(cases: int = 1000, seed: int = 0, max_size: int = 6, max_value: int = 3) -> CheckResult:
    rng = RngHandle(seed)
    violations = 0
    first = ""
    for _ in range(cases):
        size = 1 + rng.below(max_size)
        values = [(rng.below(max_value + 1), rng.below(max_value + 1)) for _ in range(size)]
        kept, seen = elim(list(range(size)), lambda i: values[i], rng)
        if seen != values or frozenset(kept) not in brute_force_dominant_subsets(values) or len(kept) != len(set(kept)):
            violations += 1
            first = first or f"values={values} kept={kept}"
    detail = f"{cases} random multisets, {violations} mismatches"
    if first:
        detail += f" | {first}"
    return CheckResult("elim brute-force oracle", violations == 0, violations, detail)


def noise_chi_square_check(n: int = 4, p: float = 0.5, samples: int = 100_000, seed: int = 0,
                           alpha: float = 0.01) -> CheckResult:
    """Goodness of fit of ``noisy_variant(0^n)`` against the exact one-bit-noise law."""
    from scipy.stats import chisquare

    rng = RngHandle(seed)
    x = Bitstring.zeros(n)
    noise = NoiseSpec(p)
    counts = Counter(noisy_variant(x, noise, rng).value for _ in range(samples))
    cats = [0] + [1 << i for i in range(n)]
    observed = [counts.get(c, 0) for c in cats]
    expected = [samples * (1 - p)] + [samples * p / n] * n
    stray = samples - sum(observed)
    stat, pval = chisquare(observed, expected)
    ok = pval >= alpha and stray == 0
    return CheckResult("noise chi-square", ok, 0 if ok else 1,
                       f"n={n} p={p} samples={samples}: chi2={stat:.2f} p-value={pval:.4f}")


def _key_cached(members) -> tuple:
    return tuple(sorted((str(m.genome), m.value[0]) for m in members))


def _key_reeval(members) -> tuple:
    return tuple(sorted(str(x) for x in members))


def _noise_outcomes(x: Bitstring, p: Fraction):
    """``(probability, observed first value)`` pairs for one noisy evaluation."""
    out = [(1 - p, x.ones)]
    for q in range(x.n):
        out.append((p / x.n, x.ones + (-1 if x.bit(q) else 1)))
    return out


def cached_transition_exact(pop: CachedPopulation, p: Fraction) -> dict:
    """Exact next-population law of one cached step (OneMinMax: equal value replaces)."""
    n = pop.n
    m = len(pop.members)
    law: dict = {}
    for parent in pop.members:
        for bit in range(n):
            child = parent.genome.flip(bit)
            for prob, w in _noise_outcomes(child, Fraction(p)):
                members = [mm for mm in pop.members if mm.value[0] != w]
                members.append(CachedIndividual(child, (w, n - w)))
                key = _key_cached(members)
                law[key] = law.get(key, 0) + Fraction(1, m) * Fraction(1, n) * prob
    return law


def reeval_transition_exact(pop: ReevalPopulation, p: Fraction) -> dict:
    """Exact next-population law of one reevaluating step (last visitor of a value survives)."""
    n = pop.n
    m = len(pop.members)
    law: dict = {}
    for parent in pop.members:
        for bit in range(n):
            extended = list(pop.members) + [parent.flip(bit)]
            size = len(extended)
            perms = list(itertools.permutations(range(size)))
            per_element = [_noise_outcomes(x, Fraction(p)) for x in extended]
            for perm in perms:
                for outcome in itertools.product(*(per_element[i] for i in perm)):
                    prob = Fraction(1, m) * Fraction(1, n) * Fraction(1, len(perms))
                    holder = {}
                    for i, (pr, v) in zip(perm, outcome):
                        prob *= pr
                        holder[v] = i
                    key = _key_reeval([extended[i] for i in holder.values()])
                    law[key] = law.get(key, 0) + prob
    return law


def empirical_transition(pop, step: Callable, noise: NoiseSpec, samples: int, seed: int) -> dict:
    rng = RngHandle(seed)
    key = _key_cached if pop.kind == "cached" else _key_reeval
    counts: Counter = Counter()
    for _ in range(samples):
        nxt = step(pop.copy(), noise, rng)
        counts[key(nxt.members)] += 1
    return {k: c / samples for k, c in counts.items()}


def total_variation(exact: dict, empirical: dict) -> float:
    keys = exact.keys() | empirical.keys()
    return 0.5 * sum(abs(float(exact.get(k, 0)) - empirical.get(k, 0.0)) for k in keys)


def cached_fixture() -> CachedPopulation:
    """n = 3 population with one correctly and one wrongly stored value."""
    return CachedPopulation(3, [
        CachedIndividual(Bitstring.from_str("010"), (1, 2)),
        CachedIndividual(Bitstring.from_str("110"), (3, 0)),
    ])


def reeval_fixture() -> ReevalPopulation:
    return ReevalPopulation(3, [Bitstring.from_str("010"), Bitstring.from_str("011")], [None, None])


def transition_check(samples: int = 100_000, seed: int = 0) -> list[CheckResult]:
    out = []
    for name, pop, step, p, limit in (
        ("cached one-step law", cached_fixture(), cached_step, Fraction(1, 2), 0.01),
        ("reeval one-step law", reeval_fixture(), reeval_step, Fraction(3, 10), 0.02),
    ):
        exact = (cached_transition_exact if pop.kind == "cached" else reeval_transition_exact)(pop, p)
        emp = empirical_transition(pop, step, NoiseSpec(float(p)), samples, seed)
        tv = total_variation(exact, emp)
        out.append(CheckResult(name, tv <= limit, int(tv > limit),
                               f"n=3 p={float(p)} samples={samples}: TV={tv:.4f} (limit {limit})"))
    return out


def backend_parity_check(n: int = 12, seeds: int = 5) -> CheckResult:
    from .engine import HAVE_EXTENSION, simulate

    if not HAVE_EXTENSION:
        return CheckResult("compiled/python parity", True, 0, "compiled kernel not built; skipped")
    bad = 0
    for variant, K in ((Variant.CACHED, 0), (Variant.REEVAL, 0), (Variant.KEEP, 40)):
        for p in (0.0, 0.5 / n, 0.3):
            config = AlgorithmConfig(n, NoiseSpec(p), variant, K)
            for s in range(seeds):
                a = simulate(config, 2000, s, 1, backend="python")
                b = simulate(config, 2000, s, 1, backend="compiled")
                if a != b or a.trace != b.trace or a.population != b.population:
                    bad += 1
    return CheckResult("compiled/python parity", bad == 0, bad, f"n={n}, 3 variants x 3 rates x {seeds} seeds")


def run_suite(quick: bool = True, n: int = 50, p: Optional[float] = None, steps: Optional[int] = None,
              seed: int = 0, log: Callable[[str], None] | None = None) -> list[CheckResult]:
    """Run every check; ``quick`` uses 1e4 steps per variant and skips the transition oracles."""
    p = 0.5 / n if p is None else p
    steps = steps or (10_000 if quick else 100_000)
    checks: list[Callable[[], object]] = [
        lambda: cached_invariant_check(n, p, steps, seed),
        lambda: reeval_invariant_check(n, p, steps, seed),
        lambda: reeval_invariant_check(n, p, min(steps, 2_000), seed, keep=math.inf),
        lambda: noiseless_monotone_check(min(n, 20), min(steps, 5_000), seed),
        lambda: elim_oracle_check(1000, seed),
        lambda: noise_chi_square_check(seed=seed),
        lambda: backend_parity_check(),
    ]
    if not quick:
        checks.append(lambda: transition_check(seed=seed))
    results: list[CheckResult] = []
    for check in checks:
        res = check()
        for r in res if isinstance(res, list) else [res]:
            results.append(r)
            if log is not None:
                log(r.line())
    return results
