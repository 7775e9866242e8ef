"""Noisy SEMO on OneMinMax: cached values, reevaluation, and extreme keeping.

These are the reference state machines. They are written for clarity and
double as the pure-Python fallback of the compiled kernel; both consume the
random stream in exactly the same order, so a seed gives the same run on
either path.

Draw order per iteration:

* cached: parent index, mutated position, offspring evaluation.
* reeval / keep: parent index, mutated position, the visit permutation of
  ``P + [offspring]``, then one evaluation per visited element.

An evaluation is one uniform double, plus one position draw when the noise
fires.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .core import (
    Bitstring,
    ObjectiveVector,
    mutate_one_bit,
    random_bitstring,
    strictly_dominates,
    weakly_dominates,
)
from .diagnostics import (
    RunRecord,
    Trace,
    default_extremes_mode,
    extremes_found,
    pareto_covered,
    trace_sample,
)
from .invariants import InvariantViolation, cached_violations, reeval_violations
from .noise import EvaluationCounter, NoiseSpec, RngHandle, noisy_evaluate


class Variant(str, enum.Enum):
    CACHED = "cached"
    REEVAL = "reeval"
    KEEP = "keep"


@dataclass(frozen=True)
class AlgorithmConfig:
    """Problem size, noise, and which SEMO variant to run.

    ``K`` only matters for :attr:`Variant.KEEP`; ``math.inf`` keeps the
    extremes forever.
    """

    n: int
    noise: NoiseSpec = NoiseSpec(0.0)
    variant: Variant = Variant.CACHED
    K: float = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.K < 0:
            raise ValueError("K must be >= 0")


@dataclass(frozen=True)
class CachedIndividual:
    genome: Bitstring
    value: ObjectiveVector


@dataclass
class CachedPopulation:
    n: int
    members: list
    iteration: int = 0
    counter: EvaluationCounter = field(default_factory=EvaluationCounter)
    kind = "cached"

    @property
    def evaluations(self) -> int:
        return self.counter.count

    def stored_firsts(self) -> list[int]:
        return [m.value[0] for m in self.members]

    def copy(self) -> "CachedPopulation":
        return CachedPopulation(self.n, list(self.members), self.iteration, EvaluationCounter(self.counter.count))


@dataclass
class ReevalPopulation:
    """Population of the reevaluating SEMO.

    ``values`` holds the evaluation each member received in the last
    elimination (``None`` for members appended by extreme keeping).
    ``keep_for`` is the number of initial iterations during which lost
    extreme genomes are re-appended; 0 gives the plain algorithm.
    """

    n: int
    members: list
    values: list = field(default_factory=list)
    iteration: int = 0
    counter: EvaluationCounter = field(default_factory=EvaluationCounter)
    keep_for: float = 0
    kind = "reeval"

    @property
    def evaluations(self) -> int:
        return self.counter.count

    def copy(self) -> "ReevalPopulation":
        return ReevalPopulation(
            self.n, list(self.members), list(self.values), self.iteration,
            EvaluationCounter(self.counter.count), self.keep_for,
        )


def cached_init(config: AlgorithmConfig, rng: RngHandle) -> CachedPopulation:
    pop = CachedPopulation(config.n, [])
    x = random_bitstring(config.n, rng)
    pop.members.append(CachedIndividual(x, noisy_evaluate(x, config.noise, rng, pop.counter)))
    return pop


def reeval_init(config: AlgorithmConfig, rng: RngHandle) -> ReevalPopulation:
    keep = config.K if config.variant is Variant.KEEP else 0
    x = random_bitstring(config.n, rng)
    return ReevalPopulation(config.n, [x], [None], keep_for=keep)


def init_population(config: AlgorithmConfig, rng: RngHandle):
    if config.variant is Variant.CACHED:
        return cached_init(config, rng)
    return reeval_init(config, rng)


def _cached_next_general(members: Sequence[CachedIndividual], child: CachedIndividual):
    """General acceptance (line-by-line dominance). ``None`` means rejected."""
    w = child.value
    if any(strictly_dominates(m.value, w) for m in members):
        return None
    out = []
    placed = False
    for m in members:
        if weakly_dominates(w, m.value):
            if not placed:
                out.append(child)
                placed = True
        else:
            out.append(m)
    if not placed:
        out.append(child)
    return out


def _cached_next_omm(members: Sequence[CachedIndividual], child: CachedIndividual):
    """OneMinMax shortcut: the offspring replaces the member with its first value, else joins."""
    w0 = child.value[0]
    out = list(members)
    for i, m in enumerate(out):
        if m.value[0] == w0:
            out[i] = child
            return out
    out.append(child)
    return out


def cached_step(
    pop: CachedPopulation, noise: NoiseSpec, rng: RngHandle, *, general: bool = False, check: bool = False
) -> CachedPopulation:
    """One iteration of SEMO without reevaluation, in place.

    The offspring is evaluated once and the value stored with it. It is
    rejected if some stored value strictly dominates it; otherwise it joins
    and every member whose stored value it weakly dominates leaves. A replaced
    member's slot is taken by the offspring, so member order is stable.

    Args:
        general: Use the general dominance test instead of the OneMinMax
            equality shortcut.
        check: Cross-check both paths and assert the structural invariants.
    """
    parent = pop.members[rng.below(len(pop.members))]
    child_genome = mutate_one_bit(parent.genome, rng)
    child = CachedIndividual(child_genome, noisy_evaluate(child_genome, noise, rng, pop.counter))
    if general or check:
        nxt = _cached_next_general(pop.members, child)
        if nxt is None:
            nxt = pop.members
    else:
        nxt = _cached_next_omm(pop.members, child)
    if check:
        fast = _cached_next_omm(pop.members, child)
        if fast != list(nxt):
            raise InvariantViolation(f"OneMinMax shortcut disagrees at t={pop.iteration}")
        problems = cached_violations(nxt, pop.n, pop.stored_firsts())
        if problems:
            raise InvariantViolation(f"t={pop.iteration + 1}: " + "; ".join(problems))
    pop.members = list(nxt)
    pop.iteration += 1
    return pop


def eliminate(order: Sequence[int], visit_values: Sequence[ObjectiveVector]) -> list[int]:
    """Elimination over values already drawn in visit order.

    ``order[k]`` is the element visited k-th and ``visit_values[k]`` its
    value. Returns kept element indices in acceptance order. The record of
    accepted values keeps entries of later-removed elements.
    """
    kept: list[int] = []
    kept_values: list[ObjectiveVector] = []
    seen: list[ObjectiveVector] = []
    for idx, v in zip(order, visit_values):
        if any(strictly_dominates(s, v) for s in seen):
            continue
        survivors = [(i, u) for i, u in zip(kept, kept_values) if not weakly_dominates(v, u)]
        kept = [i for i, _ in survivors] + [idx]
        kept_values = [u for _, u in survivors] + [v]
        seen.append(v)
    return kept


def eliminate_omm(order: Sequence[int], visit_values: Sequence[ObjectiveVector]) -> list[int]:
    """OneMinMax shortcut of :func:`eliminate`: the last visitor of each value survives."""
    holder: dict[int, int] = {}
    for idx, v in zip(order, visit_values):
        holder.pop(v[0], None)
        holder[v[0]] = idx
    return list(holder.values())


def elim(
    elements: Sequence,
    evaluate: Callable[[object], ObjectiveVector],
    rng: RngHandle,
    *,
    omm: bool = False,
) -> tuple[list[int], list[ObjectiveVector]]:
    """Minimal Pareto-dominant sub-multiset of ``elements``.

    Elements are visited in a uniformly random order and each is evaluated
    exactly once, when visited.

    Returns:
        ``(kept, values)``: indices into ``elements`` of the survivors, in
        acceptance order, and the value each input element received.
    """
    if not elements:
        raise ValueError("elim needs a non-empty multiset")
    order = rng.permutation(len(elements))
    visit_values = [evaluate(elements[i]) for i in order]
    kept = (eliminate_omm if omm else eliminate)(order, visit_values)
    values: list = [None] * len(elements)
    for i, v in zip(order, visit_values):
        values[i] = v
    return kept, values


def reeval_step(
    pop: ReevalPopulation, noise: NoiseSpec, rng: RngHandle, *, general: bool = False, check: bool = False
) -> ReevalPopulation:
    """One iteration of SEMO with reevaluation, in place."""
    parent = pop.members[rng.below(len(pop.members))]
    child = mutate_one_bit(parent, rng)
    extended = pop.members + [child]
    order = rng.permutation(len(extended))
    visit_values = [noisy_evaluate(extended[i], noise, rng, pop.counter) for i in order]
    kept = (eliminate if general or check else eliminate_omm)(order, visit_values)
    if check and eliminate_omm(order, visit_values) != kept:
        raise InvariantViolation(f"OneMinMax elimination shortcut disagrees at t={pop.iteration}")
    value_of = dict(zip(order, visit_values))
    pop.members = [extended[i] for i in kept]
    pop.values = [value_of[i] for i in kept]
    if check:
        problems = reeval_violations(pop.members, pop.values, pop.n)
        if problems:
            raise InvariantViolation(f"t={pop.iteration + 1}: " + "; ".join(problems))
    pop.iteration += 1
    return pop


def extreme_keeping_step(
    pop: ReevalPopulation, noise: NoiseSpec, K: float, rng: RngHandle, *, check: bool = False
) -> ReevalPopulation:
    """Reevaluating step that re-appends lost extreme genomes while fewer than K iterations ran.

    The all-zeros string is appended first, then the all-ones string. Neither
    carries a value; both are evaluated afresh next iteration.
    """
    executed = pop.iteration
    reeval_step(pop, noise, rng, check=check)
    if executed < K:
        present = {x.ones for x in pop.members}
        if 0 not in present:
            pop.members.append(Bitstring.zeros(pop.n))
            pop.values.append(None)
        if pop.n not in present:
            pop.members.append(Bitstring.all_ones(pop.n))
            pop.values.append(None)
    return pop


def advance(state, noise: NoiseSpec, rng: RngHandle, *, check: bool = False):
    if state.kind == "cached":
        return cached_step(state, noise, rng, check=check)
    if state.keep_for > 0:
        return extreme_keeping_step(state, noise, state.keep_for, rng, check=check)
    return reeval_step(state, noise, rng, check=check)


def run_until(
    state,
    noise: NoiseSpec,
    rng: RngHandle,
    stop: Callable = pareto_covered,
    budget: int = 0,
    trace_stride: Optional[int] = None,
    *,
    check: bool = False,
    on_step: Optional[Callable] = None,
) -> RunRecord:
    """Step ``state`` until ``stop(state)`` holds or ``budget`` iterations ran.

    The stopping predicate is tested every iteration. Trace samples are taken
    at the start, at every multiple of ``trace_stride``, and at the end.
    ``on_step(state)`` is called after every iteration.
    """
    if budget < 0:
        raise ValueError("budget must be >= 0")
    mode = default_extremes_mode(state)
    start = state.iteration
    samples = [] if trace_stride else None

    def sample():
        if samples is not None and (not samples or samples[-1].t != state.iteration):
            samples.append(trace_sample(state))

    t_ex = state.iteration if extremes_found(state, mode) else None
    sample()
    done = stop(state)
    while not done and state.iteration - start < budget:
        advance(state, noise, rng, check=check)
        if on_step is not None:
            on_step(state)
        if t_ex is None and extremes_found(state, mode):
            t_ex = state.iteration
        if samples is not None and state.iteration % trace_stride == 0:
            sample()
        done = stop(state)
    sample()
    if state.kind == "cached":
        variant, K = Variant.CACHED.value, 0
    elif state.keep_for > 0:
        variant, K = Variant.KEEP.value, state.keep_for
    else:
        variant, K = Variant.REEVAL.value, 0
    return RunRecord(
        variant=variant,
        n=state.n,
        p=noise.p,
        K=K,
        seed=None,
        budget=budget,
        T_total=state.iteration,
        T_total_censored=not done,
        T_ex=state.iteration if t_ex is None else t_ex,
        T_ex_censored=t_ex is None,
        iterations=state.iteration - start,
        evaluations=state.evaluations,
        trace=Trace.from_samples(samples) if samples is not None else None,
        population=tuple(str(g) for g in population_genomes(state)),
    )


def population_genomes(state) -> list[Bitstring]:
    if state.kind == "cached":
        return [m.genome for m in state.members]
    return list(state.members)


def simulate_python(
    config: AlgorithmConfig,
    budget: int,
    seed: int,
    trace_stride: Optional[int] = None,
    check: bool = False,
) -> RunRecord:
    """One full trial on the pure-Python path."""
    rng = RngHandle(seed)
    state = init_population(config, rng)
    record = run_until(state, config.noise, rng, pareto_covered, budget, trace_stride, check=check)
    record.seed = seed
    return record


def budget_for(n: int, multiple: float) -> int:
    """Iteration budget ``ceil(multiple * n^2 * max(ln n, 1))``."""
    return math.ceil(multiple * n * n * max(math.log(n), 1.0))
