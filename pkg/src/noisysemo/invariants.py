"""Structural invariants of both SEMO variants, returned as violation messages."""
from __future__ import annotations

from collections import Counter
from typing import Iterable

from .core import Bitstring


class InvariantViolation(AssertionError):
    pass


def cached_violations(members, n: int, previous_firsts: Iterable[int] | None = None) -> list[str]:
    """Check a cached population (pairs with ``.genome`` and ``.value``).

    Covers: stored first components pairwise distinct, old stored set kept,
    at most 3 members per true value, stored value within one of the true
    value, size at most n + 1.
    """
    out = []
    firsts = [m.value[0] for m in members]
    if len(set(firsts)) != len(firsts):
        out.append(f"stored first components not distinct: {sorted(firsts)}")
    if previous_firsts is not None:
        lost = set(previous_firsts) - set(firsts)
        if lost:
            out.append(f"stored values lost: {sorted(lost)}")
    per_value = Counter(m.genome.ones for m in members)
    crowded = {k: c for k, c in per_value.items() if c > 3}
    if crowded:
        out.append(f"more than 3 members share a true value: {crowded}")
    for m in members:
        if abs(m.value[0] - m.genome.ones) > 1:
            out.append(f"stored {m.value[0]} vs true {m.genome.ones} for {m.genome}")
        if m.value[0] + m.value[1] != n:
            out.append(f"stored vector {m.value} does not sum to n={n}")
    if len(members) > n + 1:
        out.append(f"population size {len(members)} exceeds n+1={n + 1}")
    return out


def reeval_violations(members: list[Bitstring], values, n: int) -> list[str]:
    """Check a reevaluating population right after elimination."""
    out = []
    if not members:
        out.append("population is empty")
    recorded = [v[0] for v in values if v is not None]
    if len(set(recorded)) != len(recorded):
        out.append(f"recorded first components not distinct: {sorted(recorded)}")
    for x, v in zip(members, values):
        if v is not None and abs(v[0] - x.ones) > 1:
            out.append(f"recorded {v[0]} vs true {x.ones} for {x}")
    if len(members) > n + 1:
        out.append(f"population size {len(members)} exceeds n+1={n + 1}")
    return out
