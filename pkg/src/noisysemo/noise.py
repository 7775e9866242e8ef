"""One-bit prior noise and the seedable random stream shared by all code paths.

Every random decision in the package goes through :class:`RngHandle`, which
wraps a numpy ``PCG64`` bit generator and derives all draws from its raw
64-bit output with fixed formulas. The compiled kernel consumes the very same
bit generator with the same formulas, so a seed replays identically on either
path.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Bitstring, ObjectiveVector, one_min_max

_MASK64 = (1 << 64) - 1
_TWO_M53 = 1.0 / 9007199254740992.0


@dataclass(frozen=True)
class NoiseSpec:
    """Noise rate ``p``: probability that an evaluation sees a one-bit-flipped copy."""

    p: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"noise rate must lie in [0, 1], got {self.p}")


class RngHandle:
    """Single-owner random stream.

    Args:
        seed: 64-bit seed, or an existing ``numpy.random.PCG64`` to wrap.
    """

    def __init__(self, seed):
        if isinstance(seed, np.random.BitGenerator):
            self.bit_generator = seed
            self.seed = None
        else:
            self.seed = int(seed) & _MASK64
            self.bit_generator = np.random.PCG64(self.seed)
        self._raw = self.bit_generator.random_raw

    def raw(self) -> int:
        return int(self._raw())

    def random(self) -> float:
        """Uniform double in [0, 1) with 53 random bits."""
        return (int(self._raw()) >> 11) * _TWO_M53

    def bernoulli(self, p: float) -> bool:
        return self.random() < p

    def below(self, m: int) -> int:
        """Uniform integer in ``[0, m)`` by modulo rejection on raw draws."""
        if m < 1:
            raise ValueError("below() needs m >= 1")
        threshold = ((1 << 64) - m) % m
        while True:
            r = int(self._raw())
            if r >= threshold:
                return r % m

    def permutation(self, m: int) -> list[int]:
        """Uniform permutation of ``range(m)`` (Fisher-Yates, high index first)."""
        order = list(range(m))
        for i in range(m - 1, 0, -1):
            j = self.below(i + 1)
            order[i], order[j] = order[j], order[i]
        return order

    def state(self) -> dict:
        return self.bit_generator.state


def derive_seeds(master_seed: int, count: int, *key: int) -> list[int]:
    """Independent 64-bit child seeds for ``count`` trials.

    ``key`` is mixed into the entropy so that different cells of a sweep get
    unrelated streams without any coordination.
    """
    ss = np.random.SeedSequence([int(master_seed) & _MASK64, *[int(k) & _MASK64 for k in key]])
    return [int(child.generate_state(1, np.uint64)[0]) for child in ss.spawn(count)]


class EvaluationCounter:
    """Counts calls to :func:`noisy_evaluate`; one call is one fitness evaluation."""

    __slots__ = ("count",)

    def __init__(self, count: int = 0):
        self.count = count

    def __repr__(self):
        return f"EvaluationCounter({self.count})"


def noisy_variant(x: Bitstring, noise: NoiseSpec, rng: RngHandle) -> Bitstring:
    """Return ``x`` or, with probability ``p``, ``x`` with one uniform bit flipped.

    The Bernoulli draw is always consumed; the position draw only on a flip.
    """
    if rng.random() < noise.p:
        return x.flip(rng.below(x.n))
    return x


def noisy_evaluate(
    x: Bitstring, noise: NoiseSpec, rng: RngHandle, counter: EvaluationCounter | None = None
) -> ObjectiveVector:
    """OneMinMax value of a fresh noisy copy of ``x``."""
    if counter is not None:
        counter.count += 1
    return one_min_max(noisy_variant(x, noise, rng))
