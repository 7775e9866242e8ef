"""Search-space primitives: bitstrings, the OneMinMax objective and dominance."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Tuple

ObjectiveVector = Tuple[int, ...]


@dataclass(frozen=True)
class Bitstring:
    """Immutable fixed-length bit vector packed into a Python int.

    Bit ``i`` of ``value`` is position ``i`` of the string (0-indexed). The
    number of ones is computed once at construction.

    Args:
        value: Packed bits; must fit in ``n`` bits.
        n: Length of the string.
    """

    value: int
    n: int
    ones: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"bitstring length must be >= 1, got {self.n}")
        if self.value < 0 or self.value >> self.n:
            raise ValueError(f"value {self.value} does not fit in {self.n} bits")
        object.__setattr__(self, "ones", self.value.bit_count())

    @classmethod
    def zeros(cls, n: int) -> "Bitstring":
        return cls(0, n)

    @classmethod
    def all_ones(cls, n: int) -> "Bitstring":
        return cls((1 << n) - 1, n)

    @classmethod
    def from_str(cls, text: str) -> "Bitstring":
        """Parse a 0/1 string; the first character is position 0."""
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a 0/1 string: {text!r}")
        return cls(int(text[::-1], 2), len(text))

    def bit(self, i: int) -> int:
        return (self.value >> i) & 1

    def flip(self, i: int) -> "Bitstring":
        if not 0 <= i < self.n:
            raise IndexError(f"bit position {i} out of range for n={self.n}")
        return Bitstring(self.value ^ (1 << i), self.n)

    def hamming(self, other: "Bitstring") -> int:
        return (self.value ^ other.value).bit_count()

    def __len__(self) -> int:
        return self.n

    def __str__(self) -> str:
        return format(self.value, f"0{self.n}b")[::-1]


def count_ones(x: Bitstring) -> int:
    return x.ones


def one_min_max(x: Bitstring) -> ObjectiveVector:
    """OneMinMax objective: (number of ones, number of zeros)."""
    f = x.ones
    return (f, x.n - f)


def _check_dims(u: Sequence[int], v: Sequence[int]) -> None:
    if len(u) != len(v):
        raise ValueError(f"dimension mismatch: {len(u)} vs {len(v)}")


def weakly_dominates(u: Sequence[int], v: Sequence[int]) -> bool:
    """True iff ``u`` is componentwise >= ``v`` (maximisation)."""
    _check_dims(u, v)
    return all(a >= b for a, b in zip(u, v))


def strictly_dominates(u: Sequence[int], v: Sequence[int]) -> bool:
    """True iff ``u`` weakly dominates ``v`` and the two differ."""
    return weakly_dominates(u, v) and tuple(u) != tuple(v)


def mutate_one_bit(x: Bitstring, rng) -> Bitstring:
    """Copy of ``x`` with one uniformly chosen position flipped."""
    return x.flip(rng.below(x.n))


def random_bitstring(n: int, rng) -> Bitstring:
    """Uniform bitstring built from ``ceil(n / 64)`` raw 64-bit draws.

    Word ``k`` supplies positions ``64k .. 64k + 63``, low bit first.
    """
    value = 0
    for k in range((n + 63) // 64):
        value |= rng.raw() << (64 * k)
    return Bitstring(value & ((1 << n) - 1), n)
