from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from noisysemo.core import Bitstring, one_min_max
from noisysemo.noise import (
    EvaluationCounter,
    NoiseSpec,
    RngHandle,
    derive_seeds,
    noisy_evaluate,
    noisy_variant,
)

B = Bitstring.from_str


def test_noise_spec_range():
    NoiseSpec(0.0)
    NoiseSpec(1.0)
    for bad in (-0.1, 1.5):
        with pytest.raises(ValueError):
            NoiseSpec(bad)


def test_zero_rate_never_changes():
    rng = RngHandle(0)
    x = B("0110101")
    assert all(noisy_variant(x, NoiseSpec(0.0), rng) == x for _ in range(1000))


def test_full_rate_flips_uniform_position():
    rng = RngHandle(1)
    x = B("000")
    counts = Counter(str(noisy_variant(x, NoiseSpec(1.0), rng)) for _ in range(30_000))
    assert set(counts) == {"100", "010", "001"}
    for c in counts.values():
        assert abs(c / 30_000 - 1 / 3) < 0.01


def test_half_rate_frequencies():
    rng = RngHandle(2)
    x = B("0000")
    samples = 100_000
    counts = Counter(str(noisy_variant(x, NoiseSpec(0.5), rng)) for _ in range(samples))
    assert abs(counts["0000"] / samples - 0.5) <= 0.01
    for s in ("1000", "0100", "0010", "0001"):
        assert abs(counts[s] / samples - 0.125) <= 0.01


def test_half_rate_chi_square():
    rng = RngHandle(4)
    x = B("0000")
    samples = 100_000
    counts = Counter(str(noisy_variant(x, NoiseSpec(0.5), rng)) for _ in range(samples))
    cats = ["0000", "1000", "0100", "0010", "0001"]
    _, pval = chisquare([counts[c] for c in cats], [samples / 2] + [samples / 8] * 4)
    assert pval >= 0.01


def test_noisy_evaluate_examples():
    rng = RngHandle(0)
    assert noisy_evaluate(B("1011"), NoiseSpec(0.0), rng) == (3, 1)
    assert all(noisy_evaluate(B("1111"), NoiseSpec(1.0), rng) == (3, 1) for _ in range(50))


@given(st.integers(1, 40).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, (1 << n) - 1))),
       st.floats(0, 1), st.integers(0, 2**31))
def test_noisy_value_within_one(args, p, seed):
    n, value = args
    x = Bitstring(value, n)
    f = noisy_evaluate(x, NoiseSpec(p), RngHandle(seed))[0]
    assert abs(f - x.ones) <= 1 and 0 <= f <= n


def test_counter_counts_every_call():
    c = EvaluationCounter()
    rng = RngHandle(0)
    for _ in range(7):
        noisy_evaluate(B("01"), NoiseSpec(0.3), rng, c)
    assert c.count == 7


def test_bernoulli_draw_always_consumed():
    a, b = RngHandle(9), RngHandle(9)
    noisy_variant(B("0101"), NoiseSpec(0.0), a)
    b.random()
    assert a.raw() == b.raw()


def test_same_seed_same_stream():
    a, b = RngHandle(123), RngHandle(123)
    x = B("0011001")
    seq_a = [noisy_evaluate(x, NoiseSpec(0.4), a) for _ in range(200)]
    seq_b = [noisy_evaluate(x, NoiseSpec(0.4), b) for _ in range(200)]
    assert seq_a == seq_b


def test_below_uniform_and_in_range():
    rng = RngHandle(8)
    draws = [rng.below(6) for _ in range(60_000)]
    assert min(draws) == 0 and max(draws) == 5
    _, pval = chisquare(np.bincount(draws, minlength=6))
    assert pval >= 0.01
    assert all(rng.below(1) == 0 for _ in range(10))
    with pytest.raises(ValueError):
        rng.below(0)


def test_permutation_uniform():
    rng = RngHandle(10)
    counts = Counter(tuple(rng.permutation(3)) for _ in range(60_000))
    assert len(counts) == 6
    _, pval = chisquare(list(counts.values()))
    assert pval >= 0.01


def test_random_is_53_bit_unit_interval():
    rng = RngHandle(1)
    u = [rng.random() for _ in range(1000)]
    assert all(0.0 <= v < 1.0 for v in u)


def test_derived_seeds_deterministic_and_distinct():
    a = derive_seeds(42, 10, 3, 1)
    assert a == derive_seeds(42, 10, 3, 1)
    assert len(set(a)) == 10
    assert a != derive_seeds(42, 10, 3, 2)
    assert all(0 <= s < 2**64 for s in a)
