"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Run alone with ``pytest tests/test_acceptance.py -v`` (or ``-m acceptance``);
the lines are repeated in an "acceptance criteria" section at the end of the
session. Expect a few minutes on one core, most of it in the reevaluation
runs at n = 128.
"""
import math

import numpy as np
import pytest

from noisysemo.algorithms import budget_for
from noisysemo.cli import main
from noisysemo.diagnostics import pooled_drift
from noisysemo.experiments import NoiseRule, SweepGrid, VariantSpec, fit_scaling, run_cell, run_sweep, summarize
from noisysemo.validate import cached_invariant_check, elim_oracle_check, noise_chi_square_check, transition_check

pytestmark = pytest.mark.acceptance

MASTER_SEED = 12345
BUDGET_MULTIPLE = 20
SIZES = (32, 64, 128, 256)


def _sweep(sizes, rules, variant, trials):
    grid = SweepGrid(tuple(sizes), tuple(NoiseRule.parse(r) for r in rules), (VariantSpec.parse(variant),),
                     trials_per_cell=trials, budget_multiple=BUDGET_MULTIPLE, master_seed=MASTER_SEED)
    return {(cell.rule.text, cell.n): summarize(recs, cell.rule.text) for cell, recs in run_sweep(grid)}


@pytest.fixture(scope="module")
def cached_cells():
    return _sweep(SIZES, ("0", "0.25/n"), "cached", 200)


def test_criterion_01_noiseless_scaling(cached_cells, report):
    cells = [cached_cells[("0", n)] for n in SIZES]
    fit = fit_scaling([(c.n, c.median_T_total) for c in cells])
    medians = ", ".join(f"{c.n}:{c.median_T_total:.0f}" for c in cells)
    ok = 1.9 <= fit.exponent <= 2.4 and all(c.trials >= 200 and c.censored_fraction == 0 for c in cells)
    assert report(1, "noiseless cached scaling", ok,
                  f"exponent {fit.exponent:.3f} (need [1.9, 2.4]); medians {medians}; 200 trials per n")


def test_criterion_02_cached_noise_robustness(cached_cells, report):
    parts, ok = [], True
    for n in SIZES:
        base, noisy = cached_cells[("0", n)], cached_cells[("0.25/n", n)]
        ratio = noisy.median_T_total / base.median_T_total if noisy.median_T_total else math.inf
        ok &= 1 / 3 <= ratio <= 3 and noisy.censored_fraction == 0
        parts.append(f"n={n} ratio {ratio:.2f} censored {noisy.censored_fraction:.2f}")
    assert report(2, "cached at p=0.25/n vs p=0", ok, "; ".join(parts) + " (need ratio within 3x, censored 0)")


def test_criterion_03_reeval_small_noise(report):
    sizes = (32, 64, 128)
    cells = _sweep(sizes, ("0.1/n2",), "reeval", 50)
    summaries = [cells[("0.1/n2", n)] for n in sizes]
    censored = [s.censored_fraction for s in summaries]
    ok = all(c == 0 for c in censored)
    if ok:
        fit = fit_scaling([(s.n, s.median_T_total) for s in summaries])
        ok = 1.9 <= fit.exponent <= 2.5
        detail = f"exponent {fit.exponent:.3f} (need [1.9, 2.5])"
    else:
        detail = "no fit, some trials censored"
    assert report(3, "reeval polynomial regime p=0.1/n^2", ok, f"{detail}; censored fractions {censored}; 50 trials")


def test_criterion_04_superpolynomial_separation(report):
    sizes, trials = (32, 64, 128), 30
    rule = NoiseRule.parse("0.25/n")
    frac = {}
    for variant in ("cached", "reeval"):
        for n in sizes:
            recs = run_cell(n, rule(n), variant, trials, budget_for(n, BUDGET_MULTIPLE), MASTER_SEED + n)
            frac[variant, n] = summarize(recs).censored_fraction
    reeval = [frac["reeval", n] for n in sizes]
    cached = [frac["cached", n] for n in sizes]
    increasing = all(a < b for a, b in zip(reeval, reeval[1:]))
    exceeds = all(r > c for r, c in zip(reeval, cached))
    cached_zero = all(c == 0 for c in cached)
    ok = increasing and exceeds and cached_zero
    assert report(4, "reeval vs cached censoring at p=1/(4n)", ok,
                  f"reeval censored {reeval} (strictly increasing: {increasing}); cached censored {cached}; "
                  f"{trials} trials, budget 20 n^2 ln n")


def test_criterion_05_negative_drift(report):
    n, trials, steps = 100, 5, 200_000
    p = NoiseRule.parse("4logn/n2")(n)
    traces = [r.trace for r in run_cell(n, p, "reeval", trials, steps, MASTER_SEED, trace_stride=1)]
    base = math.ceil(3 * n / 4)
    evaluable, parts = [], []
    for k in range(0, 25, 2):
        est = pooled_drift(traces, "L", lambda v, a=base + k: v >= a)
        if est.count >= 100:
            evaluable.append((base + k, est))
            parts.append(f"L>={base + k}: {est.mean:+.3f} [{est.ci_low:+.3f}, {est.ci_high:+.3f}]")
    ok = (
        bool(evaluable)
        and all(est.ci_high < 0 for _, est in evaluable)
        and max(a for a, _ in evaluable) >= n - 15
    )
    top = int(max(np.max(t["L"]) for t in traces))
    assert report(5, "negative drift of L near n", ok,
                  f"{len(evaluable)} evaluable thresholds, max L seen {top}; " + "; ".join(parts[-3:]))


def test_criterion_06_structural_invariants(report):
    result = cached_invariant_check(50, 0.5 / 50, 100_000, seed=MASTER_SEED)
    assert report(6, "cached invariants", result.passed and result.violations == 0, result.detail)


def test_criterion_07_elim_oracle(report):
    result = elim_oracle_check(cases=1000, seed=MASTER_SEED)
    assert report(7, "elimination vs brute force", result.passed, result.detail)


def test_criterion_08_transition_oracles(report):
    results = transition_check(samples=100_000, seed=MASTER_SEED)
    ok = len(results) == 2 and all(r.passed for r in results)
    assert report(8, "one-step transition laws", ok, "; ".join(r.detail for r in results))


def test_criterion_09_noise_distribution(report):
    result = noise_chi_square_check(n=4, p=0.5, samples=100_000, seed=MASTER_SEED, alpha=0.01)
    assert report(9, "noise chi-square", result.passed, result.detail)


def test_criterion_10_determinism(tmp_path, report):
    args = ["sweep", "--n", "8,16,24", "--p", "0,0.25/n,1/n2", "--variant", "cached,reeval,keep50",
            "--trials", "6", "--seed", str(MASTER_SEED)]
    outputs = {}
    for tag, workers in (("w1", 1), ("w2", 2), ("w3", 3), ("w1-again", 1)):
        out = tmp_path / f"{tag}.csv"
        assert main(args + ["--workers", str(workers), "--out", str(out)]) == 0
        outputs[tag] = out.read_bytes()
    ok = len(set(outputs.values())) == 1
    assert report(10, "sweep CSV byte identity", ok,
                  f"{len(outputs)} sweeps (workers 1, 2, 3, 1), {len(outputs['w1'])} bytes each, "
                  f"{'identical' if ok else 'differ'}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
