import os
import subprocess
import sys

import pytest

from noisysemo import engine
from noisysemo.algorithms import AlgorithmConfig, Variant
from noisysemo.noise import NoiseSpec
from noisysemo.validate import backend_parity_check

needs_kernel = pytest.mark.skipif(not engine.HAVE_EXTENSION, reason="compiled kernel not built")

CONFIGS = [
    (Variant.CACHED, 0),
    (Variant.REEVAL, 0),
    (Variant.KEEP, 40),
    (Variant.KEEP, float("inf")),
]


@needs_kernel
@pytest.mark.parametrize("variant,K", CONFIGS)
@pytest.mark.parametrize("n", [1, 2, 7, 23, 70])
@pytest.mark.parametrize("p", [0.0, 0.03, 0.5, 1.0])
def test_backends_agree_draw_for_draw(variant, K, n, p):
    config = AlgorithmConfig(n, NoiseSpec(p), variant, K)
    budget = 2000 if variant is Variant.CACHED else 300
    for seed in (0, 1, 2**63 + 5):
        a = engine.simulate(config, budget, seed, trace_stride=1, backend="compiled")
        b = engine.simulate(config, budget, seed, trace_stride=1, backend="python")
        assert a == b
        assert a.trace == b.trace
        assert a.population == b.population


@needs_kernel
def test_backends_agree_with_stride():
    config = AlgorithmConfig(30, NoiseSpec(0.01))
    a = engine.simulate(config, 50_000, 9, trace_stride=37, backend="compiled")
    b = engine.simulate(config, 50_000, 9, trace_stride=37, backend="python")
    assert a == b and a.trace == b.trace


def test_parity_check_suite():
    result = backend_parity_check()
    assert result.passed, result.detail


def test_unknown_backend():
    with pytest.raises(ValueError):
        engine.simulate(AlgorithmConfig(3), 10, 0, backend="gpu")


def test_pure_python_selected_by_environment():
    env = dict(os.environ, NOISYSEMO_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "from noisysemo import engine; print(engine.DEFAULT_BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"


@needs_kernel
def test_compiled_is_default_when_built():
    env = {k: v for k, v in os.environ.items() if k != "NOISYSEMO_PURE"}
    out = subprocess.run(
        [sys.executable, "-c", "from noisysemo import engine; print(engine.DEFAULT_BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "compiled"


@needs_kernel
def test_benchmark_script_runs():
    script = os.path.join(os.path.dirname(__file__), os.pardir, "benchmarks", "bench_kernels.py")
    out = subprocess.run(
        [sys.executable, script, "--n", "8", "--iterations", "200", "--repeats", "1", "--seeds", "1"],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
    assert "speed-up" in out.stdout and "MISMATCH" not in out.stderr
