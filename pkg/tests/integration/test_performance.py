import time

import numpy as np
import pytest

from urncut.core.kernel import ChainParams, Stepper, build_kernel
from urncut.core.mixing import mixing_time

pytestmark = pytest.mark.slow


def test_kernel_build_latency():
    start = time.perf_counter()
    build_kernel(ChainParams(4000, 5))
    elapsed = time.perf_counter() - start
    print(f"\nKernel build n=4000 k=5: {elapsed * 1000:.1f} ms")
    assert elapsed < 5.0


def test_mixing_time_latency():
    kernel = build_kernel(ChainParams(2000, 5))
    start = time.perf_counter()
    t = mixing_time(kernel, 0.25)
    elapsed = time.perf_counter() - start
    print(f"t_mix n=2000 k=5 = {t}: {elapsed:.2f} s")
    assert elapsed < 30.0


def test_stepper_throughput():
    stepper = Stepper(ChainParams(1000, 25))
    source = np.random.default_rng(0)
    xs = np.full(4096, 500)
    start = time.perf_counter()
    for _ in range(100):
        xs = stepper.step(xs, source)
    elapsed = time.perf_counter() - start
    print(f"Stepper: {4096 * 100 / elapsed:.0f} steps/sec")
    assert elapsed < 10.0
