import io

import numpy as np
import pytest

from urncut.core import ref_impl
from urncut.core.combinatorics import DiscretePMF, tv
from urncut.core.kernel import (
    ChainParams,
    KernelBuildError,
    StateDistribution,
    Stepper,
    advance,
    apply,
    build_kernel,
    complement_params,
    direct_row,
    evolve,
    read_kernel_csv,
    stationary,
    stationary_sample,
    step_sample,
    transition_prob,
    write_kernel_csv,
)


def test_chain_params_validation():
    with pytest.raises(ValueError):
        ChainParams(0, 0)
    with pytest.raises(ValueError):
        ChainParams(5, 6)
    with pytest.raises(ValueError):
        ChainParams(True, 1)
    assert not ChainParams(5, 0).ergodic
    assert not ChainParams(5, 5).ergodic
    assert ChainParams(5, 2).ergodic
    assert complement_params(ChainParams(10, 3)) == ChainParams(10, 7)


def test_small_kernel_rows():
    kernel = build_kernel(ChainParams(2, 1))
    assert kernel.prob(0, 1) == 1.0
    assert kernel.prob(1, 0) == pytest.approx(0.25)
    assert kernel.prob(1, 1) == pytest.approx(0.5)
    assert kernel.prob(2, 1) == 1.0
    assert kernel.prob(0, 2) == 0.0


@pytest.mark.parametrize("n, k", [(5, 1), (8, 3), (12, 6), (12, 12), (9, 0)])
def test_kernel_matches_rational_oracle(n, k):
    kernel = build_kernel(ChainParams(n, k))
    exact = np.array([[float(p) for p in row] for row in ref_impl.kernel(n, k)])
    assert np.max(np.abs(kernel.dense - exact)) <= 1e-13


def test_kernel_certificates():
    kernel = build_kernel(ChainParams(300, 40))
    assert kernel.max_row_deviation <= 1e-12
    assert kernel.balance_error <= 1e-12


def test_kernel_build_error(monkeypatch):
    monkeypatch.setattr("urncut.core.kernel.ROW_TOLERANCE", -1.0)
    with pytest.raises(KernelBuildError):
        build_kernel(ChainParams(6, 2))


def test_transition_prob_matches_band():
    params = ChainParams(40, 7)
    kernel = build_kernel(params)
    for i, j in [(0, 7), (3, 1), (20, 20), (40, 33), (11, 30)]:
        assert transition_prob(params, i, j) == pytest.approx(kernel.prob(i, j), abs=1e-14)


def test_direct_row_matches_band():
    params = ChainParams(30, 5)
    kernel = build_kernel(params)
    for x in (0, 4, 15, 30):
        assert tv(direct_row(params, x), kernel.row(x)) <= 1e-13


def test_stationary_small():
    assert np.allclose(stationary(2).weights, [1 / 6, 4 / 6, 1 / 6])
    pi = stationary(10)
    assert pi.mean() == pytest.approx(5.0)
    assert pi.variance() == pytest.approx(100 / (4 * 19))
    with pytest.raises(ValueError):
        stationary(0)


def test_stationary_is_invariant():
    kernel = build_kernel(ChainParams(60, 9))
    pi = stationary(60)
    assert np.max(np.abs(evolve(kernel, pi).weights - pi.weights)) <= 1e-13


def test_advance_matches_repeated_evolve():
    kernel = build_kernel(ChainParams(20, 3))
    dist = StateDistribution.point(20, 0)
    for _ in range(70):
        dist = evolve(kernel, dist)
    rows = advance(kernel, StateDistribution.point(20, 0).weights, 70)
    assert np.allclose(rows[0], dist.weights, atol=1e-13)


def test_apply_constant_is_constant():
    kernel = build_kernel(ChainParams(15, 4))
    assert np.allclose(apply(kernel, np.ones(16)), 1.0)
    with pytest.raises(ValueError):
        apply(kernel, np.ones(5))


def test_state_distribution_validation():
    with pytest.raises(ValueError):
        StateDistribution(3, [1.0, 0.0])
    with pytest.raises(ValueError):
        StateDistribution(1, [0.7, 0.7])


def test_step_sample_forced_move(source):
    assert step_sample(ChainParams(2, 1), 0, source) == 1
    assert step_sample(ChainParams(6, 6), 2, source) == 4
    with pytest.raises(ValueError):
        step_sample(ChainParams(2, 1), 3, source)


def test_stepper_matches_kernel_row(source):
    params = ChainParams(12, 3)
    xs = Stepper(params).step(np.full(40000, 5), source)
    assert xs.min() >= 0 and xs.max() <= 12
    assert tv(DiscretePMF.from_samples(xs), direct_row(params, 5)) < 0.02


def test_stationary_sample(source):
    draws = stationary_sample(40, source, size=20000)
    assert draws.min() >= 0 and draws.max() <= 40
    assert abs(draws.mean() - 20.0) < 0.08
    assert isinstance(stationary_sample(40, source), int)


def test_kernel_csv_round_trip():
    kernel = build_kernel(ChainParams(9, 3))
    buffer = io.StringIO()
    buffer.write("# urncut test\n")
    write_kernel_csv(kernel, buffer)
    buffer.seek(0)
    loaded = read_kernel_csv(buffer)
    assert loaded.params == kernel.params
    assert np.array_equal(loaded.band, kernel.band)


def test_read_kernel_csv_rejects_bad_header():
    with pytest.raises(ValueError):
        read_kernel_csv(io.StringIO("a,b,c\n0,0,1\n"))
    with pytest.raises(ValueError):
        read_kernel_csv(io.StringIO("i,j,p\n"))
