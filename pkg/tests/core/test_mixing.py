import math

import pytest

from urncut.core.kernel import ChainParams, build_kernel
from urncut.core.mixing import (
    CUTOFF_HEADER,
    NonConvergenceError,
    cutoff_profile,
    distance_from,
    mixing_profile,
    mixing_time,
    nw_lower_shape,
    nw_upper,
    policy_agreement,
    remark_upper,
    scan_entry,
    window_diagnostic,
    worst_distance,
)


@pytest.fixture
def tiny_kernel():
    return build_kernel(ChainParams(2, 1))


def test_distance_small_chain(tiny_kernel):
    assert distance_from(tiny_kernel, 0, 0) == pytest.approx(5 / 6)
    assert distance_from(tiny_kernel, 0, 1) == pytest.approx(1 / 3)
    assert distance_from(tiny_kernel, 0, 2) == pytest.approx(1 / 6)
    assert worst_distance(tiny_kernel, 2) == pytest.approx(1 / 6)
    with pytest.raises(ValueError):
        distance_from(tiny_kernel, 0, -1)


def test_mixing_time_small_chain(tiny_kernel):
    assert mixing_time(tiny_kernel, 0.25) == 2
    assert mixing_time(tiny_kernel, 0.9) == 0


def test_profile_small_chain(tiny_kernel):
    profile = mixing_profile(tiny_kernel, 2)
    assert list(profile.times) == [0, 1, 2]
    assert profile.distances == pytest.approx([5 / 6, 1 / 3, 1 / 6])


def test_mixing_time_is_least_time():
    kernel = build_kernel(ChainParams(60, 4))
    t = mixing_time(kernel, 0.25)
    assert worst_distance(kernel, t) <= 0.25
    assert worst_distance(kernel, t - 1) > 0.25


def test_mixing_time_rejects():
    with pytest.raises(ValueError):
        mixing_time(build_kernel(ChainParams(10, 2)), 1.0)
    with pytest.raises(NonConvergenceError):
        mixing_time(build_kernel(ChainParams(10, 0)), 0.25)
    with pytest.raises(NonConvergenceError):
        mixing_time(build_kernel(ChainParams(10, 10)), 0.25)


def test_unknown_policy(tiny_kernel):
    with pytest.raises(ValueError):
        worst_distance(tiny_kernel, 1, policy="middle")


def test_complement_has_same_mixing_time():
    a = mixing_time(build_kernel(ChainParams(20, 3)), 0.25, policy="all-states")
    b = mixing_time(build_kernel(ChainParams(20, 17)), 0.25, policy="all-states")
    assert a == b


def test_all_states_at_least_extremes():
    kernel = build_kernel(ChainParams(16, 3))
    for t in range(6):
        assert worst_distance(kernel, t, "all-states") >= worst_distance(kernel, t, "extremes") - 1e-12


def test_policy_agreement_small_chain(tiny_kernel):
    # d(t) from 0 is (1/3)(1/2)^(t-1); it first drops below 0.01 at t = 7
    agreement = policy_agreement(tiny_kernel)
    assert agreement.horizon == 7
    assert agreement.horizon == mixing_time(tiny_kernel, 0.01, policy="all-states")
    assert agreement.max_gap == 0.0


@pytest.mark.parametrize("n,k", [(30, 1), (30, 3), (40, 10)])
def test_policy_agreement_runs_to_tail_mixing_time(n, k):
    kernel = build_kernel(ChainParams(n, k))
    agreement = policy_agreement(kernel)
    assert agreement.horizon == mixing_time(kernel, 0.01, policy="all-states")
    assert agreement.max_gap <= 1e-12


def test_policy_agreement_horizon_exceeds_fixed_cap():
    kernel = build_kernel(ChainParams(300, 1))
    agreement = policy_agreement(kernel)
    assert agreement.horizon > 200
    assert agreement.max_gap <= 1e-12


def test_policy_agreement_rejects_non_ergodic():
    with pytest.raises(NonConvergenceError):
        policy_agreement(build_kernel(ChainParams(10, 0)))


def test_profile_is_non_increasing():
    profile = mixing_profile(build_kernel(ChainParams(40, 3)), 60)
    assert all(b <= a + 1e-12 for a, b in zip(profile.distances, profile.distances[1:]))


def test_cutoff_profile_drops_across_the_window():
    points = cutoff_profile(ChainParams(400, 4), [0.5, 1.0, 1.5])
    assert [c for c, _ in points] == [0.5, 1.0, 1.5]
    d = [value for _, value in points]
    assert d[0] > 0.9
    assert d[0] > d[1] > d[2]


def test_bounds():
    params = ChainParams(100, 5)
    assert nw_upper(params, 0.25) == 60
    assert nw_upper(ChainParams(100, 95), 0.25) == 60
    assert remark_upper(params) == math.ceil(5 * math.log(100) + 20 * math.log(5))
    assert nw_lower_shape(params) == pytest.approx(math.log(100) / (-2 * math.log(0.9)))
    assert nw_lower_shape(ChainParams(10, 5)) == 0.0


def test_scan_entry():
    record = scan_entry(ChainParams(50, 5), 0.25)
    assert record.nw_ok
    assert record.t_mix <= record.nw_upper
    assert record.ratio == pytest.approx(record.t_mix * 20 / (50 * math.log(50)))
    assert len(record.row()) == len(CUTOFF_HEADER)


def test_window_diagnostic_keeps_order():
    ladder = [ChainParams(40, 2), ChainParams(20, 2)]
    records = window_diagnostic(ladder, 0.25)
    assert [r.n for r in records] == [40, 20]
