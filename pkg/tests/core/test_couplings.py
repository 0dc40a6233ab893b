import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from urncut.core.combinatorics import DiscretePMF, tv
from urncut.core.couplings import (
    PHASES,
    CoupledPair,
    DecomposedLanes,
    DecomposedPath,
    DecomposedState,
    KappaSchedule,
    contraction_estimate,
    contraction_target,
    couple_sample,
    coupled_gaps,
    decomposed_law,
    decomposed_path,
    decomposed_run,
    decomposed_transitions,
    drift_variance,
    drift_variance_check,
    enumerated_drift,
    event_flags,
    event_horizon,
    event_sample,
    four_phase_run,
    four_phase_sample,
    hitting_bound,
    last_step_tv,
    matched_gap,
    matched_gap_bound,
    monotone_step,
    monotone_step_many,
    monotone_violations,
    remark_gap_hitting,
    tau_couple_survival,
    tau_match_from_paths,
    tau_match_run,
    tau_match_sample,
)
from urncut.core.kernel import ChainParams, direct_row
from urncut.core.spectral import burn_in


@st.composite
def coupled_start(draw):
    n = draw(st.integers(min_value=2, max_value=30))
    k = draw(st.integers(min_value=1, max_value=n - 1))
    x = draw(st.integers(min_value=0, max_value=n))
    y = draw(st.integers(min_value=0, max_value=n))
    return ChainParams(n, k), x, y


def test_monotone_step_small_pair(source):
    pair = monotone_step(CoupledPair(1, 0), ChainParams(2, 1), source)
    assert pair.gap <= 1
    with pytest.raises(ValueError):
        monotone_step(CoupledPair(3, 0), ChainParams(2, 1), source)


@settings(max_examples=40, deadline=None)
@given(coupled_start(), st.integers(min_value=0, max_value=2**32 - 1))
def test_monotone_gap_never_grows(start, seed):
    params, x, y = start
    source = np.random.default_rng(seed)
    xs, ys = monotone_step_many(params, np.full(200, x), np.full(200, y), source)
    assert np.all(np.abs(xs - ys) <= abs(x - y))
    assert xs.min() >= 0 and ys.max() <= params.n


def test_monotone_marginals(source):
    params = ChainParams(12, 3)
    xs, ys = monotone_step_many(params, np.full(40000, 9), np.full(40000, 2), source)
    assert tv(DiscretePMF.from_samples(xs), direct_row(params, 9)) < 0.02
    assert tv(DiscretePMF.from_samples(ys), direct_row(params, 2)) < 0.02


def test_monotone_step_many_empty(source):
    xs, ys = monotone_step_many(ChainParams(4, 1), [], [], source)
    assert xs.size == 0 and ys.size == 0


def test_contraction_target():
    assert contraction_target(ChainParams(2, 1)) == 0.5
    assert contraction_target(ChainParams(10, 3)) == pytest.approx(0.58)


def test_contraction_estimate_covers_target():
    estimate = contraction_estimate(ChainParams(40, 5), reps=20000, seed=1)
    assert estimate.replicas == 20000
    assert estimate.covered


def test_coupled_gaps_modes(source):
    params = ChainParams(30, 3)
    gaps = coupled_gaps(params, 30, 0, 40, "monotone", 50, source)
    assert gaps.shape == (50, 41)
    assert np.all(np.diff(gaps, axis=1) <= 0)

    gaps = coupled_gaps(params, 30, 0, 60, "independent", 50, source)
    for row in gaps:
        met = np.flatnonzero(row == 0)
        if met.size:
            assert np.all(row[met[0]:] == 0)

    gaps = coupled_gaps(params, 30, 0, 5, "decomposed", 10, source)
    assert gaps.shape == (10, 6)
    assert np.all(gaps[:, 0] == 30)

    with pytest.raises(ValueError):
        coupled_gaps(params, 30, 0, 5, "greedy", 10, source)


def test_couple_sample_shape_and_reproducibility():
    params = ChainParams(20, 2)
    a = couple_sample(params, 20, 0, 10, "monotone", 30, seed=4)
    b = couple_sample(params, 20, 0, 10, "monotone", 30, seed=4)
    assert a.shape == (30, 11)
    assert np.all(a[:, 0] == 20)
    assert np.array_equal(a, b)


def test_survival_curve():
    params = ChainParams(40, 4)
    curve = tau_couple_survival(params, CoupledPair(30, 10), r=5, t_max=40, reps=4000, seed=2)
    assert curve.survival[0] == 1.0
    assert np.all(np.diff(curve.survival) <= 0)
    assert np.all(curve.survival <= curve.bound + 4 * curve.stderr + 1e-3)
    with pytest.raises(ValueError):
        tau_couple_survival(params, CoupledPair(30, 10), r=0, t_max=5, reps=10, seed=2)


def test_no_monotone_violations():
    assert monotone_violations(ChainParams(25, 6), 25, 0, 30, 500, seed=3) == 0


def test_decomposed_transitions_example():
    params = ChainParams(4, 1)
    state = DecomposedState(0, 0, 3, 1, 0)
    moves = decomposed_transitions(state, params)
    assert [p for p, _ in moves] == [0.75, 0.25]
    red = moves[0][1]
    assert (red.xleft, red.storage_red, red.r) == (2, 1, 1)


def test_decomposed_state_conservation():
    params = ChainParams(5, 2)
    with pytest.raises(RuntimeError):
        DecomposedState(0, 0, 3, 3, 0).check(params)
    assert DecomposedState.initial(params, 4) == DecomposedState(0, 0, 4, 1, 0)


def test_drift_example():
    dv = drift_variance(ChainParams(4, 1), 0, 3, 2, 1, 2)
    assert dv.drift == pytest.approx(-0.25)
    assert dv.variance == pytest.approx(0.75 * 0.25 + 0.5 * 0.5)


@pytest.mark.parametrize(
    "xstate, ystate",
    [
        (DecomposedState(1, 1, 3, 2, 0), DecomposedState(1, 1, 1, 3, 1)),
        (DecomposedState(3, 3, 2, 2, 1), DecomposedState(3, 3, 1, 2, 2)),
        (DecomposedState(0, 0, 5, 0, 0), DecomposedState(0, 0, 0, 5, 0)),
    ],
)
def test_enumerated_drift_matches_closed_form(xstate, ystate):
    params = ChainParams(5, 2)
    closed = drift_variance_check(xstate, ystate, params)
    enumerated = enumerated_drift(xstate, ystate, params)
    assert enumerated.drift == pytest.approx(closed.drift, abs=1e-14)
    assert enumerated.variance == pytest.approx(closed.variance, abs=1e-14)


def test_drift_check_needs_common_time():
    params = ChainParams(5, 2)
    with pytest.raises(ValueError):
        drift_variance_check(DecomposedState(0, 0, 3, 2, 0), DecomposedState(1, 1, 3, 2, 0), params)


@pytest.mark.parametrize("n, k, x0", [(6, 2, 6), (7, 3, 2), (5, 1, 0)])
def test_macro_step_law_is_the_kernel_row(n, k, x0):
    params = ChainParams(n, k)
    law = {DecomposedState.initial(params, x0): 1.0}
    for _ in range(2 * k):
        nxt = {}
        for state, p in law.items():
            for q, after in decomposed_transitions(state, params):
                nxt[after] = nxt.get(after, 0.0) + p * q
        law = nxt
    row = direct_row(params, x0)
    left = {}
    for state, p in law.items():
        assert state.r == 0 and state.storage_red == 0
        left[state.xleft] = left.get(state.xleft, 0.0) + p
    for x, p in left.items():
        assert p == pytest.approx(row.prob(x), abs=1e-12)


def test_decomposed_run_ends_on_macro_time(source):
    params = ChainParams(10, 3)
    state = decomposed_run(params, 7, 4, source)
    assert (state.s, state.r, state.storage_red) == (24, 0, 0)
    assert state.xleft + state.xright == 10


def test_decomposed_lanes_conserve(source):
    lanes = DecomposedLanes(ChainParams(10, 3), np.arange(11))
    for _ in range(5):
        lanes.macro_step(source)
    assert np.all(lanes.xleft + lanes.xright == 10)
    assert lanes.r == 0 and lanes.s == 30


def test_decomposed_law_matches_kernel():
    params = ChainParams(6, 2)
    law = decomposed_law(params, 6, 1, reps=20000, seed=5)
    assert tv(law, direct_row(params, 6)) < 0.03


def test_tau_match_run(source):
    params = ChainParams(40, 4)
    assert tau_match_run(params, 5, 5, 100, source) == (0, False, "match", False)
    result = tau_match_run(params, 10, 30, 5000, source)
    assert result.swapped
    assert result.reason in ("match", "censored")
    exit_now = tau_match_run(params, 0, 20, 100, source, truncation="quarter-band")
    assert (exit_now.value, exit_now.reason) == (0, "exit")
    with pytest.raises(ValueError):
        tau_match_run(params, 10, 30, 5, source, truncation="half")


def test_tau_match_sample():
    params = ChainParams(40, 4)
    sample = tau_match_sample(params, 28, 12, 400, reps=300, seed=6)
    assert sample.values.shape == (300,)
    assert np.all(sample.values <= 400)
    assert np.all(sample.values[sample.censored] == 400)
    assert sample.sigma2 > 0
    assert abs(sample.drift_residual) <= 5 * sample.drift_stderr + 1e-12


def test_paths_and_matching(source):
    params = ChainParams(20, 2)
    a = decomposed_path(params, 15, 50, source)
    b = decomposed_path(params, 15, 50, source)
    assert a.length == 50
    assert tau_match_from_paths(a, b) == 0
    assert np.all(a.left + a.right <= 20)


def test_event_flags(source):
    params = ChainParams(100, 5)
    assert event_horizon(params, 1.0) == 110
    short = decomposed_path(params, 50, 20, source)
    with pytest.raises(ValueError):
        event_flags(short, short, None, params, 2.0, 1.0)
    xpath = decomposed_path(params, 55, 110, source)
    ypath = decomposed_path(params, 45, 110, source)
    flags = event_flags(xpath, ypath, None, params, 1e6, 1.0)
    assert flags.E and flags.F and flags.G
    assert not flags.H
    assert not flags.all


def test_matched_gap_bound():
    assert matched_gap_bound(ChainParams(100, 4), 1.0) == pytest.approx(4 * math.sqrt(math.log(100)))



def test_event_flags_skip_right_count_after_merge():
    params = ChainParams(100, 2)
    # one macro step: a red drawn early and returned late, the stored ball
    # rejoins the right urn at the last micro-time
    path = DecomposedPath(params, np.array([50, 50, 49, 49, 50]), np.array([50, 50, 50, 50, 50]))
    flags = event_flags(path, path, 0, params, 0.25, 0.01)
    assert flags.all


@pytest.mark.parametrize("seed", range(40))
def test_events_bound_matched_gap_on_paths(seed):
    params = ChainParams(100, 5)
    rng = np.random.default_rng(seed)
    xpath = decomposed_path(params, 55, event_horizon(params, 1.0), rng)
    ypath = decomposed_path(params, 45, event_horizon(params, 1.0), rng)
    tau = tau_match_from_paths(xpath, ypath)
    flags = event_flags(xpath, ypath, tau, params, 1.0, 1.0)
    if flags.all:
        assert matched_gap(xpath, ypath, tau, params) <= matched_gap_bound(params, 1.0)


def test_event_sample_has_no_violations_at_unit_kappa():
    params = ChainParams(100, 5)
    bound = matched_gap_bound(params, 1.0)
    assert 55 - 45 > bound
    sample = event_sample(params, 55, 45, 1.0, 1.0, reps=3000, seed=11)
    assert sample.flags.shape == (3000, 4)
    assert sample.held.sum() > 0
    assert sample.violations(bound) == 0
    matched = sample.tau >= 0
    assert np.all(sample.flags[:, 3] == (matched & (sample.tau <= 100)))
    assert np.all(sample.gaps[~matched] == 0)


def test_event_sample_independent_of_jobs():
    params = ChainParams(40, 4)
    one = event_sample(params, 24, 16, 1.0, 1.0, reps=300, seed=5, jobs=1)
    two = event_sample(params, 24, 16, 1.0, 1.0, reps=300, seed=5, jobs=2)
    assert np.array_equal(one.flags, two.flags)
    assert np.array_equal(one.tau, two.tau)
    assert np.array_equal(one.gaps, two.gaps)


def test_event_sample_rejects_bad_arguments():
    params = ChainParams(40, 4)
    with pytest.raises(ValueError):
        event_sample(params, 41, 16, 1.0, 1.0, reps=10, seed=0)
    with pytest.raises(ValueError):
        event_sample(params, 24, 16, 0.0, 1.0, reps=10, seed=0)
    with pytest.raises(ValueError):
        event_sample(params, 24, 16, 1.0, 1.0, reps=0, seed=0)

def test_gap_hitting():
    params = ChainParams(200, 2)
    sample = remark_gap_hitting(params, 100, 101, 10, reps=50, seed=7)
    assert np.all(sample.values == 0)
    sample = remark_gap_hitting(params, 110, 90, 400, reps=200, seed=7)
    assert np.all(sample.values <= 400)
    assert hitting_bound(params, 20, 0.5, 100) == pytest.approx(16.0)


def test_kappa_schedule():
    kappa = KappaSchedule.from_gamma(1.0)
    assert kappa.kappa1 == 1.0
    assert kappa.kappa2 == pytest.approx(math.exp(3.0))
    assert kappa.kappa3 == pytest.approx(math.exp(4.0))
    assert kappa.kappa4 == 1.0
    with pytest.raises(ValueError):
        KappaSchedule.from_gamma(0.0)


def test_four_phase_tied_start_finishes_at_burn_in(source):
    params = ChainParams(100, 10)
    kappa = KappaSchedule.from_gamma(1.0, scale=(1000.0, 1.0, 1.0, 1.0))
    record = four_phase_run(params, 50, 1.0, source, kappa=kappa, y0=50)
    t_a = burn_in(params)
    assert (record.tau1, record.tau2, record.tau3, record.tau4) == (t_a, t_a, t_a, t_a)
    assert record.censored_phase is None
    assert record.final_gap == 0
    assert record.last_step_tv == 0.0


def test_four_phase_sample_records():
    params = ChainParams(100, 10)
    records = four_phase_sample(params, 0, 1.0, reps=16, seed=8)
    assert len(records) == 16
    for record in records:
        times = [t for t in (record.tau1, record.tau2, record.tau3, record.tau4) if t is not None]
        assert times == sorted(times)
        if record.censored_phase is None:
            assert len(times) == 4
            assert record.last_step_tv is not None
        else:
            assert record.censored_phase in PHASES
            assert record.last_step_tv is None
    again = four_phase_sample(params, 0, 1.0, reps=16, seed=8)
    assert [r.row(8, i) for i, r in enumerate(records)] == [r.row(8, i) for i, r in enumerate(again)]


def test_four_phase_rejects():
    with pytest.raises(ValueError):
        four_phase_sample(ChainParams(10, 6), 0, 1.0, reps=2, seed=0)
    with pytest.raises(ValueError):
        four_phase_sample(ChainParams(10, 2), 0, 0.0, reps=2, seed=0)


def test_last_step_tv():
    params = ChainParams(30, 4)
    assert last_step_tv(params, 7, 7) == 0.0
    assert 0.0 < last_step_tv(params, 7, 8) < 1.0
