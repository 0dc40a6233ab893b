import json

import pytest

from urncut.core.kernel import ChainParams, build_kernel
from urncut.core.mixing import cutoff_profile, mixing_time, policy_agreement, window_diagnostic
from urncut.core.verification import run_exact_suite, run_stochastic_suite
from urncut.utils import default_jobs

pytestmark = pytest.mark.slow

STOCHASTIC_ASSERTED = (
    "contraction",
    "monotone_violations",
    "monotone_marginal",
    "decomposed_equality",
    "sampler_tv",
    "chebyshev_window",
    "doob_sup",
    "couple_survival",
    "hitting_lemma",
    "supermartingale_drift",
    "matched_gap_events",
)


def test_exact_suite_defaults_all_pass():
    reports = run_exact_suite(jobs=default_jobs())
    failed = [r for r in reports if not r.passed]
    assert not failed, failed
    (policy,) = [r for r in reports if r.name == "extremes_vs_all_states"]
    assert policy.statistic <= 1e-12


def test_cutoff_ladder():
    records = window_diagnostic([ChainParams(n, 5) for n in (250, 500, 1000, 2000, 4000)], 0.25)
    assert all(r.nw_ok for r in records)
    ratios = [r.ratio for r in records]
    assert all(b < a for a, b in zip(ratios, ratios[1:]))
    assert 0.75 <= ratios[-1] <= 1.75
    (_, window), = cutoff_profile(ChainParams(4000, 5), [2.0])
    assert window <= 0.1


@pytest.mark.parametrize("n, k", [(120, 7), (300, 1), (300, 37), (300, 150)])
def test_extremes_policy_through_tail_mixing_time(n, k):
    kernel = build_kernel(ChainParams(n, k))
    agreement = policy_agreement(kernel, 0.01)
    assert agreement.horizon == mixing_time(kernel, 0.01, "all-states")
    assert agreement.max_gap <= 1e-12
    assert mixing_time(kernel, 0.25, "extremes") == mixing_time(kernel, 0.25, "all-states")


def test_stochastic_suite_small_grid():
    reports = run_stochastic_suite([(100, 10)], reps=2000, seed=0, jobs=default_jobs())
    names = [r.name for r in reports]
    assert names[:3] == ["contraction", "monotone_violations", "monotone_marginal"]
    assert "remark_decay" in names and "events_held" in names
    by_name = {r.name: r for r in reports}
    for name in STOCHASTIC_ASSERTED:
        assert by_name[name].direction != "info", by_name[name]
        assert by_name[name].passed, by_name[name]
    assert by_name["matched_gap_events"].statistic == 0.0
    assert all(r.replicas > 0 for r in reports if r.direction != "info")


def test_stochastic_suite_reproducible_across_blocks_and_jobs():
    # more replicas than one block so the block split and the worker count both matter
    runs = [run_stochastic_suite([(60, 6)], reps=5000, seed=21, jobs=jobs) for jobs in (1, 1, 3)]
    encoded = [json.dumps([r.to_dict() for r in reports]) for reports in runs]
    assert encoded[0] == encoded[1] == encoded[2]
