"""Numerical certification suites.

Every check yields one CheckReport. The exact suite is deterministic and
seed-free; the stochastic suite accepts at three standard errors with the
normal approximation; the MGF check measures the sub-Gaussian constant of
the centred hypergeometric law. A failing check is recorded and the suite
carries on.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from typing import Optional

import numpy as np

from urncut.core import ref_impl
from urncut.core.combinatorics import (
    DiscretePMF,
    hyper_vs_binom_row,
    log_exp_moment_hypergeom,
    shifted_binom_terms,
    tv,
)
from urncut.core.couplings import (
    CoupledPair,
    DecomposedState,
    contraction_estimate,
    decomposed_law,
    drift_variance_check,
    enumerated_drift,
    event_sample,
    hitting_bound,
    last_step_tv,
    matched_gap_bound,
    monotone_run_many,
    monotone_violations,
    remark_gap_hitting,
    tau_couple_survival,
    tau_match_sample,
)
from urncut.core.kernel import ChainParams, Stepper, advance, apply, build_kernel, stationary, stationary_sample
from urncut.core.mixing import cutoff_profile, mixing_profile, mixing_time, nw_upper, policy_agreement, window_diagnostic
from urncut.core.sources import concat, run_replicas
from urncut.core.spectral import (
    burn_in,
    chebyshev_bound,
    conditional_mean,
    conditional_variance,
    doob_bound,
    eigen_pair,
    f1,
    f2,
    martingale_value,
)
from urncut.logging_utils import get_logger
from urncut.utils import fan_out

logger = get_logger("urncut.verification")

DIRECTIONS = ("<=", "=", "info")
REPORT_FIELDS = ("name", "n", "k", "statistic", "bound", "direction", "tolerance", "passed", "replicas", "seed")

ORACLE_N_MAX = 12
MARGINAL_N_MAX = 8
DRIFT_N_MAX = 6
IDENTITY_N_MAX = 500
MOMENT_T_MAX = 200
MARTINGALE_TIMES = (0, 5, 20)
SYMMETRY_N_MAX = 40
SYMMETRY_T_MAX = 50
POLICY_T_MAX = 200
POLICY_TAIL_EPS = 0.01
SHIFTED_TREND_K = [2**e for e in range(4, 17)]
SHIFTED_FINAL_MAX = 0.06
SHIFTED_TIE_SLACK = 1e-2
SHIFTED_TOLERANCE = 1e-14
ORACLE_TOLERANCE = 1e-13
SPECTRAL_TOLERANCE = 1e-10
MOMENT_TOLERANCE = 1e-9
LAST_STEP_GAPS = 20
LAST_STEP_GAP1_MAX = 0.1
CUTOFF_RATIO_BAND = (0.75, 1.75)
CUTOFF_WINDOW_MAX = 0.1
MARGINAL_TIMES = (1, 2, 5)
HITTING_TIMES = (200, 400, 800, 1600)
REMARK_GAMMAS = (1, 2, 4, 8)
MONOTONE_STEP_TARGET = 10_000_000
EVENT_KAPPA2 = 1.0
EVENT_GAMMA1 = 1.0
MGF_DRAW_FRACTION = 10
SIGMAS = 3.0


@dataclass(frozen=True)
class CheckReport:
    name: str
    n: int
    k: int
    statistic: float
    bound: float
    direction: str
    tolerance: float
    passed: bool
    replicas: int = 0
    seed: Optional[int] = None

    def to_dict(self):
        out = {}
        for key in REPORT_FIELDS:
            value = getattr(self, key)
            if isinstance(value, float) and not math.isfinite(value):
                value = None
            out[key] = value
        return out


def report(name, n, k, statistic, bound, direction="<=", tolerance=0.0, replicas=0, seed=None):
    """Build a CheckReport, deciding `passed` from the stated comparison."""
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    statistic, bound, tolerance = float(statistic), float(bound), float(tolerance)
    if direction == "info":
        passed = True
    elif direction == "=":
        passed = abs(statistic - bound) <= tolerance
    else:
        passed = statistic <= bound + tolerance
    if not passed:
        logger.warning("check_failed name=%s n=%s k=%s statistic=%r bound=%r", name, n, k, statistic, bound)
    return CheckReport(name, int(n), int(k), statistic, bound, direction, tolerance, bool(passed), int(replicas), seed)


class _Worst:
    """Track the largest statistic seen over a grid and where it occurred."""

    def __init__(self):
        self.value, self.n, self.k = -math.inf, 0, 0

    def add(self, value, n, k):
        if value > self.value:
            self.value, self.n, self.k = float(value), n, k

    def report(self, name, bound, direction="<=", tolerance=0.0):
        value = max(self.value, 0.0) if direction != "=" else self.value
        return report(name, self.n, self.k, value, bound, direction, tolerance)


# ---------------------------------------------------------------------------
# exact suite
# ---------------------------------------------------------------------------


def _kernel_checks(n_max, tolerance):
    rows, balance, moments = _Worst(), _Worst(), _Worst()
    for n in range(1, n_max + 1):
        pi = stationary(n)
        moments.add(max(abs(pi.mean() - n / 2.0), abs(pi.variance() - n**2 / (4.0 * (2 * n - 1)))), n, 0)
        for k in range(n + 1):
            kernel = build_kernel(ChainParams(n, k))
            rows.add(np.max(np.abs(kernel.band.sum(axis=1) - 1.0)), n, k)
            balance.add(kernel.balance_error, n, k)
    return [
        rows.report("kernel_row_sum", tolerance),
        balance.report("detailed_balance", tolerance),
        moments.report("stationary_moments", MOMENT_TOLERANCE),
    ]


def _oracle_check(n_max):
    worst = _Worst()
    for n in range(1, min(n_max, ORACLE_N_MAX) + 1):
        for k in range(n + 1):
            dense = build_kernel(ChainParams(n, k)).dense
            exact = ref_impl.kernel(n, k)
            err = max(abs(dense[i, j] - float(exact[i][j])) for i in range(n + 1) for j in range(n + 1))
            worst.add(err, n, k)
    return [worst.report("rational_oracle", ORACLE_TOLERANCE)]


def _spectral_checks(spectral_n_max):
    first, second = _Worst(), _Worst()
    for n in range(2, spectral_n_max + 1):
        for k in range(n // 2 + 1):
            kernel = build_kernel(ChainParams(n, k))
            first.add(eigen_pair(kernel, 1).residual, n, k)
            second.add(eigen_pair(kernel, 2).residual, n, k)
    identity = _Worst()
    for n in range(2, IDENTITY_N_MAX + 1):
        x = np.arange(n + 1)
        gap = f1(n, x) ** 2 - (1.0 / (2 * n - 1) + (2 * n - 2) / (2 * n - 1) * f2(n, x))
        identity.add(np.max(np.abs(gap)), n, 0)
    return [
        first.report("eigen_f1", SPECTRAL_TOLERANCE),
        second.report("eigen_f2", SPECTRAL_TOLERANCE),
        identity.report("f1_f2_identity", 1e-12),
    ]


def _relative(a, b):
    return np.abs(a - b) / np.maximum(np.abs(b), 1.0)


def _moment_checks(moment_n_max):
    """Closed forms against exact propagation of x and x^2 under P^t, every start at once."""
    mean_err, var_err, mart_err = _Worst(), _Worst(), _Worst()
    for n in range(2, moment_n_max + 1):
        states = np.arange(n + 1, dtype=float)
        for k in range(1, n // 2 + 1):
            params = ChainParams(n, k)
            kernel = build_kernel(params)
            g1, g2 = states.copy(), states**2
            for t in range(1, MOMENT_T_MAX + 1):
                g1, g2 = apply(kernel, g1), apply(kernel, g2)
                mean_err.add(np.max(_relative(g1, conditional_mean(params, t, states))), n, k)
                var_err.add(np.max(_relative(g2 - g1**2, conditional_variance(params, t, states))), n, k)
            if 2 * k != n:
                for t in MARTINGALE_TIMES:
                    ahead = apply(kernel, martingale_value(params, t + 1, states))
                    mart_err.add(np.max(_relative(ahead, martingale_value(params, t, states))), n, k)
    return [
        mean_err.report("conditional_mean", MOMENT_TOLERANCE),
        var_err.report("conditional_variance", MOMENT_TOLERANCE),
        mart_err.report("martingale_identity", MOMENT_TOLERANCE),
    ]


def _variance_window_check(n_max):
    worst = _Worst()
    for n in range(2, n_max + 1):
        for k in range(1, n // 2 + 1):
            params = ChainParams(n, k)
            t = burn_in(params)
            for x in range(n + 1):
                drift = abs(conditional_mean(params, t, x) - n / 2.0) / math.sqrt(n)
                worst.add(max(drift, conditional_variance(params, t, x) / n), n, k)
    return [worst.report("variance_window", 1.0, tolerance=1e-12)]


def _hyper_binom_check(tv_grid_max):
    """TV(Hyper, Bin) / (4r/N); only r < N/4 matters since the bound is >= 1 beyond."""
    worst = _Worst()
    for N in range(2, tv_grid_max + 1):
        for r in range(1, (N + 3) // 4):
            row = hyper_vs_binom_row(N, r)[: N // 2 + 1]
            worst.add(float(row.max()) / (4.0 * r / N), N, r)
    return [worst.report("hyper_vs_binom", 1.0, tolerance=1e-12)]


def _shifted_checks(shifted_k_max):
    crossing = _Worst()
    for k in range(1, shifted_k_max + 1):
        for g in range(1, math.isqrt(k) + 1):
            direct, mass, _ = shifted_binom_terms(k, g)
            crossing.add(abs(direct - mass), k, g)

    values, ratios = [], []
    for k in SHIFTED_TREND_K:
        g = math.isqrt(math.isqrt(k))
        values.append(shifted_binom_terms(k, g)[0])
        ratios.append(Fraction(g * g, k))
    misses, where = 0, SHIFTED_TREND_K[0]
    for i in range(1, len(values)):
        rise = values[i] - values[i - 1]
        if ratios[i] < ratios[i - 1]:
            bad = rise >= 0.0
        elif ratios[i] == ratios[i - 1]:
            # equal g/sqrt(k) ratios share a limit; only bounded drift is asked there
            bad = abs(rise) > SHIFTED_TIE_SLACK
        else:
            continue
        if bad:
            misses, where = misses + 1, SHIFTED_TREND_K[i]
    last_k = SHIFTED_TREND_K[-1]
    return [
        crossing.report("shifted_crossing", SHIFTED_TOLERANCE),
        report("shifted_trend", where, math.isqrt(math.isqrt(where)), misses, 0.0, "="),
        report("shifted_final", last_k, math.isqrt(math.isqrt(last_k)), values[-1], SHIFTED_FINAL_MAX),
    ]


def _complement_check(n_max):
    worst = _Worst()
    for n in range(1, min(n_max, SYMMETRY_N_MAX) + 1):
        reflect = np.arange(n, -1, -1)
        for k in range(n + 1):
            a = build_kernel(ChainParams(n, k)).dense
            b = build_kernel(ChainParams(n, n - k)).dense
            worst.add(np.max(np.abs(b - a[:, reflect])), n, k)
            if 0 < k < n:
                da = mixing_profile(build_kernel(ChainParams(n, k)), SYMMETRY_T_MAX).distances
                db = mixing_profile(build_kernel(ChainParams(n, n - k)), SYMMETRY_T_MAX).distances
                worst.add(np.max(np.abs(da - db)), n, k)
    return [worst.report("complement_symmetry", 1e-12)]


def _policy_row(n):
    """Worst extremes-vs-all-states gap over every k <= n/2, up to t_mix(0.01)."""
    worst = (0.0, 1)
    for k in range(1, n // 2 + 1):
        agreement = policy_agreement(build_kernel(ChainParams(n, k)), POLICY_TAIL_EPS)
        if agreement.max_gap > worst[0]:
            worst = (agreement.max_gap, k)
    return worst


def _policy_checks(n_max, policy_n_max, eps, jobs):
    policy, upper, monotone = _Worst(), _Worst(), _Worst()
    for n in range(2, n_max + 1):
        for k in range(1, n // 2 + 1):
            kernel = build_kernel(ChainParams(n, k))
            extremes = mixing_profile(kernel, POLICY_T_MAX, "extremes").distances
            monotone.add(np.max(np.diff(extremes)), n, k)
            upper.add(mixing_time(kernel, eps) - nw_upper(kernel.params, eps), n, k)
    ns = list(range(2, policy_n_max + 1))
    for n, (gap, k) in zip(ns, fan_out(_policy_row, ns, jobs)):
        policy.add(gap, n, k)
    logger.info("policy_sweep n_max=%s worst_gap=%r", policy_n_max, policy.value)
    return [
        policy.report("extremes_vs_all_states", 1e-12),
        upper.report("nw_upper", 0.0),
        monotone.report("profile_monotone", 1e-12),
    ]


def _contraction_exact(n_max):
    """Count of gap-1 pairs whose exact E|gap'| differs from 1 - 2k(n-k)/n^2."""
    misses, worst_n, worst_k = 0, 0, 0
    for n in range(1, min(n_max, ORACLE_N_MAX) + 1):
        for k in range(n + 1):
            target = 1 - Fraction(2 * k * (n - k), n * n)
            for x in range(1, n + 1):
                if ref_impl.expected_gap(n, k, x, x - 1) != target:
                    misses, worst_n, worst_k = misses + 1, n, k
    return [report("contraction_exact", worst_n, worst_k, misses, 0.0, "=")]


def _marginal_exact(n_max):
    misses, worst_n, worst_k = 0, 0, 0
    for n in range(1, min(n_max, MARGINAL_N_MAX) + 1):
        for k in range(n + 1):
            exact = ref_impl.kernel(n, k)
            for x in range(n + 1):
                for y in range(n + 1):
                    law = ref_impl.monotone_law(n, k, x, y)
                    left = [Fraction(0)] * (n + 1)
                    right = [Fraction(0)] * (n + 1)
                    for (xp, yp), p in law.items():
                        left[xp] += p
                        right[yp] += p
                    if left != exact[x] or right != exact[y]:
                        misses, worst_n, worst_k = misses + 1, n, k
    return [report("monotone_marginal_exact", worst_n, worst_k, misses, 0.0, "=")]


def _decomposed_states(params, r):
    """Every container configuration the decomposed chain can hold at phase r."""
    n, k = params.n, params.k
    stored = min(r, k)
    left_size = n - r if r < k else n - 2 * k + r
    right_size = n if r < k else n - r + k
    for storage in range(stored + 1):
        for xleft in range(left_size + 1):
            xright = n - xleft - storage
            if 0 <= xright <= right_size:
                yield xleft, xright, storage


def _drift_exact(n_max):
    worst = _Worst()
    for n in range(2, min(n_max, DRIFT_N_MAX) + 1):
        for k in range(1, n // 2 + 1):
            params = ChainParams(n, k)
            for r in range(2 * k):
                states = [DecomposedState(r, r, *s) for s in _decomposed_states(params, r)]
                for xs in states:
                    for ys in states:
                        closed = drift_variance_check(xs, ys, params)
                        summed = enumerated_drift(xs, ys, params)
                        worst.add(max(abs(closed.drift - summed.drift), abs(closed.variance - summed.variance)), n, k)
    return [worst.report("drift_exact", 1e-12)]


def _last_step_checks(last_step_params):
    n, k = last_step_params
    params = ChainParams(n, k)
    mid = n // 2
    values = [last_step_tv(params, mid, mid - g) for g in range(LAST_STEP_GAPS + 1)]
    drop = max(values[i - 1] - values[i] for i in range(1, len(values)))
    return [
        report("last_step_zero", n, k, values[0], 0.0, "=", 1e-15),
        report("last_step_monotone", n, k, max(drop, 0.0), 0.0, tolerance=1e-12),
        report("last_step_gap1", n, k, values[1], LAST_STEP_GAP1_MAX),
    ]


def _cutoff_checks(ladder, cutoff_k, eps, jobs):
    records = window_diagnostic([ChainParams(n, cutoff_k) for n in ladder], eps, jobs=jobs)
    failures = sum(not r.nw_ok for r in records)
    # strictly decreasing: an equal consecutive ratio counts as a miss
    stalls = sum(b.ratio >= a.ratio for a, b in zip(records, records[1:]))
    last = records[-1]
    lo, hi = CUTOFF_RATIO_BAND
    params = ChainParams(last.n, cutoff_k)
    (_, window), = cutoff_profile(params, [2.0])
    return [
        report("cutoff_nw_upper", last.n, cutoff_k, failures, 0.0, "="),
        report("cutoff_ratio_trend", last.n, cutoff_k, stalls, 0.0, "="),
        report("cutoff_ratio_band", last.n, cutoff_k, abs(last.ratio - (lo + hi) / 2), (hi - lo) / 2),
        report("cutoff_window_decay", last.n, cutoff_k, window, CUTOFF_WINDOW_MAX),
    ]


def run_exact_suite(
    n_max=60,
    tolerance=1e-12,
    tv_grid_max=500,
    shifted_k_max=2000,
    policy_n_max=300,
    spectral_n_max=200,
    moment_n_max=200,
    cutoff_ladder=(250, 500, 1000, 2000, 4000),
    cutoff_k=5,
    last_step_params=(10000, 400),
    eps=0.25,
    jobs=1,
):
    """All deterministic checks, in declaration order.

    `n_max` bounds the kernel, window, symmetry and enumeration sections;
    the spectral, moment and policy sweeps carry their own limits.
    """
    for name, value in (("n_max", n_max), ("policy_n_max", policy_n_max), ("spectral_n_max", spectral_n_max),
                        ("moment_n_max", moment_n_max)):
        if not 1 <= value <= 300:
            raise ValueError(f"{name} must lie in [1, 300], got {value}")
    sections = [
        partial(_kernel_checks, n_max, tolerance),
        partial(_oracle_check, n_max),
        partial(_spectral_checks, spectral_n_max),
        partial(_moment_checks, moment_n_max),
        partial(_variance_window_check, n_max),
        partial(_hyper_binom_check, tv_grid_max),
        partial(_shifted_checks, shifted_k_max),
        partial(_complement_check, n_max),
        partial(_policy_checks, n_max, policy_n_max, eps, jobs),
        partial(_contraction_exact, n_max),
        partial(_marginal_exact, n_max),
        partial(_drift_exact, n_max),
        partial(_last_step_checks, last_step_params),
        partial(_cutoff_checks, list(cutoff_ladder), cutoff_k, eps, jobs),
    ]
    reports = []
    for section in sections:
        reports.extend(section())
    logger.info("exact_suite checks=%s failed=%s", len(reports), sum(not r.passed for r in reports))
    return reports


# ---------------------------------------------------------------------------
# stochastic suite
# ---------------------------------------------------------------------------


def _proportion(count, reps):
    p = count / reps
    return p, math.sqrt(max(p * (1.0 - p), 1.0 / reps) / reps)


def _tv_bound(law, reps):
    """Acceptance for an empirical TV against an exact law of the given support."""
    if reps >= 10**6:
        return 0.005
    support = int(np.count_nonzero(law.weights))
    return math.sqrt(support / reps)


def _exact_law(params, x0, t):
    start = np.zeros((1, params.n + 1))
    start[0, x0] = 1.0
    row = advance(build_kernel(params), start, t)[0]
    return DiscretePMF(0, row / row.sum())


def _stationary_block(n, lanes, source):
    return stationary_sample(n, source, size=lanes)


def _macro_block(params, x0, t_max, lanes, source):
    """Macro paths from x0: shape (lanes, t_max + 1)."""
    stepper = Stepper(params)
    xs = np.full(lanes, x0, dtype=np.int64)
    path = np.empty((lanes, t_max + 1), dtype=np.int64)
    path[:, 0] = xs
    for t in range(1, t_max + 1):
        xs = stepper.step(xs, source)
        path[:, t] = xs
    return path


def _window_events(params, t1, t2, r, lanes, source):
    path = _macro_block(params, 0, t2, lanes, source)
    far = np.abs(path - params.n / 2.0) >= r
    return np.stack((far[:, t1], far[:, t1:t2 + 1].any(axis=1)), axis=1)


def _monotone_checks(params, reps, seed, steps, jobs):
    n, k = params.n, params.k
    out = []
    est = contraction_estimate(params, reps, seed, jobs=jobs)
    out.append(report("contraction", n, k, est.mean, est.target, "=", SIGMAS * est.stderr, reps, seed))
    bad = monotone_violations(params, n, 0, steps, reps, seed, jobs)
    out.append(report("monotone_violations", n, k, bad, 0.0, "=", 0.0, reps * steps, seed))
    worst, bound = 0.0, math.inf
    x0, y0 = (3 * n) // 4, n // 4
    for t in MARGINAL_TIMES:
        both = concat(run_replicas(partial(monotone_run_many, params, x0, y0, t), reps, seed, f"marginal-{t}", jobs), axis=1)
        for start, samples in ((x0, both[0]), (y0, both[1])):
            exact = _exact_law(params, start, t)
            dist = tv(DiscretePMF.from_samples(samples), exact)
            if dist - _tv_bound(exact, reps) > worst - bound:
                worst, bound = dist, _tv_bound(exact, reps)
    out.append(report("monotone_marginal", n, k, worst, bound, replicas=reps, seed=seed))
    return out


def _decomposed_checks(params, reps, seed, jobs):
    n, k = params.n, params.k
    x0 = n // 4
    worst, bound = 0.0, math.inf
    for t in MARGINAL_TIMES:
        exact = _exact_law(params, x0, t)
        dist = tv(decomposed_law(params, x0, t, reps, seed, jobs), exact)
        if dist - _tv_bound(exact, reps) > worst - bound:
            worst, bound = dist, _tv_bound(exact, reps)
    samples = concat(run_replicas(partial(_stationary_block, n), reps, seed, "stationary", jobs))
    pi = stationary(n).as_pmf()
    return [
        report("decomposed_equality", n, k, worst, bound, replicas=reps, seed=seed),
        report("sampler_tv", n, k, tv(DiscretePMF.from_samples(samples), pi), _tv_bound(pi, reps), replicas=reps, seed=seed),
    ]


def _window_checks(params, reps, seed, jobs):
    n, k = params.n, params.k
    t1 = burn_in(params)
    t2 = t1 + math.ceil(n / (4.0 * k))
    r = 3.0 * math.sqrt(n)
    events = concat(run_replicas(partial(_window_events, params, t1, t2, r), reps, seed, "window", jobs))
    p_point, se_point = _proportion(int(events[:, 0].sum()), reps)
    p_sup, se_sup = _proportion(int(events[:, 1].sum()), reps)
    out = [report("chebyshev_window", n, k, p_point, chebyshev_bound(n, r), tolerance=SIGMAS * se_point,
                  replicas=reps, seed=seed)]
    if 2 * k != n:
        out.append(report("doob_sup", n, k, p_sup, doob_bound(params, t1, t2, r, 0), tolerance=SIGMAS * se_sup,
                          replicas=reps, seed=seed))
    return out


def _survival_check(params, reps, seed, jobs):
    n, k = params.n, params.k
    pair = CoupledPair((3 * n) // 4, n // 4)
    r = 5
    rho = 1.0 - 2.0 * k * (n - k) / n**2
    t_max = max(1, math.ceil(math.log(100.0 * pair.gap / r) / -math.log(rho)))
    curve = tau_couple_survival(params, pair, r, t_max, reps, seed, jobs)
    i = int(np.argmax(curve.survival - curve.bound - SIGMAS * curve.stderr))
    return [report("couple_survival", n, k, curve.survival[i], curve.bound[i], tolerance=SIGMAS * curve.stderr[i],
                   replicas=reps, seed=seed)]


def _matching_checks(params, reps, seed, jobs):
    n, k = params.n, params.k
    x0, y0 = n // 2 + 1, n // 2 - 1
    s_max = HITTING_TIMES[-1] + 1
    sample = tau_match_sample(params, x0, y0, s_max, reps, seed, truncation="quarter-band", jobs=jobs)
    sigma = math.sqrt(sample.sigma2)
    worst, chosen = -math.inf, None
    for u in HITTING_TIMES:
        if u <= 12.0 / sample.sigma2:
            continue
        p, se = _proportion(int(np.count_nonzero((sample.values > u) | sample.censored)), reps)
        bound = hitting_bound(params, x0 - y0, sigma, u)
        if p - bound - SIGMAS * se > worst:
            worst, chosen = p - bound - SIGMAS * se, (p, bound, se)
    out = []
    if chosen is None:
        out.append(report("hitting_lemma", n, k, 0.0, 0.0, "info", replicas=reps, seed=seed))
    else:
        p, bound, se = chosen
        out.append(report("hitting_lemma", n, k, p, bound, tolerance=SIGMAS * se, replicas=reps, seed=seed))
    out.append(report("supermartingale_drift", n, k, sample.drift_residual, 0.0, "=",
                      SIGMAS * sample.drift_stderr, reps, seed))
    censored = int(np.count_nonzero(sample.censored))
    out.append(report("censored_runs", n, k, censored / reps, 0.0, "info", replicas=reps, seed=seed))
    return out


def event_starts(params, kappa2):
    """Starts around n/2 whose gap just exceeds the matched-gap bound, or None if they leave [0, n]."""
    gap = math.floor(matched_gap_bound(params, kappa2)) + 1
    x0 = params.n // 2 + (gap + 1) // 2
    y0 = x0 - gap
    if y0 < 0 or x0 > params.n:
        return None
    return x0, y0


def _event_check(params, reps, seed, jobs):
    """Pairs where E, F, G and H all held must match within 2 kappa2 sqrt(k ln n)."""
    n, k = params.n, params.k
    bound = matched_gap_bound(params, EVENT_KAPPA2)
    starts = event_starts(params, EVENT_KAPPA2)
    if starts is None:
        return [report("matched_gap_events", n, k, math.nan, bound, "info", replicas=0, seed=seed)]
    sample = event_sample(params, *starts, EVENT_KAPPA2, EVENT_GAMMA1, reps, seed, jobs)
    held = int(np.count_nonzero(sample.held))
    return [
        report("matched_gap_events", n, k, sample.violations(bound), 0.0, "=", 0.0, reps, seed),
        report("events_held", n, k, held / reps, bound, "info", replicas=reps, seed=seed),
    ]


def _remark_check(params, reps, seed, jobs):
    """Share of independent pairs started 6k apart whose gap is still >= 4k after gamma n/k steps."""
    n, k = params.n, params.k
    x0, y0 = n // 2 + 3 * k, n // 2 - 3 * k
    if y0 < n / 4.0 or x0 > 3.0 * n / 4.0:
        return [report("remark_decay", n, k, math.nan, math.nan, "info", replicas=0, seed=seed)]
    u_max = math.ceil(max(REMARK_GAMMAS) * n / k)
    sample = remark_gap_hitting(params, x0, y0, u_max, reps, seed, jobs)
    waiting = [(sample.values > math.ceil(g * n / k)) | sample.censored for g in REMARK_GAMMAS]
    first, last = (np.count_nonzero(w) / reps for w in (waiting[0], waiting[-1]))
    return [report("remark_decay", n, k, last, first, "info", replicas=reps, seed=seed)]


def run_stochastic_suite(grid, reps, seed, jobs=1):
    """Monte Carlo checks on every (n, k) of the grid, accepted at three standard errors."""
    if reps < 2:
        raise ValueError(f"reps must be at least 2, got {reps}")
    grid = [ChainParams(int(n), int(k)) for n, k in grid]
    steps = max(50, math.ceil(MONOTONE_STEP_TARGET / (len(grid) * reps)))
    reports = []
    for params in grid:
        logger.info("stochastic_suite n=%s k=%s reps=%s seed=%s", params.n, params.k, reps, seed)
        reports.extend(_monotone_checks(params, reps, seed, steps, jobs))
        reports.extend(_decomposed_checks(params, reps, seed, jobs))
        reports.extend(_window_checks(params, reps, seed, jobs))
        reports.extend(_survival_check(params, reps, seed, jobs))
        reports.extend(_matching_checks(params, reps, seed, jobs))
        reports.extend(_remark_check(params, reps, seed, jobs))
        reports.extend(_event_check(params, reps, seed, jobs))
    return reports


# ---------------------------------------------------------------------------
# sub-Gaussian constant
# ---------------------------------------------------------------------------


def _draw_sizes(N):
    """Draw sizes r <= N / 10; needs N >= 10."""
    return sorted({1, max(1, N // 20), N // MGF_DRAW_FRACTION})


def mgf_constant_probe(grid, h_grid):
    """Measured sub-Gaussian constants of the centred Hyper(N, N/2, r).

    Asserts ln E exp(h(H - EH)) <= h^2 r / 8 on the grid and reports,
    without asserting, the smallest c with ln E <= h^2 r / c against 16.
    """
    h_grid = [float(h) for h in h_grid if h != 0]
    if not h_grid:
        raise ValueError("h grid must contain a non-zero value")
    grid = [int(N) for N in grid]
    small = [N for N in grid if N < MGF_DRAW_FRACTION]
    if small:
        raise ValueError(f"grid sizes must be at least {MGF_DRAW_FRACTION} so that r <= N/{MGF_DRAW_FRACTION}, got {small}")
    reports = []
    for N in grid:
        K = N // 2
        ratio, constant, worst_r = -math.inf, math.inf, 1
        for r in _draw_sizes(N):
            for h in h_grid:
                log_e = log_exp_moment_hypergeom(N, K, r, h)
                cap = h * h * r
                if 8.0 * log_e / cap > ratio:
                    ratio, worst_r = 8.0 * log_e / cap, r
                if log_e > 0:
                    constant = min(constant, cap / log_e)
        reports.append(report("mgf_exponent_8", N, worst_r, ratio, 1.0, tolerance=1e-12))
        reports.append(report("mgf_constant", N, K, constant, 16.0, "info"))
    return reports
