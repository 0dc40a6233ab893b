import math
from dataclasses import dataclass
from functools import partial

import numpy as np

from urncut.core.kernel import RENORMALIZE_EVERY, ChainParams, advance, build_kernel, evolve_many, stationary
from urncut.core.spectral import burn_in
from urncut.logging_utils import get_logger
from urncut.utils import fan_out

logger = get_logger("urncut.mixing")

POLICIES = ("extremes", "all-states")
MAX_STEPS = 10_000_000


class NonConvergenceError(RuntimeError):
    """The chain cannot (or did not) reach the requested distance."""


@dataclass(frozen=True, eq=False)
class MixingProfile:
    params: ChainParams
    start_policy: str
    times: np.ndarray
    distances: np.ndarray


@dataclass(frozen=True)
class CutoffScanRecord:
    n: int
    k: int
    eps: float
    t_mix: int
    t_star: int
    ratio: float
    nw_upper: int
    nw_ok: bool
    remark_upper: int
    nw_lower_shape: float

    def row(self):
        return [self.n, self.k, self.eps, self.t_mix, self.t_star, self.ratio, self.nw_upper, self.nw_ok]


CUTOFF_HEADER = ["n", "k", "eps", "t_mix", "t_star", "ratio", "nw_upper", "nw_ok"]
PROFILE_HEADER = ["n", "k", "t", "d"]


def _starts(n, policy):
    if policy == "extremes":
        starts = np.zeros((2, n + 1))
        starts[0, 0] = starts[1, n] = 1.0
        return starts
    if policy == "all-states":
        return np.eye(n + 1)
    raise ValueError(f"policy must be one of {', '.join(POLICIES)}, got {policy!r}")


def _distances(rows, pi):
    return 0.5 * np.abs(rows - pi[None, :]).sum(axis=1)


def distance_from(kernel, x0, t):
    """TV(delta_x0 P^t, pi_n)."""
    kernel.params.check_state(x0, "x0")
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    start = np.zeros((1, kernel.n + 1))
    start[0, x0] = 1.0
    pi = stationary(kernel.n).weights
    return float(_distances(advance(kernel, start, t), pi)[0])


def worst_distance(kernel, t, policy="extremes"):
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    pi = stationary(kernel.n).weights
    return float(_distances(advance(kernel, _starts(kernel.n, policy), t), pi).max())


def mixing_profile(kernel, t_max, policy="extremes"):
    """d(t) for t = 0..t_max under one start policy."""
    pi = stationary(kernel.n).weights
    rows = _starts(kernel.n, policy)
    distances = [float(_distances(rows, pi).max())]
    for t in range(1, t_max + 1):
        rows = evolve_many(kernel, rows)
        if t % RENORMALIZE_EVERY == 0:
            rows = rows / rows.sum(axis=1, keepdims=True)
        distances.append(float(_distances(rows, pi).max()))
    return MixingProfile(kernel.params, policy, np.arange(t_max + 1), np.array(distances))


def mixing_time(kernel, eps, policy="extremes", max_steps=MAX_STEPS):
    """Least t with d(t) <= eps: doubling to bracket, then bisection.

    The distribution at the lower end of the bracket is cached so every
    bisection step only evolves forward from it.
    """
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not kernel.params.ergodic:
        raise NonConvergenceError(f"chain with n={kernel.n} k={kernel.k} is not ergodic")
    pi = stationary(kernel.n).weights
    lo_rows = _starts(kernel.n, policy)
    if _distances(lo_rows, pi).max() <= eps:
        return 0

    t_lo, t_hi = 0, 1
    while True:
        hi_rows = advance(kernel, lo_rows, t_hi - t_lo)
        if _distances(hi_rows, pi).max() <= eps:
            break
        if t_hi >= max_steps:
            raise NonConvergenceError(f"d(t) > {eps} after {t_hi} steps (n={kernel.n} k={kernel.k})")
        t_lo, lo_rows, t_hi = t_hi, hi_rows, min(2 * t_hi, max_steps)

    while t_hi - t_lo > 1:
        mid = (t_lo + t_hi) // 2
        mid_rows = advance(kernel, lo_rows, mid - t_lo)
        if _distances(mid_rows, pi).max() <= eps:
            t_hi = mid
        else:
            t_lo, lo_rows = mid, mid_rows
    logger.info("mixing_time n=%s k=%s eps=%s policy=%s t_mix=%s", kernel.n, kernel.k, eps, policy, t_hi)
    return t_hi


@dataclass(frozen=True)
class PolicyAgreement:
    params: ChainParams
    horizon: int
    max_gap: float


def policy_agreement(kernel, eps=0.01, max_steps=MAX_STEPS):
    """Largest |d_all(t) - d_extremes(t)| for t up to the all-states t_mix(eps).

    Every start is evolved at once; the extremes policy reads rows 0 and n
    of the same evolution, so the horizon is exactly t_mix(eps).
    """
    if not kernel.params.ergodic:
        raise NonConvergenceError(f"chain with n={kernel.n} k={kernel.k} is not ergodic")
    pi = stationary(kernel.n).weights
    rows = _starts(kernel.n, "all-states")
    t, gap = 0, 0.0
    while True:
        d = _distances(rows, pi)
        gap = max(gap, float(d.max() - max(d[0], d[-1])))
        if d.max() <= eps:
            break
        if t >= max_steps:
            raise NonConvergenceError(f"d(t) > {eps} after {t} steps (n={kernel.n} k={kernel.k})")
        rows = evolve_many(kernel, rows)
        t += 1
        if t % RENORMALIZE_EVERY == 0:
            rows = rows / rows.sum(axis=1, keepdims=True)
    return PolicyAgreement(kernel.params, t, gap)


def cutoff_time(params):
    return params.n / (4.0 * params.k) * math.log(params.n)


def cutoff_profile(params, multipliers, policy="extremes", kernel=None):
    """[(c, d(ceil(c (n/4k) ln n)))] for each multiplier c."""
    if not params.ergodic:
        raise NonConvergenceError(f"chain with n={params.n} k={params.k} is not ergodic")
    kernel = kernel or build_kernel(params)
    pi = stationary(params.n).weights
    base = cutoff_time(params)
    wanted = sorted({math.ceil(c * base) for c in multipliers})
    rows, now, at = _starts(params.n, policy), 0, {}
    for t in wanted:
        rows = advance(kernel, rows, t - now)
        now = t
        at[t] = float(_distances(rows, pi).max())
    return [(c, at[math.ceil(c * base)]) for c in multipliers]


def nw_upper(params, eps):
    """ceil((n/2k) ln(n/eps)), with k taken on the k <= n/2 side."""
    k = min(params.k, params.n - params.k)
    return math.ceil(params.n / (2.0 * k) * math.log(params.n / eps))


def remark_upper(params):
    """ceil((n/4k) ln n + (n/k) ln k), the small-k upper estimate."""
    k = min(params.k, params.n - params.k)
    return math.ceil(params.n / (4.0 * k) * math.log(params.n) + params.n / k * math.log(k))


def nw_lower_shape(params):
    """ln n / (2 ln(1/(1 - 2k/n))), the lower bound without its constant."""
    k = min(params.k, params.n - params.k)
    b = 1.0 - 2.0 * k / params.n
    if b <= 0:
        return 0.0
    return math.log(params.n) / (-2.0 * math.log(b))


def scan_entry(params, eps, policy="extremes"):
    if not params.ergodic:
        raise NonConvergenceError(f"chain with n={params.n} k={params.k} is not ergodic")
    t_mix = mixing_time(build_kernel(params), eps, policy)
    k = min(params.k, params.n - params.k)
    norm = ChainParams(params.n, k)
    upper = nw_upper(params, eps)
    return CutoffScanRecord(
        n=params.n,
        k=params.k,
        eps=eps,
        t_mix=t_mix,
        t_star=burn_in(norm),
        ratio=t_mix * 4.0 * k / (params.n * math.log(params.n)),
        nw_upper=upper,
        nw_ok=t_mix <= upper,
        remark_upper=remark_upper(params),
        nw_lower_shape=nw_lower_shape(params),
    )


def window_diagnostic(ladder, eps, policy="extremes", jobs=1):
    """One CutoffScanRecord per ladder entry, evaluated in parallel, kept in ladder order."""
    return fan_out(partial(scan_entry, eps=eps, policy=policy), list(ladder), jobs)
