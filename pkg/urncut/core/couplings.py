"""Coupled urn chains and the stopping times built on them.

Three couplings live here. The monotone coupling labels red balls as a prefix
in both urns and reuses the same left and right subsets, so the gap between
the chains never grows. The decomposed chain splits one macro step into 2k
ball moves (k draws from the left urn into storage, then k draws from the
right urn into the left urn) and runs two copies independently until they
match. The four-phase plan glues independent burn-in, a decomposed-style
approach, monotone contraction and an exact last step together.
"""

import math
from dataclasses import dataclass, field
from functools import partial
from typing import NamedTuple, Optional

import numpy as np

from urncut.core.combinatorics import DiscretePMF, hypergeometric_sample, tv
from urncut.core.kernel import ChainParams, Stepper, direct_row, stationary_sample
from urncut.core.sources import concat, run_replicas
from urncut.core.spectral import burn_in
from urncut.logging_utils import get_logger

logger = get_logger("urncut.couplings")

COUPLE_MODES = ("monotone", "independent", "decomposed")
TRUNCATIONS = ("none", "quarter-band")
FOUR_PHASE_HEADER = ["seed", "replica", "tau1", "tau2", "tau3", "tau4", "censored_phase", "final_gap", "last_step_tv"]
COUPLE_HEADER = ["seed", "replica", "t", "gap"]


class MonotonicityError(RuntimeError):
    """A monotone coupling step widened the gap between the chains."""


@dataclass(frozen=True)
class CoupledPair:
    x: int
    y: int

    @property
    def gap(self):
        return abs(self.x - self.y)


# ---------------------------------------------------------------------------
# monotone coupling
# ---------------------------------------------------------------------------


def _monotone_draws(n, k, x, y, source):
    a, b = np.minimum(x, y), np.maximum(x, y)
    g = b - a
    a1 = hypergeometric_sample(n, a, k, source)
    a2 = hypergeometric_sample(n - a, g, k - a1, source)
    b1 = hypergeometric_sample(n, n - b, k, source)
    b2 = hypergeometric_sample(b, g, k - b1, source)
    hi = b - a1 - a2 + b1
    lo = a - a1 + b1 + b2
    upper = np.asarray(x) >= np.asarray(y)
    return np.where(upper, hi, lo), np.where(upper, lo, hi)


def monotone_step(pair, params, source):
    """One step of the labelled-ball coupling for a single pair."""
    params.check_state(pair.x, "x")
    params.check_state(pair.y, "y")
    x, y = _monotone_draws(params.n, params.k, pair.x, pair.y, source)
    return CoupledPair(int(x), int(y))


def monotone_step_many(params, xs, ys, source):
    """Monotone steps for arrays of pairs; draws A1, A2, B1, B2 in that order."""
    xs = np.asarray(xs, dtype=np.int64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.size == 0:
        return xs.copy(), ys.copy()
    x, y = _monotone_draws(params.n, params.k, xs, ys, source)
    return np.asarray(x, dtype=np.int64), np.asarray(y, dtype=np.int64)


def independent_step_many(stepper, xs, ys, source):
    """Independent steps; lanes that already met move together."""
    met = xs == ys
    nx = stepper.step(xs, source)
    ny = stepper.step(ys, source)
    return nx, np.where(met, nx, ny)


class ContractionEstimate(NamedTuple):
    mean: float
    stderr: float
    target: float
    replicas: int

    @property
    def covered(self):
        if self.stderr == 0.0:
            return abs(self.mean - self.target) <= 1e-12
        return abs(self.mean - self.target) <= 3.0 * self.stderr


def contraction_target(params):
    """E|gap'| from gap 1 under the monotone coupling: 1 - 2k(n-k)/n^2."""
    n, k = params.n, params.k
    return 1.0 - 2.0 * k * (n - k) / n**2


def _contraction_block(params, x, y, lanes, source):
    nx, ny = monotone_step_many(params, np.full(lanes, x), np.full(lanes, y), source)
    return np.abs(nx - ny)


def contraction_estimate(params, reps, seed, x=None, jobs=1):
    """Monte Carlo E|gap'| for one monotone step from the pair (x, x-1)."""
    if params.n < 1:
        raise ValueError("contraction needs n >= 1")
    x = max(1, math.ceil(params.n / 2)) if x is None else int(x)
    params.check_state(x, "x")
    params.check_state(x - 1, "x - 1")
    gaps = concat(run_replicas(partial(_contraction_block, params, x, x - 1), reps, seed, "contraction", jobs))
    stderr = float(gaps.std(ddof=1) / math.sqrt(reps)) if reps > 1 else math.inf
    estimate = ContractionEstimate(float(gaps.mean()), stderr, contraction_target(params), reps)
    logger.info("contraction n=%s k=%s mean=%.6f target=%.6f", params.n, params.k, estimate.mean, estimate.target)
    return estimate


def coupled_gaps(params, x0, y0, t_max, mode, lanes, source):
    """|X_t - Y_t| for t = 0..t_max, one row per lane.

    `mode` picks the coupling: monotone, independent macro chains that
    coalesce on meeting, or independent decomposed chains observed at
    macro times.
    """
    if mode not in COUPLE_MODES:
        raise ValueError(f"mode must be one of {', '.join(COUPLE_MODES)}, got {mode!r}")
    xs = np.full(lanes, x0, dtype=np.int64)
    ys = np.full(lanes, y0, dtype=np.int64)
    gaps = np.empty((lanes, t_max + 1), dtype=np.int64)
    gaps[:, 0] = np.abs(xs - ys)
    if mode == "decomposed":
        xl, yl = DecomposedLanes(params, xs), DecomposedLanes(params, ys)
        for t in range(1, t_max + 1):
            xl.macro_step(source)
            yl.macro_step(source)
            gaps[:, t] = np.abs(xl.xleft - yl.xleft)
        return gaps
    stepper = Stepper(params) if mode == "independent" else None
    for t in range(1, t_max + 1):
        if stepper is None:
            nx, ny = monotone_step_many(params, xs, ys, source)
            if np.any(np.abs(nx - ny) > np.abs(xs - ys)):
                raise MonotonicityError(f"gap grew at t={t} (n={params.n} k={params.k})")
            xs, ys = nx, ny
        else:
            xs, ys = independent_step_many(stepper, xs, ys, source)
        gaps[:, t] = np.abs(xs - ys)
    return gaps


def couple_sample(params, x0, y0, t_max, mode, reps, seed, jobs=1):
    """Gap trajectories for `reps` replicas, shape (reps, t_max + 1)."""
    params.check_state(x0, "x0")
    params.check_state(y0, "y0")
    worker = partial(coupled_gaps, params, x0, y0, t_max, mode)
    return concat(run_replicas(worker, reps, seed, f"couple-{mode}", jobs))


def monotone_run_many(params, x0, y0, t, lanes, source):
    """Both marginals after t monotone steps from (x0, y0), as an array of shape (2, lanes)."""
    xs = np.full(lanes, x0, dtype=np.int64)
    ys = np.full(lanes, y0, dtype=np.int64)
    for _ in range(t):
        xs, ys = monotone_step_many(params, xs, ys, source)
    return np.stack((xs, ys))


class SurvivalCurve(NamedTuple):
    times: np.ndarray
    survival: np.ndarray
    stderr: np.ndarray
    bound: np.ndarray
    replicas: int


def survival_bound(params, gap0, r, t):
    """rho^t |x0 - y0| / r with rho the one-step contraction."""
    rho = contraction_target(params)
    return np.power(rho, np.asarray(t, dtype=float)) * gap0 / r


def _survival_block(params, x0, y0, r, t_max, lanes, source):
    gaps = coupled_gaps(params, x0, y0, t_max, "monotone", lanes, source)
    return (gaps >= r).sum(axis=0)[None, :]


def tau_couple_survival(params, pair0, r, t_max, reps, seed, jobs=1):
    """P(tau_couple > t) for t = 0..t_max, tau_couple the first t with gap < r."""
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    params.check_state(pair0.x, "x0")
    params.check_state(pair0.y, "y0")
    worker = partial(_survival_block, params, pair0.x, pair0.y, r, t_max)
    alive = concat(run_replicas(worker, reps, seed, "couple-survival", jobs)).sum(axis=0)
    survival = alive / reps
    times = np.arange(t_max + 1)
    return SurvivalCurve(
        times=times,
        survival=survival,
        stderr=np.sqrt(survival * (1.0 - survival) / reps),
        bound=survival_bound(params, pair0.gap, r, times),
        replicas=reps,
    )


def _violation_block(params, x0, y0, t_max, lanes, source):
    xs = np.full(lanes, x0, dtype=np.int64)
    ys = np.full(lanes, y0, dtype=np.int64)
    bad = 0
    for _ in range(t_max):
        nx, ny = monotone_step_many(params, xs, ys, source)
        bad += int(np.count_nonzero(np.abs(nx - ny) > np.abs(xs - ys)))
        xs, ys = nx, ny
    return np.array([bad])


def monotone_violations(params, x0, y0, t_max, reps, seed, jobs=1):
    """Count of coupled steps whose gap grew, over reps * t_max steps."""
    worker = partial(_violation_block, params, x0, y0, t_max)
    return int(concat(run_replicas(worker, reps, seed, "monotone-violations", jobs)).sum())


# ---------------------------------------------------------------------------
# decomposed chain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecomposedState:
    """Micro-time s, phase r = s mod 2k and the red counts of the three containers."""

    s: int
    r: int
    xleft: int
    xright: int
    storage_red: int

    @classmethod
    def initial(cls, params, x0):
        params.check_state(x0, "x0")
        return cls(0, 0, int(x0), params.n - int(x0), 0)

    def check(self, params):
        if self.xleft + self.xright + self.storage_red != params.n:
            raise RuntimeError(f"red balls not conserved at s={self.s}: {self}")
        if min(self.xleft, self.xright, self.storage_red) < 0:
            raise RuntimeError(f"negative container count at s={self.s}: {self}")


def _red_probability(params, r, xleft, xright):
    n, k = params.n, params.k
    if r < k:
        return xleft / (n - r)
    return xright / (n - r + k)


def _advance_state(params, state, red):
    n, k = params.n, params.k
    xleft, xright, storage = state.xleft, state.xright, state.storage_red
    if state.r < k:
        if red:
            xleft, storage = xleft - 1, storage + 1
    elif red:
        xleft, xright = xleft + 1, xright - 1
    r = state.r + 1
    if r == 2 * k:
        xright, storage, r = xright + storage, 0, 0
    nxt = DecomposedState(state.s + 1, r, xleft, xright, storage)
    nxt.check(params)
    return nxt


def decomposed_transitions(state, params):
    """[(probability, next state)] for one micro-step, zero-probability moves dropped."""
    if params.k == 0:
        return [(1.0, state)]
    p = _red_probability(params, state.r, state.xleft, state.xright)
    moves = [(p, _advance_state(params, state, True)), (1.0 - p, _advance_state(params, state, False))]
    return [(q, nxt) for q, nxt in moves if q > 0.0]


def decomposed_step(state, params, source):
    if params.k == 0:
        return state
    p = _red_probability(params, state.r, state.xleft, state.xright)
    return _advance_state(params, state, source.random() < p)


def decomposed_run(params, x0, t_macro, source):
    """Run 2k * t_macro micro-steps from x0; the result sits at phase 0."""
    state = DecomposedState.initial(params, x0)
    for _ in range(2 * params.k * t_macro):
        state = decomposed_step(state, params, source)
    return state


class DecomposedLanes:
    """Many decomposed chains sharing one micro-time."""

    def __init__(self, params, x0s):
        self.params = params
        self.s = 0
        self.r = 0
        self.xleft = np.array(x0s, dtype=np.int64)
        self.xright = params.n - self.xleft
        self.storage = np.zeros_like(self.xleft)

    def red_probability(self):
        return _red_probability(self.params, self.r, self.xleft, self.xright)

    def step(self, source):
        n, k = self.params.n, self.params.k
        if k == 0:
            return
        red = source.random(self.xleft.shape) < self.red_probability()
        if self.r < k:
            self.xleft = self.xleft - red
            self.storage = self.storage + red
        else:
            self.xleft = self.xleft + red
            self.xright = self.xright - red
        self.s += 1
        self.r += 1
        if self.r == 2 * k:
            self.xright = self.xright + self.storage
            self.storage = np.zeros_like(self.storage)
            self.r = 0
        if np.any(self.xleft + self.xright + self.storage != n):
            raise RuntimeError(f"red balls not conserved at s={self.s}")

    def macro_step(self, source):
        for _ in range(2 * self.params.k):
            self.step(source)


def decomposed_run_many(params, x0, t_macro, lanes, source):
    chains = DecomposedLanes(params, np.full(lanes, x0))
    for _ in range(t_macro):
        chains.macro_step(source)
    return chains.xleft


def decomposed_law(params, x0, t_macro, reps, seed, jobs=1):
    """Empirical law of X_left at macro time t_macro."""
    params.check_state(x0, "x0")
    worker = partial(decomposed_run_many, params, x0, t_macro)
    return DiscretePMF.from_samples(concat(run_replicas(worker, reps, seed, "decomposed-law", jobs)))


class DriftVariance(NamedTuple):
    drift: float
    variance: float


def drift_variance(params, r, xleft, yleft, xright, yright):
    """Conditional drift and variance of the increment of Z = xleft - yleft."""
    n, k = params.n, params.k
    if r < k:
        size = n - r
        drift = -(xleft - yleft) / size
        px, py = xleft / size, yleft / size
    else:
        size = n - r + k
        drift = (xright - yright) / size
        px, py = xright / size, yright / size
    return DriftVariance(drift, px * (1.0 - px) + py * (1.0 - py))


def drift_variance_check(xstate, ystate, params):
    """Closed-form drift and variance for a pair of decomposed states at the same time."""
    if (xstate.s, xstate.r) != (ystate.s, ystate.r):
        raise ValueError(f"states must share micro-time: ({xstate.s}, {xstate.r}) vs ({ystate.s}, {ystate.r})")
    if params.k == 0:
        return DriftVariance(0.0, 0.0)
    return drift_variance(params, xstate.r, xstate.xleft, ystate.xleft, xstate.xright, ystate.xright)


def enumerated_drift(xstate, ystate, params):
    """Drift and variance of the Z increment, summed over both chains' one-step transitions."""
    z = xstate.xleft - ystate.xleft
    moves = [(p * q, (xn.xleft - yn.xleft) - z)
             for p, xn in decomposed_transitions(xstate, params)
             for q, yn in decomposed_transitions(ystate, params)]
    drift = math.fsum(w * dz for w, dz in moves)
    return DriftVariance(drift, math.fsum(w * (dz - drift) ** 2 for w, dz in moves))


# ---------------------------------------------------------------------------
# matching time and the events around it
# ---------------------------------------------------------------------------


class StoppingTime(NamedTuple):
    value: int
    censored: bool
    reason: str
    swapped: bool = False


def _outside_quarter_band(n, left):
    return (left < n / 4.0) | (left > 3.0 * n / 4.0)


def tau_match_run(params, x0, y0, s_max, source, truncation="none"):
    """First micro-time at which two independent decomposed chains match.

    The chains match when their left counts or their available right counts
    agree. With `truncation="quarter-band"` the time is also stopped at the
    first macro time where either chain leaves [n/4, 3n/4].
    """
    if truncation not in TRUNCATIONS:
        raise ValueError(f"truncation must be one of {', '.join(TRUNCATIONS)}, got {truncation!r}")
    swapped = x0 < y0
    if swapped:
        x0, y0 = y0, x0
    if x0 == y0:
        return StoppingTime(0, False, "match", swapped)
    xs, ys = DecomposedState.initial(params, x0), DecomposedState.initial(params, y0)
    banded = truncation == "quarter-band"
    if banded and (_outside_quarter_band(params.n, x0) or _outside_quarter_band(params.n, y0)):
        return StoppingTime(0, False, "exit", swapped)
    for s in range(1, s_max + 1):
        xs = decomposed_step(xs, params, source)
        ys = decomposed_step(ys, params, source)
        if xs.xleft == ys.xleft or xs.xright == ys.xright:
            return StoppingTime(s, False, "match", swapped)
        if banded and xs.r == 0 and (
            _outside_quarter_band(params.n, xs.xleft) or _outside_quarter_band(params.n, ys.xleft)
        ):
            return StoppingTime(s, False, "exit", swapped)
    return StoppingTime(s_max, True, "censored", swapped)


class TauMatchSample(NamedTuple):
    values: np.ndarray
    censored: np.ndarray
    exited: np.ndarray
    sigma2: float
    drift_residual: float
    drift_stderr: float


def _tau_match_block(params, x0, y0, s_max, truncation, lanes, source):
    n = params.n
    xl = DecomposedLanes(params, np.full(lanes, x0))
    yl = DecomposedLanes(params, np.full(lanes, y0))
    values = np.full(lanes, s_max, dtype=np.int64)
    active = np.full(lanes, x0 != y0)
    exited = np.zeros(lanes, dtype=bool)
    values[~active] = 0
    banded = truncation == "quarter-band"
    if banded and active.any() and (_outside_quarter_band(n, x0) or _outside_quarter_band(n, y0)):
        exited[:] = True
        values[:] = 0
        active[:] = False
    sigma2 = math.inf
    resid = np.zeros(3)
    for s in range(1, s_max + 1):
        if not active.any():
            break
        dv = drift_variance(params, xl.r, xl.xleft, yl.xleft, xl.xright, yl.xright)
        sigma2 = min(sigma2, float(np.min(dv.variance[active])))
        z = xl.xleft - yl.xleft
        xl.step(source)
        yl.step(source)
        dz = (xl.xleft - yl.xleft) - z - dv.drift
        resid += (dz[active].sum(), (dz[active] ** 2).sum(), active.sum())
        hit = active & ((xl.xleft == yl.xleft) | (xl.xright == yl.xright))
        values[hit] = s
        active &= ~hit
        if banded and xl.r == 0:
            out = active & (_outside_quarter_band(n, xl.xleft) | _outside_quarter_band(n, yl.xleft))
            values[out] = s
            exited |= out
            active &= ~out
    return values, active.copy(), exited, np.array([sigma2]), resid[None, :]


def tau_match_sample(params, x0, y0, s_max, reps, seed, truncation="none", jobs=1):
    """Matching times for `reps` replicas plus the observed variance floor and drift residual."""
    if truncation not in TRUNCATIONS:
        raise ValueError(f"truncation must be one of {', '.join(TRUNCATIONS)}, got {truncation!r}")
    params.check_state(x0, "x0")
    params.check_state(y0, "y0")
    if x0 < y0:
        x0, y0 = y0, x0
    worker = partial(_tau_match_block, params, x0, y0, s_max, truncation)
    values, censored, exited, sigma2, resid = concat(run_replicas(worker, reps, seed, "tau-match", jobs))
    total, squares, count = resid.sum(axis=0)
    mean = total / count if count else 0.0
    spread = math.sqrt(max(squares / count - mean**2, 0.0) / count) if count > 1 else math.inf
    return TauMatchSample(values, censored, exited, float(sigma2.min()), float(mean), spread)


@dataclass(frozen=True, eq=False)
class DecomposedPath:
    """Left counts and available right counts at every micro-time 0..s_max."""

    params: ChainParams
    left: np.ndarray
    right: np.ndarray

    @property
    def length(self):
        return len(self.left) - 1


def decomposed_path(params, x0, s_max, source):
    chains = DecomposedLanes(params, [x0])
    left = np.empty(s_max + 1, dtype=np.int64)
    right = np.empty(s_max + 1, dtype=np.int64)
    left[0], right[0] = chains.xleft[0], chains.xright[0]
    for s in range(1, s_max + 1):
        chains.step(source)
        left[s], right[s] = chains.xleft[0], chains.xright[0]
    return DecomposedPath(params, left, right)


def tau_match_from_paths(xpath, ypath):
    """First micro-time where the two paths match, or None."""
    hits = np.flatnonzero((xpath.left == ypath.left) | (xpath.right == ypath.right))
    return int(hits[0]) if hits.size else None


@dataclass(frozen=True)
class EventFlags:
    E: bool
    F: bool
    G: bool
    H: bool

    @property
    def all(self):
        return self.E and self.F and self.G and self.H


def event_horizon(params, gamma1):
    """Micro-time length a path needs for `event_flags`: 2k (floor(gamma1 n / 2k) + 1)."""
    n, k = params.n, params.k
    return 2 * k * (math.floor(gamma1 * n / (2 * k)) + 1)


def _window_events(left, right, params, kappa2):
    """E, F and G for macro-step windows of 2k + 1 micro-times along the last axis.

    Stored balls rejoin the right urn at the last micro-time of a window, so
    the right counts are only compared at late offsets 1..k-1.
    """
    n, k = params.n, params.k
    thr = kappa2 * math.sqrt(k * math.log(n))
    offsets = np.arange(1, k + 1)
    base_left, base_right = left[..., :1], right[..., :1]
    e = np.abs(left[..., 0] - n / 2.0) <= kappa2 * math.sqrt(n)
    early = np.abs(base_left - left[..., 1 : k + 1] - offsets / 2.0)
    late_left = np.abs(base_left - left[..., k + 1 :] - (k - offsets) / 2.0)
    late_right = np.abs(base_right - right[..., k + 1 : 2 * k] - offsets[:-1] / 2.0)
    f = np.all(early <= thr, axis=-1) & np.all(late_right <= thr, axis=-1)
    g = np.all(late_left <= thr, axis=-1)
    return e, f, g


def _path_events(path, params, kappa2, macro):
    windows = 2 * params.k * np.arange(macro + 1)[:, None] + np.arange(2 * params.k + 1)[None, :]
    e, f, g = _window_events(path.left[windows], path.right[windows], params, kappa2)
    return bool(e.all()), bool(f.all()), bool(g.all())


def event_flags(xpath, ypath, tau, params, kappa2, gamma1):
    """Fluctuation events over macro times 0..floor(gamma1 n / 2k) for both chains.

    E keeps both macro chains within kappa2 sqrt(n) of n/2. F and G bound
    the deviation of the left and right counts from their half-draw means
    inside each macro step by kappa2 sqrt(k ln n). H asks that the chains
    matched by micro-time gamma1 n.
    """
    macro = math.floor(gamma1 * params.n / (2 * params.k))
    need = 2 * params.k * (macro + 1)
    if min(xpath.length, ypath.length) < need:
        raise ValueError(f"paths must cover {need} micro-steps, got {min(xpath.length, ypath.length)}")
    ex, fx, gx = _path_events(xpath, params, kappa2, macro)
    ey, fy, gy = _path_events(ypath, params, kappa2, macro)
    h = tau is not None and tau <= gamma1 * params.n
    return EventFlags(ex and ey, fx and fy, gx and gy, h)


def matched_gap(xpath, ypath, tau, params):
    """|X - Y| at the macro time floor(tau / 2k) just before the match."""
    at = 2 * params.k * (tau // (2 * params.k))
    return abs(int(xpath.left[at]) - int(ypath.left[at]))


def matched_gap_bound(params, kappa2):
    return 2.0 * kappa2 * math.sqrt(params.k * math.log(params.n))


class EventSample(NamedTuple):
    """Per-replica E, F, G, H columns with the matching time (-1 if unmatched) and matched gap."""

    flags: np.ndarray
    tau: np.ndarray
    gaps: np.ndarray

    @property
    def held(self):
        return self.flags.all(axis=1)

    def violations(self, bound):
        """Replicas where every event held yet the matched gap exceeds `bound`."""
        return int(np.count_nonzero(self.held & (self.gaps > bound)))


def _event_block(params, x0, y0, kappa2, gamma1, lanes, source):
    n, k = params.n, params.k
    width = 2 * k + 1
    xl = DecomposedLanes(params, np.full(lanes, x0))
    yl = DecomposedLanes(params, np.full(lanes, y0))
    e = np.ones(lanes, dtype=bool)
    f, g = e.copy(), e.copy()
    tau = np.full(lanes, 0 if x0 == y0 else -1, dtype=np.int64)
    gaps = np.zeros(lanes, dtype=np.int64)
    for m in range(math.floor(gamma1 * n / (2 * k)) + 1):
        windows = np.empty((4, lanes, width), dtype=np.int64)
        windows[:, :, 0] = xl.xleft, xl.xright, yl.xleft, yl.xright
        base_gap = np.abs(xl.xleft - yl.xleft)
        for i in range(1, width):
            xl.step(source)
            yl.step(source)
            windows[:, :, i] = xl.xleft, xl.xright, yl.xleft, yl.xright
            hit = (tau < 0) & ((xl.xleft == yl.xleft) | (xl.xright == yl.xright))
            tau[hit] = 2 * k * m + i
            gaps[hit] = (base_gap if i < 2 * k else np.abs(xl.xleft - yl.xleft))[hit]
        for left, right in ((windows[0], windows[1]), (windows[2], windows[3])):
            we, wf, wg = _window_events(left, right, params, kappa2)
            e &= we
            f &= wf
            g &= wg
    h = (tau >= 0) & (tau <= gamma1 * n)
    return np.stack((e, f, g, h), axis=1), tau, gaps


def event_sample(params, x0, y0, kappa2, gamma1, reps, seed, jobs=1):
    """Streamed `event_flags` and `matched_gap` for `reps` independent decomposed pairs.

    Only one macro-step window per lane is held at a time, so replicas do
    not keep full paths.
    """
    params.check_state(x0, "x0")
    params.check_state(y0, "y0")
    if params.k < 1:
        raise ValueError(f"k must be at least 1, got {params.k}")
    if reps < 1:
        raise ValueError(f"reps must be positive, got {reps}")
    if kappa2 <= 0 or gamma1 <= 0:
        raise ValueError(f"kappa2 and gamma1 must be positive, got {kappa2} and {gamma1}")
    worker = partial(_event_block, params, x0, y0, kappa2, gamma1)
    flags, tau, gaps = concat(run_replicas(worker, reps, seed, "events", jobs))
    logger.info("event_sample n=%s k=%s reps=%s held=%s", params.n, params.k, reps, int(flags.all(axis=1).sum()))
    return EventSample(flags, tau, gaps)


class HittingSample(NamedTuple):
    values: np.ndarray
    censored: np.ndarray
    exited: np.ndarray
    gaps: np.ndarray


def _hitting_block(params, x0, y0, u_max, lanes, source):
    n, k = params.n, params.k
    stepper = Stepper(params)
    xs = np.full(lanes, x0, dtype=np.int64)
    ys = np.full(lanes, y0, dtype=np.int64)
    values = np.full(lanes, u_max, dtype=np.int64)
    gaps = xs - ys
    active = np.ones(lanes, dtype=bool)
    exited = np.zeros(lanes, dtype=bool)
    for u in range(u_max + 1):
        hit = active & (xs - ys < 4 * k)
        values[hit], gaps[hit] = u, (xs - ys)[hit]
        active &= ~hit
        out = active & (_outside_quarter_band(n, xs) | _outside_quarter_band(n, ys))
        values[out], exited[out] = u, True
        active &= ~out
        if u == u_max or not active.any():
            break
        xs, ys = stepper.step(xs, source), stepper.step(ys, source)
    gaps[active] = (xs - ys)[active]
    return values, active.copy(), exited, gaps


def remark_gap_hitting(params, x0, y0, u_max, reps, seed, jobs=1):
    """First macro time the gap X - Y of two independent chains drops below 4k.

    Replicas leaving the quarter band [n/4, 3n/4] are stopped and flagged as
    exited; replicas still running at `u_max` are censored.
    """
    params.check_state(x0, "x0")
    params.check_state(y0, "y0")
    if x0 < y0:
        x0, y0 = y0, x0
    worker = partial(_hitting_block, params, x0, y0, u_max)
    return HittingSample(*concat(run_replicas(worker, reps, seed, "gap-hitting", jobs)))


def hitting_bound(params, z0, sigma, u):
    """4 z0 / (sigma sqrt(u)), meaningful for u > 12 / sigma^2."""
    return 4.0 * z0 / (sigma * math.sqrt(u))


# ---------------------------------------------------------------------------
# four-phase plan
# ---------------------------------------------------------------------------

PHASES = ("A", "B", "C")


@dataclass(frozen=True)
class KappaSchedule:
    gamma1: float
    kappa1: float
    kappa2: float
    kappa3: float
    kappa4: float

    @classmethod
    def from_gamma(cls, gamma1, scale=(1.0, 1.0, 1.0, 1.0)):
        if gamma1 <= 0:
            raise ValueError(f"gamma1 must be positive, got {gamma1}")
        c1, c2, c3, c4 = scale
        k1 = c1 * gamma1**0.25
        k2 = c2 * k1**2 * math.exp(3.0 * gamma1)
        k3 = c3 * k2 * math.exp(gamma1)
        return cls(gamma1, k1, k2, k3, c4 * gamma1)


@dataclass(frozen=True)
class FourPhaseRecord:
    tau1: Optional[int]
    tau2: Optional[int]
    tau3: Optional[int]
    tau4: Optional[int]
    censored_phase: Optional[str]
    final_gap: int
    last_step_tv: Optional[float]
    x0: int
    y0: int
    swapped: bool
    kappa: KappaSchedule = field(repr=False, compare=False, default=None)

    def row(self, seed, replica):
        return [seed, replica, self.tau1, self.tau2, self.tau3, self.tau4,
                self.censored_phase, self.final_gap, self.last_step_tv]


def last_step_tv(params, x0, y0):
    """TV between the exact one-step laws from x0 and y0."""
    if x0 == y0:
        return 0.0
    return tv(direct_row(params, x0), direct_row(params, y0))


def _ln_ln(n):
    return max(math.log(math.log(n)), 1.0) if n > math.e else 1.0


def _four_phase_lanes(params, xs, ys, gamma1, kappa, source):
    """Run the four-phase plan on lanes; returns (tau[4, m], censored code, X, Y).

    Censored code 0 means finished, 1..3 name the phase that ran out.
    """
    n, k = params.n, params.k
    lnn, lnln = math.log(n), _ln_ln(n)
    t_a = burn_in(params)
    budget_ab = math.ceil(gamma1 * n / k)
    budget_c = math.ceil(3.0 * n / k * lnln)
    band1 = kappa.kappa1 * math.sqrt(n)
    band2 = kappa.kappa2 * math.sqrt(n)
    band3 = kappa.kappa3 * math.sqrt(n) * lnn**2
    band4 = kappa.kappa4 * math.sqrt(n)
    close2 = 2.0 * kappa.kappa2 * math.sqrt(k * lnn)
    close34 = math.sqrt(k) / lnln

    m = len(xs)
    stepper = Stepper(params)
    X, Y = xs.astype(np.int64), ys.astype(np.int64)
    phase = np.zeros(m, dtype=np.int64)
    tau = np.full((4, m), -1, dtype=np.int64)
    deadline = np.full(m, t_a + budget_ab, dtype=np.int64)
    censored = np.zeros(m, dtype=np.int64)

    def in_band(width):
        return (np.abs(X - n / 2.0) <= width) & (np.abs(Y - n / 2.0) <= width)

    def finish_ties(hit, first):
        tie = hit & (X == Y)
        tau[first:, tie] = t
        phase[tie] = 3

    t = 0
    while np.any(phase < 3):
        gap = np.abs(X - Y)

        hit = (phase == 0) & (t >= t_a) & in_band(band1)
        tau[0, hit], phase[hit], deadline[hit] = t, 1, t + budget_ab
        finish_ties(hit, 1)
        out = (phase == 0) & (t >= deadline)
        censored[out], phase[out] = 1, 3

        hit = (phase == 1) & (gap <= close2) & in_band(band2)
        tau[1, hit], phase[hit], deadline[hit] = t, 2, t + budget_c
        finish_ties(hit, 2)
        out = (phase == 1) & (t >= deadline)
        censored[out], phase[out] = 2, 3

        close = (phase == 2) & (gap <= close34)
        hit = close & (tau[2] < 0) & in_band(band3)
        tau[2, hit] = t
        hit = close & (tau[2] >= 0) & in_band(band4)
        tau[3, hit], phase[hit] = t, 3
        out = (phase == 2) & (t >= deadline)
        censored[out], phase[out] = 3, 3

        free = phase < 2
        if free.any():
            X[free], Y[free] = independent_step_many(stepper, X[free], Y[free], source)
        tied = phase == 2
        if tied.any():
            nx, ny = monotone_step_many(params, X[tied], Y[tied], source)
            if np.any(np.abs(nx - ny) > gap[tied]):
                raise MonotonicityError(f"gap grew in phase C at t={t} (n={n} k={k})")
            X[tied], Y[tied] = nx, ny
        t += 1
    return tau, censored, X, Y


def _records(params, x0, y0s, tau, censored, X, Y, kappa):
    cache = {}
    records = []
    for i, y0 in enumerate(y0s):
        code = int(censored[i])
        x, y = int(X[i]), int(Y[i])
        tv_value = None
        if code == 0:
            key = (min(x, y), max(x, y))
            if key not in cache:
                cache[key] = last_step_tv(params, *key)
            tv_value = cache[key]
        times = [int(v) if v >= 0 else None for v in tau[:, i]]
        records.append(FourPhaseRecord(
            *times,
            censored_phase=PHASES[code - 1] if code else None,
            final_gap=abs(x - y),
            last_step_tv=tv_value,
            x0=int(x0),
            y0=int(y0),
            swapped=bool(x0 < y0),
            kappa=kappa,
        ))
    return records


def _check_four_phase(params, x0, gamma1):
    if not 0 < params.k <= params.n / 2:
        raise ValueError(f"four-phase plan needs 0 < k <= n/2, got n={params.n} k={params.k}")
    if params.n < 3:
        raise ValueError(f"four-phase plan needs n >= 3, got {params.n}")
    if gamma1 <= 0:
        raise ValueError(f"gamma1 must be positive, got {gamma1}")
    params.check_state(x0, "x0")


def four_phase_run(params, x0, gamma1, source, kappa=None, y0=None):
    """One run of the four-phase plan; Y0 is drawn from pi_n unless given."""
    _check_four_phase(params, x0, gamma1)
    kappa = kappa or KappaSchedule.from_gamma(gamma1)
    if y0 is None:
        y0 = stationary_sample(params.n, source)
    params.check_state(y0, "y0")
    hi, lo = max(x0, y0), min(x0, y0)
    tau, censored, X, Y = _four_phase_lanes(params, np.array([hi]), np.array([lo]), gamma1, kappa, source)
    return _records(params, x0, [y0], tau, censored, X, Y, kappa)[0]


def _four_phase_block(params, x0, gamma1, kappa, y0, lanes, source):
    if y0 is None:
        y0s = stationary_sample(params.n, source, size=lanes)
    else:
        y0s = np.full(lanes, y0, dtype=np.int64)
    hi = np.maximum(x0, y0s)
    lo = np.minimum(x0, y0s)
    tau, censored, X, Y = _four_phase_lanes(params, hi, lo, gamma1, kappa, source)
    return _records(params, x0, y0s, tau, censored, X, Y, kappa)


def four_phase_sample(params, x0, gamma1, reps, seed, kappa=None, jobs=1, y0=None):
    """`reps` four-phase runs in replica order; Y0 is drawn from pi_n unless fixed."""
    _check_four_phase(params, x0, gamma1)
    if y0 is not None:
        params.check_state(y0, "y0")
    kappa = kappa or KappaSchedule.from_gamma(gamma1)
    worker = partial(_four_phase_block, params, x0, gamma1, kappa, y0)
    records = [r for block in run_replicas(worker, reps, seed, "four-phase", jobs) for r in block]
    done = sum(r.censored_phase is None for r in records)
    logger.info("four_phase n=%s k=%s reps=%s finished=%s", params.n, params.k, reps, done)
    return records
