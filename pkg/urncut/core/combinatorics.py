"""Binomial and hypergeometric primitives.

Probabilities are formed in log space from log-factorials and exponentiated
only after the row maximum is subtracted, so zero is encoded as -inf and
never as NaN. Samplers use the inverse CDF walked outward from the mode:
positions are visited as mode, mode+1, mode-1, mode+2, ... which keeps the
cumulative sums dominated by the large weights.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp, xlog1py, xlogy

LogWeight = float

NEG_INF = -math.inf


@dataclass(frozen=True, eq=False)
class DiscretePMF:
    """Probability weights on the integers offset, offset+1, ..."""

    offset: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty one-dimensional sequence")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        total = math.fsum(w)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "offset", int(self.offset))

    @property
    def stop(self):
        return self.offset + len(self.weights)

    @property
    def support(self):
        return np.arange(self.offset, self.stop)

    def prob(self, j):
        idx = int(j) - self.offset
        if 0 <= idx < len(self.weights):
            return float(self.weights[idx])
        return 0.0

    def mean(self):
        return math.fsum(self.support * self.weights)

    def variance(self):
        mu = self.mean()
        return math.fsum((self.support - mu) ** 2 * self.weights)

    def shift(self, g):
        return DiscretePMF(self.offset + int(g), self.weights)

    @classmethod
    def from_samples(cls, samples):
        values = np.asarray(samples, dtype=np.int64).ravel()
        if values.size == 0:
            raise ValueError("no samples")
        lo = int(values.min())
        counts = np.bincount(values - lo)
        return cls(lo, counts / counts.sum())


@lru_cache(maxsize=16)
def _log_factorial_table(size):
    table = gammaln(np.arange(size, dtype=float) + 1.0)
    table.setflags(write=False)
    return table


def log_factorials(m):
    """Read-only table whose entry i is ln(i!) for at least 0 <= i <= m."""
    return _log_factorial_table(1 << max(int(m), 1).bit_length())


def log_binomial(m, r) -> LogWeight:
    if m < 0:
        raise ValueError(f"log_binomial needs m >= 0, got {m}")
    if r < 0 or r > m:
        return NEG_INF
    return float(gammaln(m + 1) - gammaln(r + 1) - gammaln(m - r + 1))


def _check_hyper(N, K, r):
    if not (0 <= K <= N and 0 <= r <= N):
        raise ValueError(f"invalid hypergeometric parameters (N={N}, K={K}, r={r})")


def hypergeometric_support(N, K, r):
    return max(0, r - (N - K)), min(K, r)


def hypergeometric_mode(N, K, r):
    lo, hi = hypergeometric_support(N, K, r)
    return min(max(((r + 1) * (K + 1)) // (N + 2), lo), hi)


def _hyper_log_rows(N, K, r, lf):
    """Unnormalised log weights for arrays of (N, K, r), one row per entry.

    Row i covers j = lo_i + p for p = 0..width-1; positions past hi_i are
    masked to -inf.
    """
    lo = np.maximum(0, r - (N - K))
    hi = np.minimum(K, r)
    width = int((hi - lo).max()) + 1
    p = np.arange(width)
    j = lo[:, None] + p[None, :]
    valid = j <= hi[:, None]
    j = np.where(valid, j, lo[:, None])
    Kc, Rc, Mc = K[:, None], r[:, None], (N - K)[:, None]
    logw = (lf[Kc] - lf[j] - lf[Kc - j]) + (lf[Mc] - lf[Rc - j] - lf[Mc - Rc + j])
    logw = np.where(valid, logw, NEG_INF)
    return lo, hi, valid, logw


def _mode_keys(width, mode_pos):
    """Visiting rank of each position when walking outward from the mode."""
    p = np.arange(width)[None, :] if np.ndim(mode_pos) else np.arange(width)
    m = mode_pos[:, None] if np.ndim(mode_pos) else mode_pos
    return np.where(p > m, 2 * (p - m) - 1, 2 * (m - p))


def inverse_cdf_from_mode(pmf, mode, u):
    """Draw from `pmf` for uniforms `u`, visiting the support outward from `mode`."""
    order = np.argsort(_mode_keys(len(pmf.weights), mode - pmf.offset), kind="stable")
    cum = np.cumsum(pmf.weights[order])
    idx = np.searchsorted(cum, np.asarray(u) * cum[-1], side="right")
    idx = np.minimum(idx, len(order) - 1)
    return pmf.offset + order[idx]


def hypergeometric_law(N, K, r):
    _check_hyper(N, K, r)
    lf = log_factorials(N)
    lo, hi = hypergeometric_support(N, K, r)
    j = np.arange(lo, hi + 1)
    logw = (lf[K] - lf[j] - lf[K - j]) + (lf[N - K] - lf[r - j] - lf[N - K - r + j])
    w = np.exp(logw - logw.max())
    return DiscretePMF(lo, w / math.fsum(w))


def hypergeometric_pmf(N, K, r, j):
    return hypergeometric_law(N, K, r).prob(j)


def _sample_hyper_arrays(N, K, r, u):
    shape = N.shape
    N, K, r, u = (a.ravel() for a in (N, K, r, u))
    if np.any((K < 0) | (K > N) | (r < 0) | (r > N)):
        raise ValueError("invalid hypergeometric parameters in array draw")
    if N.size == 0:
        return np.empty(shape, dtype=np.int64)
    lf = log_factorials(int(N.max()))
    lo, hi, valid, logw = _hyper_log_rows(N, K, r, lf)
    w = np.exp(logw - logw.max(axis=1, keepdims=True))
    mode = np.clip(((r + 1) * (K + 1)) // (N + 2), lo, hi) - lo
    keys = np.where(valid, _mode_keys(w.shape[1], mode), np.iinfo(np.int64).max)
    order = np.argsort(keys, axis=1, kind="stable")
    cum = np.cumsum(np.take_along_axis(w, order, axis=1), axis=1)
    idx = (cum <= (u * cum[:, -1])[:, None]).sum(axis=1)
    idx = np.minimum(idx, hi - lo)
    out = lo + np.take_along_axis(order, idx[:, None], axis=1)[:, 0]
    return out.reshape(shape).astype(np.int64)


def hypergeometric_sample(N, K, r, source, size=None):
    """Draw from Hyper(N, K, r): successes among r draws without replacement.

    Scalar parameters return an int (or an array of `size` draws); array
    parameters broadcast and return one draw per entry. Uniforms are taken
    from `source` in a fixed order so the result is a pure function of the
    generator state.
    """
    if np.ndim(N) == 0 and np.ndim(K) == 0 and np.ndim(r) == 0:
        N, K, r = int(N), int(K), int(r)
        _check_hyper(N, K, r)
        law = hypergeometric_law(N, K, r)
        u = source.random() if size is None else source.random(size)
        out = inverse_cdf_from_mode(law, hypergeometric_mode(N, K, r), u)
        return int(out) if size is None else np.asarray(out, dtype=np.int64)
    N, K, r = (np.asarray(a, dtype=np.int64) for a in np.broadcast_arrays(N, K, r))
    return _sample_hyper_arrays(N, K, r, source.random(N.shape))


class HypergeometricTable:
    """Hyper(N, K, r) for every K = 0..N at fixed (N, r).

    `weights[K, j]` is P(H = j) for j = 0..r. The mode-ordered cumulative
    rows let `sample` draw for an array of K values with one uniform each.
    """

    def __init__(self, N, r):
        _check_hyper(N, 0, r)
        self.N, self.r = int(N), int(r)
        K = np.arange(self.N + 1)
        R = np.full_like(K, self.r)
        NN = np.full_like(K, self.N)
        lf = log_factorials(self.N)
        lo, hi, valid, logw = _hyper_log_rows(NN, K, R, lf)
        w = np.exp(logw - logw.max(axis=1, keepdims=True))
        w /= w.sum(axis=1, keepdims=True)

        weights = np.zeros((self.N + 1, self.r + 1))
        rows = np.repeat(K, w.shape[1]).reshape(w.shape)
        cols = lo[:, None] + np.arange(w.shape[1])[None, :]
        weights[rows[valid], cols[valid]] = w[valid]
        self.weights = weights

        mode = np.clip(((R + 1) * (K + 1)) // (NN + 2), lo, hi) - lo
        keys = np.where(valid, _mode_keys(w.shape[1], mode), np.iinfo(np.int64).max)
        order = np.argsort(keys, axis=1, kind="stable")
        cum = np.cumsum(np.take_along_axis(w, order, axis=1), axis=1)
        self._cum = cum / cum[:, -1:]
        self._values = lo[:, None] + order
        self._span = hi - lo

    def law(self, K):
        lo, hi = hypergeometric_support(self.N, K, self.r)
        return DiscretePMF(lo, self.weights[K, lo:hi + 1] / self.weights[K, lo:hi + 1].sum())

    def sample(self, K, u):
        K = np.asarray(K, dtype=np.int64)
        rows = self._cum[K]
        idx = (rows <= np.asarray(u)[..., None]).sum(axis=-1)
        idx = np.minimum(idx, self._span[K])
        return np.take_along_axis(self._values[K], idx[..., None], axis=-1)[..., 0]


def binomial_law(k, p):
    if k < 0 or not 0.0 <= p <= 1.0:
        raise ValueError(f"invalid binomial parameters (k={k}, p={p})")
    w = np.zeros(k + 1)
    if p == 0.0:
        w[0] = 1.0
    elif p == 1.0:
        w[k] = 1.0
    else:
        lf = log_factorials(k)
        j = np.arange(k + 1)
        logw = lf[k] - lf[j] - lf[k - j] + j * math.log(p) + (k - j) * math.log1p(-p)
        w = np.exp(logw - logw.max())
        w /= math.fsum(w)
    return DiscretePMF(0, w)


def binomial_pmf(k, p, j):
    return binomial_law(k, p).prob(j)


def binomial_sample(k, p, source, size=None):
    law = binomial_law(k, p)
    mode = min(int(math.floor((k + 1) * p)), k)
    u = source.random() if size is None else source.random(size)
    out = inverse_cdf_from_mode(law, mode, u)
    return int(out) if size is None else np.asarray(out, dtype=np.int64)


def tv(p, q):
    """Total variation distance; supports are aligned by integer index."""
    lo = min(p.offset, q.offset)
    hi = max(p.stop, q.stop)
    a = np.zeros(hi - lo)
    b = np.zeros(hi - lo)
    a[p.offset - lo:p.stop - lo] = p.weights
    b[q.offset - lo:q.stop - lo] = q.weights
    return min(max(0.5 * math.fsum(np.abs(a - b)), 0.0), 1.0)


class HyperBinomTV(NamedTuple):
    tv: float
    bound: float


def hyper_vs_binom_tv(N, K, r):
    """Exact TV(Hyper(N,K,r), Bin(r,K/N)) with the sampling bound 4r/N."""
    _check_hyper(N, K, r)
    if r == 0:
        return HyperBinomTV(0.0, 0.0)
    return HyperBinomTV(tv(hypergeometric_law(N, K, r), binomial_law(r, K / N)), 4.0 * r / N)


def hyper_vs_binom_row(N, r):
    """TV between Hyper(N,K,r) and Bin(r,K/N) for every K = 0..N at once."""
    _check_hyper(N, 0, r)
    lf = log_factorials(N)
    K = np.arange(N + 1)[:, None]
    j = np.arange(r + 1)[None, :]
    valid = (j <= K) & (j >= r - (N - K))
    js = np.where(valid, j, 0)
    Ks = np.where(valid, K, 0)
    log_hyper = (lf[Ks] - lf[js] - lf[Ks - js] + lf[N - Ks] - lf[r - js] - lf[N - Ks - r + js]
                 - (lf[N] - lf[r] - lf[N - r]))
    hyper = np.where(valid, np.exp(log_hyper), 0.0)
    p = K / N
    with np.errstate(divide="ignore"):
        log_binom = lf[r] - lf[j] - lf[r - j] + xlogy(j, p) + xlog1py(r - j, -p)
    binom = np.exp(log_binom)
    return 0.5 * np.abs(hyper - binom).sum(axis=1)


class ShiftedTV(NamedTuple):
    tv: float
    crossing: int


@lru_cache(maxsize=4)
def _symmetric_half_binomial(k):
    w = binomial_law(k, 0.5).weights
    # exact mirror symmetry keeps the tie at x* exactly zero
    w = 0.5 * (w + w[::-1])
    w.setflags(write=False)
    return w


def shifted_binom_terms(k, g):
    """(direct TV, crossing-point mass, x*) for Bin(k,1/2) against g + Bin(k,1/2).

    For g > 0 the unshifted law dominates on x <= x*. For g < 0 the picture
    is mirrored about k/2: the distance equals the one for |g| and x* is the
    first point of the region x >= x* where the unshifted law dominates.
    For g = 0 the first law dominates everywhere, x* = k.
    """
    if k < 1:
        raise ValueError(f"shifted_binom_tv needs k >= 1, got {k}")
    h = abs(int(g))
    if h == 0:
        return 0.0, 0.0, k
    w = _symmetric_half_binomial(k)
    crossing = (k + h) // 2 if h <= k else k
    pad = np.zeros(h)
    direct = 0.5 * math.fsum(np.abs(np.concatenate((w, pad)) - np.concatenate((pad, w))))
    mass = math.fsum(w[max(crossing - h + 1, 0):crossing + 1])
    return direct, mass, crossing if g > 0 else k - crossing


def shifted_binom_tv(k, g):
    direct, mass, crossing = shifted_binom_terms(k, g)
    if abs(direct - mass) > 1e-12:
        raise ArithmeticError(f"crossing formula disagrees at k={k}, g={g}: {direct!r} vs {mass!r}")
    return ShiftedTV(min(direct, 1.0), crossing)


def log_exp_moment_hypergeom(N, K, r, h):
    """ln E exp(h (H - EH)) for H ~ Hyper(N, K, r), accumulated in log space."""
    _check_hyper(N, K, r)
    if h == 0:
        return 0.0
    lf = log_factorials(N)
    lo, hi = hypergeometric_support(N, K, r)
    j = np.arange(lo, hi + 1)
    logw = (lf[K] - lf[j] - lf[K - j]) + (lf[N - K] - lf[r - j] - lf[N - K - r + j])
    logw = logw - logsumexp(logw)
    mean = math.fsum(np.exp(logw) * j)
    return float(logsumexp(logw + h * (j - mean)))


def exp_moment_hypergeom(N, K, r, h):
    return math.exp(log_exp_moment_hypergeom(N, K, r, h))
