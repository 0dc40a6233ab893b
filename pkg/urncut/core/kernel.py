"""The Bernoulli-Laplace transition kernel on {0, ..., n}.

State x is the number of red balls in the left urn. One step swaps a uniform
k-subset of the left urn with a uniform k-subset of the right urn, so

    X' = x + H1 - H2,   H1 ~ Hyper(n, n - x, k),   H2 ~ Hyper(n, x, k)

with H1, H2 independent. Row x is therefore the law of H1 - H2 shifted by
x, which is zero outside |x' - x| <= k; only that band is stored.
"""

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from urncut.core.combinatorics import (
    DiscretePMF,
    HypergeometricTable,
    hypergeometric_law,
    hypergeometric_sample,
    inverse_cdf_from_mode,
    log_binomial,
)
from urncut.logging_utils import get_logger
from urncut.utils import format_float

logger = get_logger("urncut.kernel")

ROW_TOLERANCE = 1e-9
BALANCE_TOLERANCE = 1e-9
RENORMALIZE_EVERY = 64
DENSE_LIMIT = 2048


class KernelBuildError(ValueError):
    """A built kernel failed its row-sum or detailed-balance certificate."""


@dataclass(frozen=True)
class ChainParams:
    n: int
    k: int

    def __post_init__(self):
        for name in ("n", "k"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if not 0 <= self.k <= self.n:
            raise ValueError(f"k must lie in [0, n={self.n}], got {self.k}")

    @property
    def ergodic(self):
        return 0 < self.k < self.n

    def complement(self):
        return ChainParams(self.n, self.n - self.k)

    def check_state(self, x, name="x"):
        if not 0 <= x <= self.n:
            raise ValueError(f"{name} must lie in [0, {self.n}], got {x}")


def complement_params(params):
    """(n, k) -> (n, n - k): swapping the complements gives the reflected chain."""
    return params.complement()


@dataclass(frozen=True, eq=False)
class StateDistribution:
    n: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (self.n + 1,):
            raise ValueError(f"expected {self.n + 1} weights, got shape {w.shape}")
        if np.any(w < -1e-15) or abs(math.fsum(w) - 1.0) > 1e-9:
            raise ValueError("weights must be a probability vector")
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, n, x):
        w = np.zeros(n + 1)
        w[x] = 1.0
        return cls(n, w)

    def as_pmf(self):
        return DiscretePMF(0, np.clip(self.weights, 0.0, None) / self.weights.sum())

    def mean(self):
        return math.fsum(np.arange(self.n + 1) * self.weights)

    def variance(self):
        mu = self.mean()
        return math.fsum((np.arange(self.n + 1) - mu) ** 2 * self.weights)


@dataclass(frozen=True, eq=False)
class BandedKernel:
    """band[i, d + k] = P(i, i + d) for -k <= d <= k (zero off the state space)."""

    params: ChainParams
    band: np.ndarray
    max_row_deviation: float = 0.0
    balance_error: float = 0.0

    @property
    def n(self):
        return self.params.n

    @property
    def k(self):
        return self.params.k

    def prob(self, i, j):
        d = j - i
        if abs(d) > self.k or not (0 <= i <= self.n and 0 <= j <= self.n):
            return 0.0
        return float(self.band[i, d + self.k])

    def row(self, i):
        lo, hi = max(0, i - self.k), min(self.n, i + self.k)
        return DiscretePMF(lo, self.band[i, lo - i + self.k:hi - i + self.k + 1])

    @cached_property
    def columns(self):
        """columns[j, e] = P(j + e - k, j): the band read along columns."""
        k = self.k
        padded = np.zeros((self.n + 1 + 2 * k, 2 * k + 1))
        padded[k:k + self.n + 1] = self.band
        e = np.arange(2 * k + 1)
        rows = np.arange(self.n + 1)[:, None] + e[None, :]
        return padded[rows, (2 * k - e)[None, :]]

    @cached_property
    def dense(self):
        n, k = self.n, self.k
        out = np.zeros((n + 1, n + 1))
        for d in range(-k, k + 1):
            i = np.arange(max(0, -d), min(n, n - d) + 1)
            out[i, i + d] = self.band[i, d + k]
        return out


def transition_prob(params, i, j):
    """P(i, j) straight from the double sum, accumulated with math.fsum."""
    params.check_state(i, "i")
    params.check_state(j, "j")
    n, k = params.n, params.k
    d = j - i
    if abs(d) > k:
        return 0.0
    norm = 2.0 * log_binomial(n, k)
    terms = []
    for m in range(max(0, -d), min(k, k - d) + 1):
        # H2 = m reds leave, H1 = d + m reds arrive
        t = (log_binomial(i, m) + log_binomial(n - i, k - m)
             + log_binomial(n - i, d + m) + log_binomial(i, k - d - m) - norm)
        if t != -math.inf:
            terms.append(t)
    if not terms:
        return 0.0
    top = max(terms)
    return math.exp(top) * math.fsum(math.exp(t - top) for t in terms)


def _certify(params, band, pi):
    k = params.k
    balance = 0.0
    for d in range(1, k + 1):
        lhs = pi[:-d] * band[:-d, k + d]
        rhs = pi[d:] * band[d:, k - d]
        if lhs.size:
            balance = max(balance, float(np.max(np.abs(lhs - rhs))))
    return balance


def build_kernel(params):
    n, k = params.n, params.k
    if k == 0:
        return BandedKernel(params, np.ones((n + 1, 1)))

    table = HypergeometricTable(n, k)
    band = np.empty((n + 1, 2 * k + 1))
    for x in range(n + 1):
        # index s of the convolution is d + k with d = H1 - H2
        band[x] = np.convolve(table.weights[n - x], table.weights[x][::-1])
    sums = band.sum(axis=1)
    deviation = float(np.max(np.abs(sums - 1.0)))
    if deviation > ROW_TOLERANCE:
        raise KernelBuildError(f"row sums off by {deviation:.3e} for n={n} k={k}")
    band /= sums[:, None]

    balance = _certify(params, band, stationary(n).weights)
    if balance > BALANCE_TOLERANCE:
        raise KernelBuildError(f"detailed balance broken by {balance:.3e} for n={n} k={k}")
    logger.debug("kernel_built n=%s k=%s max_row_dev=%.3e balance_err=%.3e", n, k, deviation, balance)
    return BandedKernel(params, band, deviation, balance)


def stationary(n):
    """pi_n(j) = C(n,j) C(n,n-j) / C(2n,n)."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    j = np.arange(n + 1)
    logw = 2.0 * np.array([log_binomial(n, int(x)) for x in j])
    w = np.exp(logw - logw.max())
    return StateDistribution(n, w / math.fsum(w))


def _check_dims(kernel, size):
    if size != kernel.n + 1:
        raise ValueError(f"distribution over {size} states does not match kernel n={kernel.n}")


def _evolve_weights(kernel, w):
    k = kernel.k
    if k == 0:
        return w.copy()
    padded = np.pad(w, (k, k))
    return (sliding_window_view(padded, 2 * k + 1) * kernel.columns).sum(axis=1)


def evolve(kernel, dist):
    """One step mu -> mu P as a banded product."""
    _check_dims(kernel, dist.n + 1)
    out = _evolve_weights(kernel, dist.weights)
    return StateDistribution(kernel.n, out)


def evolve_many(kernel, dists):
    """One step for each row of a (m, n+1) array of distributions."""
    dists = np.asarray(dists, dtype=float)
    _check_dims(kernel, dists.shape[1])
    k = kernel.k
    if k == 0:
        return dists.copy()
    m = dists.shape[0]
    if m * (kernel.n + 1) * (2 * k + 1) <= 4_000_000:
        padded = np.pad(dists, ((0, 0), (k, k)))
        return (sliding_window_view(padded, 2 * k + 1, axis=1) * kernel.columns[None]).sum(axis=2)
    if kernel.n + 1 <= DENSE_LIMIT:
        return dists @ kernel.dense
    return np.stack([_evolve_weights(kernel, row) for row in dists])


def advance(kernel, dists, steps):
    """Apply `steps` evolutions to rows of `dists`, renormalising every 64 steps."""
    out = np.atleast_2d(np.asarray(dists, dtype=float))
    for t in range(1, steps + 1):
        out = evolve_many(kernel, out)
        if t % RENORMALIZE_EVERY == 0:
            sums = out.sum(axis=1, keepdims=True)
            if np.max(np.abs(sums - 1.0)) > 1e-12:
                out = out / sums
    return out


def apply(kernel, f):
    """(P f)(i) = sum_j P(i, j) f(j)."""
    f = np.asarray(f, dtype=float)
    _check_dims(kernel, f.shape[0])
    k = kernel.k
    if k == 0:
        return f.copy()
    padded = np.pad(f, (k, k))
    return (sliding_window_view(padded, 2 * k + 1) * kernel.band).sum(axis=1)


def step_sample(params, x, source):
    params.check_state(x)
    n, k = params.n, params.k
    if k == 0:
        return x
    # H1 then H2, one uniform each
    h1 = hypergeometric_sample(n, n - x, k, source)
    h2 = hypergeometric_sample(n, x, k, source)
    return x + h1 - h2


class Stepper:
    """Vectorised chain steps for many lanes sharing one (n, k)."""

    def __init__(self, params):
        self.params = params
        self.table = HypergeometricTable(params.n, params.k) if params.k else None

    def step(self, xs, source):
        xs = np.asarray(xs, dtype=np.int64)
        if self.table is None:
            return xs.copy()
        u = source.random((2,) + xs.shape)
        n = self.params.n
        return xs + self.table.sample(n - xs, u[0]) - self.table.sample(xs, u[1])


def step_many(params, xs, source, stepper=None):
    return (stepper or Stepper(params)).step(xs, source)


def direct_row(params, x):
    """Row x of the kernel without building the whole band (O(k^2) work)."""
    params.check_state(x)
    n, k = params.n, params.k
    if k == 0:
        return DiscretePMF(x, np.ones(1))
    gained = hypergeometric_law(n, n - x, k)
    lost = hypergeometric_law(n, x, k)
    w = np.convolve(gained.weights, lost.weights[::-1])
    # support of H1 - H2 starts at min(H1) - max(H2)
    offset = x + gained.offset - (lost.stop - 1)
    return DiscretePMF(offset, w / math.fsum(w))


def write_kernel_csv(kernel, fh):
    """Write banded entries as `i,j,p` rows, p with 17 significant digits."""
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["i", "j", "p"])
    n, k = kernel.n, kernel.k
    for i in range(n + 1):
        for j in range(max(0, i - k), min(n, i + k) + 1):
            writer.writerow([i, j, format_float(kernel.band[i, j - i + k])])


def read_kernel_csv(fh):
    """Rebuild a BandedKernel from `write_kernel_csv` output ('#' lines skipped)."""
    reader = csv.reader(line for line in fh if not line.startswith("#"))
    header = next(reader, None)
    if header != ["i", "j", "p"]:
        raise ValueError(f"unexpected kernel header {header!r}")
    entries = [(int(i), int(j), float(p)) for i, j, p in reader]
    if not entries:
        raise ValueError("empty kernel dump")
    n = max(i for i, _, _ in entries)
    k = max(abs(i - j) for i, j, _ in entries)
    params = ChainParams(n, k)
    band = np.zeros((n + 1, 2 * k + 1))
    for i, j, p in entries:
        band[i, j - i + k] = p
    deviation = float(np.max(np.abs(band.sum(axis=1) - 1.0)))
    balance = _certify(params, band, stationary(n).weights) if k else 0.0
    return BandedKernel(params, band, deviation, balance)


def stationary_sample(n, source, size=None):
    """Draw from pi_n by inverse CDF walked outward from n/2."""
    u = source.random() if size is None else source.random(size)
    out = inverse_cdf_from_mode(stationary(n).as_pmf(), n // 2, u)
    return int(out) if size is None else np.asarray(out, dtype=np.int64)
