"""Exact rational reference implementation for small urns.

Everything here is computed with `fractions.Fraction` and `math.comb`; it is
slow by design and only meant for n up to a couple of dozen balls, where it
serves as ground truth for the float engine.
"""

from fractions import Fraction
from math import comb

ORACLE_N_MAX = 24


def _check_size(n):
    if n > ORACLE_N_MAX:
        raise ValueError(f"exact reference limited to n <= {ORACLE_N_MAX}, got {n}")


def hypergeometric_pmf(N, K, r, j):
    if not (0 <= K <= N and 0 <= r <= N):
        raise ValueError(f"invalid hypergeometric parameters (N={N}, K={K}, r={r})")
    if j < 0 or j > min(K, r) or r - j > N - K:
        return Fraction(0)
    return Fraction(comb(K, j) * comb(N - K, r - j), comb(N, r))


def transition_prob(n, k, i, j):
    """P(i, j) = sum_m P(H2 = m) P(H1 = j - i + m), H1 ~ Hyper(n, n-i, k), H2 ~ Hyper(n, i, k)."""
    _check_size(n)
    d = j - i
    if abs(d) > k:
        return Fraction(0)
    return sum((hypergeometric_pmf(n, i, k, m) * hypergeometric_pmf(n, n - i, k, d + m)
                for m in range(k + 1)), Fraction(0))


def kernel(n, k):
    return [[transition_prob(n, k, i, j) for j in range(n + 1)] for i in range(n + 1)]


def stationary(n):
    _check_size(n)
    total = comb(2 * n, n)
    return [Fraction(comb(n, j) ** 2, total) for j in range(n + 1)]


def _cell_counts(sizes, k):
    """Joint law of a uniform k-subset's counts in three cells of the given sizes."""
    total = comb(sum(sizes), k)
    a, b, c = sizes
    for c1 in range(min(a, k) + 1):
        for c2 in range(min(b, k - c1) + 1):
            c3 = k - c1 - c2
            if c3 > c:
                continue
            yield c1, c2, Fraction(comb(a, c1) * comb(b, c2) * comb(c, c3), total)


def monotone_law(n, k, x, y):
    """Joint law {(x', y'): probability} of one step of the labelled-ball coupling.

    Reds are labelled as a prefix in every urn; the shared left subset meets
    the cells [1..a], (a..b], rest with a = min(x,y), b = max(x,y), and the
    shared right subset meets [1..n-b], (n-b..n-a], rest.
    """
    _check_size(n)
    a, b = min(x, y), max(x, y)
    law = {}
    for a1, a2, pa in _cell_counts((a, b - a, n - b), k):
        for b1, b2, pb in _cell_counts((n - b, b - a, a), k):
            hi = b - a1 - a2 + b1
            lo = a - a1 + b1 + b2
            pair = (hi, lo) if x >= y else (lo, hi)
            law[pair] = law.get(pair, Fraction(0)) + pa * pb
    return law


def expected_gap(n, k, x, y):
    return sum((abs(xp - yp) * p for (xp, yp), p in monotone_law(n, k, x, y).items()), Fraction(0))
