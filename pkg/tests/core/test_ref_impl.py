from fractions import Fraction

import pytest

from urncut.core import ref_impl


def test_kernel_small_case():
    P = ref_impl.kernel(2, 1)
    assert P[0] == [0, 1, 0]
    assert P[1] == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]
    assert P[2] == [0, 1, 0]


@pytest.mark.parametrize("n, k", [(4, 1), (6, 2), (7, 3), (8, 8)])
def test_rows_sum_to_one(n, k):
    for row in ref_impl.kernel(n, k):
        assert sum(row) == 1


def test_stationary_is_invariant():
    n, k = 6, 2
    P = ref_impl.kernel(n, k)
    pi = ref_impl.stationary(n)
    assert sum(pi) == 1
    for j in range(n + 1):
        assert sum(pi[i] * P[i][j] for i in range(n + 1)) == pi[j]


def test_size_limit():
    with pytest.raises(ValueError):
        ref_impl.stationary(ref_impl.ORACLE_N_MAX + 1)


def test_monotone_law_marginals():
    n, k, x, y = 6, 2, 4, 1
    law = ref_impl.monotone_law(n, k, x, y)
    assert sum(law.values()) == 1
    for xp in range(n + 1):
        marginal = sum(p for (a, _), p in law.items() if a == xp)
        assert marginal == ref_impl.transition_prob(n, k, x, xp)
    for yp in range(n + 1):
        marginal = sum(p for (_, b), p in law.items() if b == yp)
        assert marginal == ref_impl.transition_prob(n, k, y, yp)


def test_monotone_law_never_widens():
    for (xp, yp) in ref_impl.monotone_law(8, 3, 6, 2):
        assert abs(xp - yp) <= 4


def test_expected_gap_from_gap_one():
    assert ref_impl.expected_gap(2, 1, 1, 0) == Fraction(1, 2)
    n = 10
    for k in range(1, n):
        target = 1 - Fraction(2 * k * (n - k), n * n)
        for x in range(1, n + 1):
            assert ref_impl.expected_gap(n, k, x, x - 1) == target
