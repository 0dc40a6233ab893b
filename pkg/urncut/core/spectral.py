"""The first two eigenfunctions of the urn kernel and what they give for free.

f1(x) = 1 - 2x/n has eigenvalue f1(k) = 1 - 2k/n, and the quadratic f2 has
eigenvalue f2(k). Together they yield closed forms for E(X_t | X_0) and
Var(X_t | X_0), the martingale f1(X_t) / (1 - 2k/n)^t and a fully explicit
Doob maximal bound.
"""

import math
from dataclasses import dataclass

import numpy as np

from urncut.core.kernel import apply


@dataclass(frozen=True, eq=False)
class EigenPair:
    index: int
    eigenvalue: float
    values: np.ndarray
    residual: float


def f1(n, x):
    return 1.0 - 2.0 * np.asarray(x, dtype=float) / n if np.ndim(x) else 1.0 - 2.0 * x / n


def f2(n, x):
    if n < 2:
        raise ValueError(f"f2 needs n >= 2, got {n}")
    x = np.asarray(x, dtype=float) if np.ndim(x) else float(x)
    c = 2.0 * (2 * n - 1)
    return 1.0 - c * x / n**2 + c * x * (x - 1.0) / (n**2 * (n - 1))


def eigen_pair(kernel, index):
    """Closed-form eigenfunction `index` with its measured kernel residual."""
    n, k = kernel.n, kernel.k
    states = np.arange(n + 1)
    if index == 1:
        values, eigenvalue = f1(n, states), f1(n, k)
    elif index == 2:
        values, eigenvalue = f2(n, states), f2(n, k)
    else:
        raise ValueError(f"only eigenfunctions 1 and 2 are available, got {index}")
    residual = float(np.max(np.abs(apply(kernel, values) - eigenvalue * values)))
    return EigenPair(index, float(eigenvalue), values, residual)


def signed_power(base, t):
    """base**t for integer t >= 0 as exp(t ln|base|), sign tracked by parity."""
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    if t == 0:
        return 1.0
    if base == 0.0:
        return 0.0
    magnitude = math.exp(t * math.log(abs(base)))
    return -magnitude if base < 0 and t % 2 else magnitude


def _contraction(params):
    return 1.0 - 2.0 * params.k / params.n


def conditional_mean(params, t, x0):
    n = params.n
    return n / 2.0 - signed_power(_contraction(params), t) * (n / 2.0 - x0)


def conditional_variance(params, t, x0):
    n, k = params.n, params.k
    stationary_part = n**2 / (4.0 * (2 * n - 1))
    quadratic = n**2 * (n - 1) / (2.0 * (2 * n - 1)) * signed_power(f2(n, k), t) * f2(n, x0)
    linear = n**2 / 4.0 * signed_power(_contraction(params), 2 * t) * f1(n, x0) ** 2
    return stationary_part + quadratic - linear


def second_moment_f1(params, t, x0):
    """E(f1(X_t)^2 | X_0 = x0) = 1/(2n-1) + (2n-2)/(2n-1) f2(k)^t f2(x0)."""
    n, k = params.n, params.k
    return 1.0 / (2 * n - 1) + (2 * n - 2) / (2 * n - 1) * signed_power(f2(n, k), t) * f2(n, x0)


def _require_nonzero_contraction(params):
    if 2 * params.k == params.n:
        raise ValueError("2k = n: the normaliser (1 - 2k/n)^t vanishes")


def martingale_value(params, t, x):
    """M_t = f1(x) / (1 - 2k/n)^t."""
    _require_nonzero_contraction(params)
    if t < 0:
        raise ValueError(f"t must be non-negative, got {t}")
    b = _contraction(params)
    sign = -1.0 if b < 0 and t % 2 else 1.0
    return sign * f1(params.n, x) * np.exp(-t * math.log(abs(b)))


def doob_bound(params, t1, t2, r, x0):
    """(n^2/r^2) (1-2k/n)^(-2(t2-t1)) E(f1(X_t2)^2 | X_0 = x0).

    Bounds P(max over t1 <= s <= t2 of |X_s - n/2| >= r).
    """
    _require_nonzero_contraction(params)
    if not 0 <= t1 <= t2:
        raise ValueError(f"need 0 <= t1 <= t2, got t1={t1} t2={t2}")
    if r <= 0:
        raise ValueError(f"r must be positive, got {r}")
    b = abs(_contraction(params))
    prefactor = math.exp(-2.0 * (t2 - t1) * math.log(b))
    return max(params.n**2 / r**2 * prefactor * second_moment_f1(params, t2, x0), 0.0)


def burn_in(params):
    """ceil((n/4k) ln n): the point where the mean has forgotten the start."""
    n, k = params.n, params.k
    if k == 0:
        raise ValueError("k = 0 never mixes")
    return math.ceil(n / (4.0 * k) * math.log(n))


def window_threshold(params, gamma):
    """ceil((n/4k) ln n + gamma n/k)."""
    n, k = params.n, params.k
    if k == 0:
        raise ValueError("k = 0 never mixes")
    return math.ceil(n / (4.0 * k) * math.log(n) + gamma * n / k)


def chebyshev_bound(n, r):
    """n / (r - sqrt n)^2, valid once the chain is past its burn-in."""
    if r <= math.sqrt(n):
        raise ValueError(f"r must exceed sqrt(n) = {math.sqrt(n):.3f}, got {r}")
    return n / (r - math.sqrt(n)) ** 2
