"""Log-domain arithmetic used by every exact computation in the package."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, log_ndtr

LOG_ZERO = float("-inf")

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_ASYMPTOTIC_CUTOFF = 30.0


def log_sum_exp(xs) -> float:
    """Compensated log-domain sum.

    The shifted exponentials are accumulated with ``math.fsum`` so the result
    is correctly rounded up to the final ``log``.
    """
    arr = np.asarray(xs, dtype=float).ravel()
    if arr.size == 0:
        return LOG_ZERO
    top = float(arr.max())
    if math.isinf(top):
        return top
    return top + math.log(math.fsum(np.exp(arr - top)))


def log_add(a: float, b: float) -> float:
    if a == LOG_ZERO:
        return b
    if b == LOG_ZERO:
        return a
    hi, lo = (a, b) if a >= b else (b, a)
    return hi + math.log1p(math.exp(lo - hi))


def log_sub(a: float, b: float) -> float:
    """log(exp(a) - exp(b)) for a >= b."""
    if b == LOG_ZERO:
        return a
    if b > a:
        raise ValueError(f"log_sub needs a >= b, got {a} < {b}")
    if b == a:
        return LOG_ZERO
    return a + log1mexp(b - a)


def log1mexp(x):
    """log(1 - exp(x)) for x <= 0, accurate on both ends."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(
            x > -math.log(2.0),
            np.log(-np.expm1(np.minimum(x, -0.0))),
            np.log1p(-np.exp(x)),
        )
    return out if out.ndim else float(out)


def log_diff_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise log(exp(a) - exp(b)) where a >= b; -inf where equal."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a + log1mexp(np.minimum(b - a, 0.0))
    out = np.where(np.isneginf(b), a, out)
    return np.where(np.isneginf(a), LOG_ZERO, out)


def segment_log_sum(keys_sorted: np.ndarray, values: np.ndarray):
    """Group equal consecutive keys and log-sum their values.

    ``keys_sorted`` must already be sorted. Returns (unique_keys, log_sums).
    """
    n = len(keys_sorted)
    if n == 0:
        return keys_sorted[:0], values[:0]
    change = np.empty(n, dtype=bool)
    change[0] = True
    change[1:] = keys_sorted[1:] != keys_sorted[:-1]
    starts = np.flatnonzero(change)
    top = np.maximum.reduceat(values, starts)
    safe_top = np.where(np.isneginf(top), 0.0, top)
    counts = np.diff(np.append(starts, n))
    shifted = np.exp(values - np.repeat(safe_top, counts))
    sums = np.add.reduceat(shifted, starts)
    with np.errstate(divide="ignore"):
        logs = np.log(sums) + safe_top
    return keys_sorted[starts], logs


def suffix_log_sums(log_mass: np.ndarray) -> np.ndarray:
    """out[i] = log sum_{j >= i} exp(log_mass[j]); out has one extra -inf slot."""
    out = np.empty(len(log_mass) + 1)
    out[-1] = LOG_ZERO
    if len(log_mass):
        out[:-1] = np.logaddexp.accumulate(log_mass[::-1])[::-1]
    return out


def log_normal_sf(x):
    """log P(N(0,1) > x).

    Uses the erfc-based ``log_ndtr`` for |x| <= 30 and the Mills-ratio
    asymptotic series above that. For x < -30 the survival probability is
    1 - (something below 1e-197), which rounds to log 1 = 0 either way.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    big = x > _ASYMPTOTIC_CUTOFF
    out[~big] = log_ndtr(-x[~big])
    if big.any():
        xb = x[big]
        inv2 = 1.0 / (xb * xb)
        # alternating series (2j-1)!!(-1/x^2)^j; first omitted term is < 3e-16 at x = 30
        series = inv2 * (-1.0 + inv2 * (3.0 + inv2 * (-15.0 + inv2 * (105.0 + inv2 * (-945.0 + inv2 * 10395.0)))))
        out[big] = -0.5 * xb * xb - np.log(xb) - _LOG_SQRT_2PI + np.log1p(series)
    return out if out.ndim else float(out)


def log_normal_cdf(x):
    return log_normal_sf(-np.asarray(x, dtype=float))


def log_poisson_pmf(k, lam: float):
    k = np.asarray(k, dtype=float)
    out = k * math.log(lam) - lam - gammaln(k + 1.0)
    return out if out.ndim else float(out)


def log_poisson_tail_bound(j: int, lam: float) -> float:
    """Upper bound on log P(N >= j), N ~ Poisson(lam).

    For j + 1 > lam the pmf ratios p(i+1)/p(i) = lam/(i+1) are at most
    lam/(j+1) beyond j, so the tail is below p(j) / (1 - lam/(j+1)).
    """
    if j <= 0:
        return 0.0
    if j + 1 <= lam * 1.5:
        return 0.0
    return log_poisson_pmf(j, lam) - math.log1p(-lam / (j + 1))
