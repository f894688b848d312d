"""Certified evaluation of tail probabilities and related Poisson series.

Every series over the number of jumps is truncated with a rigorous
Poisson-tail bound, and every table-based probability carries the mass that
pruning or support truncation removed. Results are reported in log space.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .convolution import (
    DEFAULT_PRUNE_EPS,
    ConvolutionTable,
    SupportCapExceeded,
    count_le,
    index_to_float,
    is_wide,
    join_limbs,
    sk_tail,
    split_limbs,
    _sparse_convolve,
)
from .jump_laws import ContinuousLaw, DiscreteLaw, JumpLaw, discretize, shift_law, _floor_div
from .logspace import (
    LOG_ZERO,
    log_add,
    log_diff_arrays,
    log_normal_sf,
    log_poisson_pmf,
    log_poisson_tail_bound,
    log_sum_exp,
)

DEFAULT_TOL = 1e-13
DEFAULT_STEP = 0.01
MAX_FOLDS = 400
# below this (log) level a zero result is reported with an absolute certificate
_LOG_ABS_FLOOR = -690.0


class InsufficientDepth(RuntimeError):
    pass


@dataclass(frozen=True)
class SeriesTruncation:
    """Certificate of a truncated series.

    ``remainder_log_bound`` bounds the omitted terms; ``pruned_log_bound``
    bounds what support pruning/truncation removed from the kept terms.
    Both are absolute (log) bounds on the same scale as the value.
    """

    K_used: int
    remainder_log_bound: float
    pruned_log_bound: float = LOG_ZERO

    def as_dict(self) -> dict:
        return {
            "K_used": self.K_used,
            "remainder_log_bound": self.remainder_log_bound,
            "pruned_log_bound": self.pruned_log_bound,
        }


@dataclass(frozen=True)
class TailValue:
    """A probability known to lie in [exp(log_lo), exp(log_hi)]."""

    log_lo: float
    log_hi: float
    log_point: float
    truncation: SeriesTruncation
    method: str = "exact"

    @property
    def lo(self) -> float:
        return math.exp(self.log_lo)

    @property
    def hi(self) -> float:
        return math.exp(self.log_hi)

    @property
    def point(self) -> float:
        return math.exp(self.log_point)

    @property
    def certified(self) -> bool:
        return self.method in ("exact", "sandwich")

    def as_dict(self) -> dict:
        return {
            "lo": self.lo,
            "hi": self.hi,
            "point": self.point,
            "method": self.method,
            "truncation": self.truncation.as_dict(),
        }


@dataclass(frozen=True, eq=False)
class LevyModel:
    """X(t) = sigma B(t) + Z(t) - b t with Z compound Poisson(lam, jumps)."""

    sigma: float
    drift_b: float
    lam: float
    jumps: JumpLaw
    discretization_step: float = DEFAULT_STEP
    prune_eps: float = DEFAULT_PRUNE_EPS
    _cache: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def __post_init__(self):
        errors = []
        if not (self.lam > 0 and math.isfinite(self.lam)):
            errors.append("lambda must be positive")
        if not (self.sigma >= 0 and math.isfinite(self.sigma)):
            errors.append("sigma must be >= 0")
        if not math.isfinite(self.drift_b):
            errors.append("drift must be finite")
        if not self.discretization_step > 0:
            errors.append("discretization step must be positive")
        if errors:
            raise ValueError("; ".join(errors))

    def table(self, law: Optional[DiscreteLaw] = None) -> ConvolutionTable:
        law = law if law is not None else self.jumps
        key = ("table", id(law))
        with self._lock:
            if key not in self._cache:
                self._cache[key] = (law, ConvolutionTable(law, 1, self.prune_eps))
            return self._cache[key][1]

    def sandwich_laws(self) -> tuple[DiscreteLaw, DiscreteLaw, DiscreteLaw]:
        """(lower, midpoint, upper) lattice laws bracketing continuous jumps."""
        with self._lock:
            if "sandwich" not in self._cache:
                lo = discretize(self.jumps, self.discretization_step)
                a = lo.step
                self._cache["sandwich"] = (lo, shift_law(lo, a / 2), shift_law(lo, a))
            return self._cache["sandwich"]

    def with_jumps(self, jumps: JumpLaw) -> "LevyModel":
        return LevyModel(self.sigma, self.drift_b, self.lam, jumps, self.discretization_step, self.prune_eps)

    def describe(self) -> dict:
        return {
            "sigma": self.sigma,
            "drift_b": self.drift_b,
            "lambda": self.lam,
            "jumps": self.jumps.name,
            "discretization_step": self.discretization_step,
            "prune_eps": self.prune_eps,
        }


# ---------------------------------------------------------------------------
# series machinery


def _zero_below(law: DiscreteLaw, u: float) -> float:
    """Smallest k for which P(S_k > u) can be positive (inf if never)."""
    if law.upper_bound is None or law.tail_fn is not None:
        return 0 if u < 0 else 1
    top = float(law.max_value())
    if u < 0:
        return 0
    if top <= 0:
        return math.inf
    return math.floor(u / top) + 1


def _poisson_series(
    lam: float,
    term: Callable[[int], tuple[float, float]],
    k_start: int,
    k_zero_below: float,
    tol: float,
    shift: int = 0,
    log_scale: float = 0.0,
    k_max: int = MAX_FOLDS,
) -> tuple[float, SeriesTruncation]:
    """log sum_{k >= k_start} Poisson(lam).pmf(k) * term(k), term(k) <= 1.

    ``term(k)`` returns (log value from the table, log bound on the mass the
    table lacks). Terms with k < k_zero_below vanish. ``shift`` means term k
    only involves k - shift folds (used by series that index S_{k-1}).
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    log_tol = math.log(tol)
    acc, pruned = LOG_ZERO, LOG_ZERO
    k = k_start
    last = k_start - 1

    def tail_from(j: float) -> float:
        return LOG_ZERO if j == math.inf else log_poisson_tail_bound(int(j), lam)

    while True:
        if k < k_zero_below:
            rem = tail_from(k_zero_below)
            if rem <= log_tol + max(acc, pruned, _LOG_ABS_FLOOR):
                break
            k = int(k_zero_below)
            continue
        if k - shift > k_max:
            raise InsufficientDepth(f"series needs more than {k_max} folds to reach tol={tol}")
        val, missing = term(k)
        w = log_poisson_pmf(k, lam)
        acc = log_add(acc, w + min(val, 0.0))
        pruned = log_add(pruned, w + missing)
        last = k
        rem = tail_from(max(k + 1, k_zero_below))
        if rem <= log_tol + max(acc, pruned, _LOG_ABS_FLOOR):
            break
        k += 1
    rem = tail_from(max(last + 1, k_zero_below))
    return acc + log_scale, SeriesTruncation(last, rem + log_scale, pruned + log_scale)


# ---------------------------------------------------------------------------
# elementary tails


def normal_tail(x: float) -> float:
    """log P(N(0,1) > x), checked against the two-sided Mills bracket for x > 1."""
    val = float(log_normal_sf(x))
    if x > 1:
        log_upper = -0.5 * x * x - math.log(x) - 0.5 * math.log(2 * math.pi)
        log_lower = log_upper + math.log1p(-1.0 / (x * x))
        slack = 8 * np.finfo(float).eps * max(1.0, abs(log_upper))
        assert log_lower - slack <= val <= log_upper + slack, f"normal tail bracket violated at x={x}"
    return val


def gaussian_smoothed_tail(table: ConvolutionTable, k: int, sigma: float, u: float) -> float:
    """log P(sigma * N + S_k > u) summed exactly over the support of S_k."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    f = table.fold(k)
    vals = table.values(k)
    return min(0.0, log_sum_exp(f.log_mass + log_normal_sf((u - vals) / sigma)))


def compound_tail(lam: float, table: ConvolutionTable, u: float, tol: float = DEFAULT_TOL):
    """log P(Z(1) > u) for compound Poisson Z with the table's jump law."""
    if u < 0 and table.law.lower_support() >= 0:
        return 0.0, SeriesTruncation(0, LOG_ZERO, LOG_ZERO)

    def term(k):
        return sk_tail(table, k, u), table.log_missing(k)

    return _poisson_series(lam, term, 0, _zero_below(table.law, u), tol)


def _discrete_model_tail(model: LevyModel, law: DiscreteLaw, u: float, tol: float):
    table = model.table(law)
    level = u + model.drift_b
    if model.sigma == 0:
        return compound_tail(model.lam, table, level, tol)

    def term(k):
        if k == 0:
            return normal_tail(level / model.sigma), LOG_ZERO
        return gaussian_smoothed_tail(table, k, model.sigma, level), table.log_missing(k)

    return _poisson_series(model.lam, term, 0, 0, tol)


def _bracket(log_val: float, cert: SeriesTruncation) -> float:
    return min(0.0, log_add(log_val, log_add(cert.remainder_log_bound, cert.pruned_log_bound)))


def model_tail(model: LevyModel, u: float, tol: float = DEFAULT_TOL) -> TailValue:
    """P(X(1) > u), exact for discrete jumps, a discretisation sandwich otherwise."""
    if model.jumps.is_discrete:
        val, cert = _discrete_model_tail(model, model.jumps, u, tol)
        return TailValue(val, _bracket(val, cert), val, cert, "exact")
    lo_law, mid_law, hi_law = model.sandwich_laws()
    lo, cert_lo = _discrete_model_tail(model, lo_law, u, tol)
    mid, _ = _discrete_model_tail(model, mid_law, u, tol)
    hi, cert_hi = _discrete_model_tail(model, hi_law, u, tol)
    cert = SeriesTruncation(
        max(cert_lo.K_used, cert_hi.K_used),
        max(cert_lo.remainder_log_bound, cert_hi.remainder_log_bound),
        max(cert_lo.pruned_log_bound, cert_hi.pruned_log_bound),
    )
    return TailValue(lo, _bracket(hi, cert_hi), mid, cert, "sandwich")


# ---------------------------------------------------------------------------
# auxiliary quantities


def a_k_seq(k: int, m: int) -> float:
    """a_k = max(1 - (m + 1) log k / k, 0)."""
    if k < 1 or m < 1:
        raise ValueError("k >= 1 and m >= 1 required")
    return max(1.0 - (m + 1) * math.log(k) / k, 0.0)


def m_index(table: ConvolutionTable, b: float, k_max: int = 64) -> int:
    """m = min{k >= 1: P(S_k > b) > 0}."""
    for k in range(1, k_max + 1):
        if sk_tail(table, k, b) > LOG_ZERO:
            return k
    raise ValueError(f"m not found within K={k_max}")


def _q_discrete(model: LevyModel, law: DiscreteLaw, u: float, tol: float):
    table = model.table(law)
    b = model.drift_b
    m = m_index(table, b)

    def term(k):
        if k == 0:
            return LOG_ZERO, LOG_ZERO
        ak = a_k_seq(k, m)
        if ak <= 0:
            return LOG_ZERO, LOG_ZERO
        f = table.fold(k)
        pos = count_le(f.index, table.threshold_index(u))
        if pos == len(f.index):
            return LOG_ZERO, table.log_missing(k) + k * math.log(ak)
        c = np.minimum((table.values(k)[pos:] - u) / b, ak)
        with np.errstate(divide="ignore"):
            logs = f.log_mass[pos:] + k * np.log(c)
        return log_sum_exp(logs), table.log_missing(k) + k * math.log(ak)

    val, cert = _poisson_series(model.lam, term, 1, _zero_below(law, u), tol)
    return val, cert, m


def q_u(model: LevyModel, u: float, tol: float = DEFAULT_TOL) -> TailValue:
    """Q(u) = P(Z(1) > u + b Gamma_tau, Gamma_tau <= a_tau) for sigma = 0, b > 0.

    The time integrals are done in closed form: t -> P(S_k > u + b t) is a
    step function, so each support point y contributes min((y - u)/b, a_k)^k.
    """
    if model.sigma != 0:
        raise ValueError("Q(u) is defined for sigma = 0")
    if not model.drift_b > 0:
        raise ValueError("Q(u) needs drift b > 0")
    if model.jumps.is_discrete:
        val, cert, m = _q_discrete(model, model.jumps, u, tol)
        return TailValue(val, _bracket(val, cert), val, cert, "exact")
    lo_law, mid_law, hi_law = model.sandwich_laws()
    lo, c_lo, m_lo = _q_discrete(model, lo_law, u, tol)
    mid, _, _ = _q_discrete(model, mid_law, u, tol)
    hi, c_hi, m_hi = _q_discrete(model, hi_law, u, tol)
    # Q is monotone in the jump sizes only while a_k is shared
    method = "sandwich" if m_lo == m_hi else "sandwich-uncertified"
    return TailValue(lo, _bracket(hi, c_hi), mid, c_hi, method)


def g_u(lam: float, table: ConvolutionTable, u: float, tol: float = DEFAULT_TOL):
    """G(u) = sum_{k >= 2} lam^k / k! P(S_{k-1} > u)."""

    def term(k):
        return sk_tail(table, k - 1, u), table.log_missing(k - 1)

    kz = _zero_below(table.law, u)
    return _poisson_series(lam, term, 2, kz + 1, tol, shift=1, log_scale=lam)


def iter_barrier_tails(law: DiscreteLaw, u: float, cap: int = 10_000_000) -> Iterator[float]:
    """Yield log P(max_{k<n} S_k <= u, S_n > u) for n = 1, 2, ..."""
    thr = _floor_div(u, law.step)
    ib = join_limbs(*split_limbs(np.asarray(law.index)))
    lb = np.asarray(law.log_mass, dtype=float)
    below_idx, below_lm = np.zeros(1, dtype=np.int64), np.zeros(1)
    while True:
        if len(below_idx) == 0:
            yield LOG_ZERO
            continue
        keys, lms = _sparse_convolve(below_idx, below_lm, ib, lb, cap)
        n_below = count_le(keys, thr)
        yield log_sum_exp(lms[n_below:])
        below_idx, below_lm = keys[:n_below], lms[:n_below]
        if len(below_idx) > cap:
            raise SupportCapExceeded("barrier-restricted support exceeds the cap")


def d_u(model: LevyModel, u: float, tol: float = DEFAULT_TOL):
    """D(u) = e^-lam sum_{n >= 1} lam^n/n! P(max_{k<n} S_k <= u, S_n > u)."""
    law = model.jumps
    if model.sigma != 0 or model.drift_b != 0:
        raise ValueError("D(u) needs sigma = 0 and b = 0")
    if not isinstance(law, DiscreteLaw) or not law.is_symmetric():
        raise ValueError("D(u) needs a symmetric discrete jump law")
    it = iter_barrier_tails(law, u)
    cache: dict[int, float] = {}

    def term(k):
        while len(cache) < k:
            cache[len(cache) + 1] = next(it)
        return cache[k], LOG_ZERO

    return _poisson_series(model.lam, term, 1, _zero_below(law, u), tol)


def exp_moments_normal(alpha: float) -> tuple[float, float, float]:
    """(m+, m-, l) for B(1): m+ = e^{a^2/2} Phi(a), m- = e^{a^2/2} Phibar(a), l = 2 Phi(a)."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    g = math.exp(0.5 * alpha * alpha)
    phi_a = float(ndtr(alpha))
    m_plus = g * phi_a
    m_minus = g * float(ndtr(-alpha))
    return m_plus, m_minus, 2.0 * phi_a


def ik_value(k: int, table: ConvolutionTable) -> float:
    """I_k = (1/(e (k-1)!)) P(S_{k-1} + N > 0), the Gaussian integral done exactly."""
    if k < 1:
        raise ValueError("k >= 1 required")
    if k == 1:
        return 0.5 * math.exp(-1.0)
    lp = gaussian_smoothed_tail(table, k - 1, 1.0, 0.0)
    return math.exp(lp - 1.0 - math.lgamma(k))


def _jk_inner(s_vals, s_lm, x_vals, x_lm, y: float, variant: str) -> float:
    """Gaussian(0, y) mass of the crossing event, summed over (S_{k-2}, X) pairs."""
    r = math.sqrt(y)
    a = log_normal_sf(s_vals / r)[:, None]
    b = log_normal_sf((s_vals[:, None] + x_vals[None, :]) / r)
    if variant == "corrected":
        # {S_{k-2} <= -t < S_{k-2} + X}: needs X > 0
        diff = log_diff_arrays(np.broadcast_to(a, b.shape), b)
    else:
        # {S_{k-2} + X <= -t < S_{k-2}}: needs X < 0
        diff = log_diff_arrays(b, np.broadcast_to(a, b.shape))
    logs = s_lm[:, None] + x_lm[None, :] + diff
    return math.exp(log_sum_exp(logs))


def jk_value(k: int, table: ConvolutionTable, variant: str = "corrected", epsrel: float = 1e-8) -> float:
    """J_k = (1/(e (k-2)!)) int_0^1 [int P(E_t) phi_y(t) dt] y^{k-1} (1-y) dy.

    ``variant="corrected"`` uses E_t = {S_{k-2} <= -t < S_{k-1}};
    ``variant="printed"`` uses E_t = {S_{k-1} <= -t < S_{k-2}}, which is empty
    when jumps are positive.
    """
    if k < 3:
        raise ValueError("k >= 3 required")
    if variant not in ("corrected", "printed"):
        raise ValueError("variant must be 'corrected' or 'printed'")
    law = table.law
    f = table.fold(k - 2)
    s_vals = table.values(k - 2)
    s_lm = f.log_mass
    # support points of S_{k-2} more than 40 above its minimum add < e^-800 relatively
    keep = s_vals <= max(s_vals.min(), 0.0) + 40.0
    s_vals, s_lm = s_vals[keep], s_lm[keep]
    x_vals = law.values
    x_lm = np.asarray(law.log_mass, dtype=float)
    sel = x_vals > 0 if variant == "corrected" else x_vals < 0
    if not sel.any():
        return 0.0
    x_vals, x_lm = x_vals[sel], x_lm[sel]

    def integrand(y):
        if y <= 0:
            return 0.0
        return _jk_inner(s_vals, s_lm, x_vals, x_lm, y, variant) * y ** (k - 1) * (1.0 - y)

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=epsrel, limit=200)
    return val * math.exp(-1.0 - math.lgamma(k - 1))


def sup_tail_no_jumps(sigma: float, u: float) -> float:
    """log P(sup_{t<=1} sigma B(t) > u) = log 2 P(sigma B(1) > u) for u >= 0."""
    if u < 0:
        return 0.0
    return math.log(2.0) + normal_tail(u / sigma)
