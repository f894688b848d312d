"""Jump-size distributions, tail-class probes and Levy-measure constructors.

Discrete laws keep their support as exact integers times a common rational
step so that sums of jumps stay exact; probabilities live in log space.
Continuous laws are described by their log-tail, log-density and (when known)
their hazard function.
"""

from __future__ import annotations

import bisect
import math
import threading
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import reduce
from typing import Callable, Iterator, Optional, Sequence

import numpy as np
from scipy import integrate

from .logspace import (
    LOG_ZERO,
    log_diff_arrays,
    log_normal_sf,
    log_sum_exp,
    segment_log_sum,
    suffix_log_sums,
)

TRUNCATION_EPS = 1e-30
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_INT64_SAFE = 2**62


class LawKind(str, Enum):
    LATTICE = "lattice"
    DISCRETE_GENERAL = "discrete_general"
    CONTINUOUS_HAZARD = "continuous_hazard"
    TAIL_ONLY = "tail_only"


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    # shortest repr, so 0.01 becomes 1/100 rather than its binary expansion
    return Fraction(repr(float(x)))


def _fraction_gcd(values: Sequence[Fraction]) -> Fraction:
    nonzero = [abs(v) for v in values if v != 0]
    if not nonzero:
        return Fraction(1)
    num = reduce(math.gcd, (v.numerator for v in nonzero))
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (v.denominator for v in nonzero))
    return Fraction(num, den)


def _index_array(ints: Sequence[int]) -> np.ndarray:
    ints = list(ints)
    if not ints or max(abs(i) for i in ints) < _INT64_SAFE:
        return np.asarray(ints, dtype=np.int64)
    arr = np.empty(len(ints), dtype=object)
    arr[:] = ints
    return arr


def _floor_div(u: float, step: Fraction) -> int:
    """floor(u / step) computed exactly."""
    return math.floor(_as_fraction(u) / step)


class JumpLaw:
    """Common interface of every jump distribution."""

    name: str
    kind: LawKind
    upper_bound: Optional[float]

    @property
    def is_discrete(self) -> bool:
        return self.kind in (LawKind.LATTICE, LawKind.DISCRETE_GENERAL)

    def log_tail(self, u: float) -> float:
        raise NotImplementedError

    def log_tail_array(self, us) -> np.ndarray:
        return np.array([self.log_tail(float(u)) for u in np.asarray(us, dtype=float).ravel()])

    def tail(self, u: float) -> float:
        return math.exp(self.log_tail(u))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def lower_support(self) -> float:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# discrete laws


SeriesFn = Callable[[int], "tuple[int, float]"]


@dataclass(frozen=True, eq=False)
class DiscreteLaw(JumpLaw):
    """Law on {index * step}; ``index`` strictly increasing integers.

    ``series`` optionally enumerates the untruncated support (n -> (index,
    log mass) for n >= series_start, increasing values) and ``tail_fn`` gives
    the exact log-tail beyond the stored truncation.
    """

    name: str
    kind: LawKind
    step: Fraction
    index: np.ndarray
    log_mass: np.ndarray
    upper_bound: Optional[float] = None
    truncation_mass: float = 0.0
    tail_fn: Optional[Callable[[float], float]] = None
    series: Optional[SeriesFn] = None
    series_start: int = 0
    params: dict = field(default_factory=dict)
    series_block: Optional[Callable[[int, int], "tuple[np.ndarray, np.ndarray]"]] = None
    tail_array_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if len(self.index) == 0:
            raise ValueError("discrete law needs at least one support point")
        idx = list(self.index)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("support values must be strictly increasing")
        total = log_sum_exp(self.log_mass)
        if abs(math.expm1(total)) > 1e-12 + self.truncation_mass:
            raise ValueError(f"masses of {self.name} sum to {math.exp(total)!r}, not 1")
        object.__setattr__(self, "_suffix", suffix_log_sums(np.asarray(self.log_mass, dtype=float)))
        object.__setattr__(self, "_index_list", idx)

    # support ----------------------------------------------------------
    @property
    def values(self) -> np.ndarray:
        return np.array([float(i * self.step) for i in self._index_list])

    def exact_values(self) -> list[Fraction]:
        return [i * self.step for i in self._index_list]

    @property
    def lattice_step(self) -> Optional[Fraction]:
        """Minimal lattice step a (None for general discrete laws)."""
        if self.kind is not LawKind.LATTICE:
            return None
        idx = self._index_list
        if len(idx) == 1:
            return abs(idx[0] * self.step) or self.step
        g = reduce(math.gcd, (b - a for a, b in zip(idx, idx[1:])))
        return g * self.step

    def lower_support(self) -> float:
        return float(self._index_list[0] * self.step)

    def max_value(self) -> Fraction:
        return self._index_list[-1] * self.step

    def mass_at(self, value) -> float:
        q = _as_fraction(value) / self.step
        if q.denominator != 1:
            return 0.0
        pos = bisect.bisect_left(self._index_list, q.numerator)
        if pos < len(self._index_list) and self._index_list[pos] == q.numerator:
            return math.exp(self.log_mass[pos])
        return 0.0

    # tails ------------------------------------------------------------
    def log_tail_from_masses(self, u: float) -> float:
        if u == math.inf:
            return LOG_ZERO
        if u == -math.inf:
            return float(self._suffix[0])
        thr = _floor_div(u, self.step)
        pos = bisect.bisect_right(self._index_list, thr)
        return float(self._suffix[pos])

    def log_tail(self, u: float) -> float:
        if self.tail_fn is not None:
            return float(self.tail_fn(float(u)))
        return self.log_tail_from_masses(u)

    def log_tail_array(self, us) -> np.ndarray:
        if self.tail_array_fn is not None:
            return np.asarray(self.tail_array_fn(np.asarray(us, dtype=float)), dtype=float)
        return super().log_tail_array(us)

    def masses_up_to(self, x: float) -> tuple[list[int], np.ndarray]:
        """Support indices and log masses for all values <= x, untruncated.

        The stored masses are used first; beyond them the series continues the
        support (stored entries are the series terms series_start, ...).
        """
        thr = _floor_div(x, self.step)
        pos = bisect.bisect_right(self._index_list, thr)
        idx, lm = list(self._index_list[:pos]), [np.asarray(self.log_mass[:pos], dtype=float)]
        if self.series is None or pos < len(self._index_list):
            return idx, lm[0]
        n = self.series_start + len(self._index_list)
        if self.series_block is not None:
            block = 4096
            while True:
                bi, bm = self.series_block(n, n + block)
                keep = bi <= thr
                idx.extend(int(i) for i in bi[keep])
                lm.append(bm[keep])
                if not keep.all():
                    break
                n += block
            return idx, np.concatenate(lm)
        extra = []
        while True:
            i, m = self.series(n)
            if i > thr:
                break
            idx.append(i)
            extra.append(m)
            n += 1
        lm.append(np.asarray(extra, dtype=float))
        return idx, np.concatenate(lm)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        probs = np.exp(self.log_mass - np.max(self.log_mass))
        cdf = np.cumsum(probs)
        cdf /= cdf[-1]
        pos = np.searchsorted(cdf, rng.random(size), side="right")
        return self.values[np.minimum(pos, len(cdf) - 1)]

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        vals = self.exact_values()
        lookup = dict(zip(vals, np.exp(self.log_mass)))
        return all(abs(p - lookup.get(-v, 0.0)) <= tol for v, p in lookup.items())


def discrete_law(
    values: Sequence,
    probs: Optional[Sequence[float]] = None,
    *,
    log_probs: Optional[Sequence[float]] = None,
    kind: Optional[LawKind] = None,
    name: str = "discrete",
    normalize: bool = True,
) -> DiscreteLaw:
    """Build a law from (value, probability) pairs; values may repeat."""
    fr = [_as_fraction(v) for v in values]
    if log_probs is None:
        if probs is None:
            raise ValueError("need probs or log_probs")
        p = np.asarray(probs, dtype=float)
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        with np.errstate(divide="ignore"):
            lp = np.log(p)
    else:
        lp = np.asarray(log_probs, dtype=float)
    step = _fraction_gcd(fr)
    ints = [int(v / step) for v in fr]
    order = sorted(range(len(ints)), key=ints.__getitem__)
    keys = np.array([ints[i] for i in order], dtype=object)
    keys, lms = segment_log_sum(keys, lp[order])
    keep = ~np.isneginf(lms)
    keys, lms = list(keys[keep]), lms[keep]
    if normalize:
        lms = lms - log_sum_exp(lms)
    if kind is None:
        kind = LawKind.LATTICE
    vals_f = [float(k * step) for k in keys]
    return DiscreteLaw(
        name=name,
        kind=kind,
        step=step,
        index=_index_array(keys),
        log_mass=np.asarray(lms, dtype=float),
        upper_bound=max(vals_f),
    )


def point_law(value: float = 1.0) -> DiscreteLaw:
    return discrete_law([value], [1.0], name=f"point value={value}")


def plus_minus_law(value: float = 1.0) -> DiscreteLaw:
    """Fair +-value coin."""
    return discrete_law([-value, value], [0.5, 0.5], name=f"plus-minus value={value}")


def _series_law(
    name: str,
    kind: LawKind,
    step: Fraction,
    series: SeriesFn,
    start: int,
    tail_fn: Callable[[float], float],
    params: dict,
    eps: float = TRUNCATION_EPS,
) -> DiscreteLaw:
    """Truncate a series law at the first value whose exact tail is below eps."""
    idx, lm = [], []
    n = start
    log_eps = math.log(eps)
    while True:
        i, m = series(n)
        idx.append(i)
        lm.append(m)
        if tail_fn(float(i * step)) < log_eps:
            break
        n += 1
        if n - start > 100_000:
            raise RuntimeError(f"{name}: truncation did not converge")
    lm = np.asarray(lm, dtype=float)
    dropped = math.exp(tail_fn(float(idx[-1] * step)))
    return DiscreteLaw(
        name=name,
        kind=kind,
        step=step,
        index=_index_array(idx),
        log_mass=lm,
        upper_bound=None,
        truncation_mass=dropped,
        tail_fn=tail_fn,
        series=series,
        series_start=start,
        params=params,
    )


def _log_series_sum(log_terms: Iterator[float], rel: float = 1e-18) -> float:
    acc = LOG_ZERO
    for lt in log_terms:
        if acc != LOG_ZERO and lt < acc + math.log(rel):
            break
        acc = np.logaddexp(acc, lt)
    return float(acc)


def factorial_law(v: float = 1.0, eps: float = TRUNCATION_EPS) -> DiscreteLaw:
    """P(X = n!) = C(v) / (n!)^v on n >= 1; v = 1 gives C = 1/(e - 1)."""
    if not v >= 1:
        raise ValueError("v >= 1 required")

    def lterm(n: int) -> float:
        return -v * math.lgamma(n + 1)

    if v == 1:
        log_c = -math.log(math.e - 1.0)
    else:
        log_c = -_log_series_sum(lterm(n) for n in range(1, 200))

    def series(n: int):
        return math.factorial(n), log_c + lterm(n)

    def tail_fn(u: float) -> float:
        if u < 1:
            return 0.0
        n0 = 1
        while math.lgamma(n0 + 1) <= math.log(u) + 1e-12 and math.factorial(n0) <= u:
            n0 += 1
        return log_c + _log_series_sum(lterm(n) for n in range(n0, n0 + 400))

    return _series_law(
        f"factorial v={v}", LawKind.DISCRETE_GENERAL, Fraction(1), series, 1, tail_fn, {"v": v}, eps
    )


def lattice_factorial_law(eps: float = TRUNCATION_EPS) -> DiscreteLaw:
    """P(X = n) = C / n! on n >= 1, step 1."""
    log_c = -math.log(math.e - 1.0)

    def series(n: int):
        return n, log_c - math.lgamma(n + 1)

    def tail_fn(u: float) -> float:
        n0 = max(1, math.floor(u) + 1)
        return log_c + _log_series_sum(-math.lgamma(n + 1) for n in range(n0, n0 + 400))

    return _series_law("lattice-factorial", LawKind.LATTICE, Fraction(1), series, 1, tail_fn, {}, eps)


def geometric_law(p: float, eps: float = TRUNCATION_EPS) -> DiscreteLaw:
    """P(X = n) = p (1-p)^(n-1) on n >= 1."""
    if not 0 < p < 1:
        raise ValueError("0 < p < 1 required")
    lq = math.log1p(-p)

    def series(n: int):
        return n, math.log(p) + (n - 1) * lq

    def tail_fn(u: float) -> float:
        return max(0, math.floor(u)) * lq

    return _series_law(f"geometric p={p}", LawKind.LATTICE, Fraction(1), series, 1, tail_fn, {"p": p}, eps)


def shift_law(law: DiscreteLaw, offset) -> DiscreteLaw:
    """Law of X + offset."""
    off = _as_fraction(offset)
    step = _fraction_gcd([law.step, off]) if off else law.step
    scale = law.step / step
    if scale.denominator != 1:
        raise ValueError("shift step mismatch")
    scale = scale.numerator
    shift_idx = int(off / step)
    idx = [i * scale + shift_idx for i in law._index_list]
    tail_fn = None
    if law.tail_fn is not None:
        base_tail = law.tail_fn
        off_f = float(off)
        tail_fn = lambda u: base_tail(u - off_f)  # noqa: E731
    series = None
    if law.series is not None:
        base_series = law.series
        series = lambda n: (base_series(n)[0] * scale + shift_idx, base_series(n)[1])  # noqa: E731
    block = None
    if law.series_block is not None:
        base_block = law.series_block

        def block(lo: int, hi: int):
            bi, bm = base_block(lo, hi)
            return bi * scale + shift_idx, bm
    return DiscreteLaw(
        name=f"{law.name} + {offset}",
        kind=law.kind,
        step=step,
        index=_index_array(idx),
        log_mass=np.asarray(law.log_mass),
        upper_bound=None if law.upper_bound is None else law.upper_bound + float(off),
        truncation_mass=law.truncation_mass,
        tail_fn=tail_fn,
        series=series,
        series_start=law.series_start,
        params=dict(law.params),
        series_block=block,
    )


# ---------------------------------------------------------------------------
# hazard functions and continuous laws


@dataclass(frozen=True)
class HazardFunction:
    """A named hazard rate h(v); ``cumulative`` is the closed-form antiderivative
    from the threshold, used only as an oracle and for sampling."""

    name: str
    h: Callable[[np.ndarray], np.ndarray]
    cumulative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    inverse_cumulative: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __call__(self, v):
        return self.h(np.asarray(v, dtype=float))


def constant_hazard(rate: float = 1.0) -> HazardFunction:
    return HazardFunction(
        f"constant rate={rate}",
        lambda v: np.full_like(v, rate, dtype=float),
        lambda u: rate * u,
        lambda e: e / rate,
    )


def power_hazard(c: float = 1.0) -> HazardFunction:
    """h(v) = v^c; c = 1 is the linear hazard (Rayleigh tail)."""
    if c <= 0:
        raise ValueError("c > 0 required")
    return HazardFunction(
        "linear" if c == 1 else f"power c={c}",
        lambda v: np.power(np.maximum(v, 0.0), c),
        lambda u: np.power(np.maximum(u, 0.0), c + 1) / (c + 1),
        lambda e: np.power((c + 1) * e, 1.0 / (c + 1)),
    )


def log_power_hazard(c: float = 1.0) -> HazardFunction:
    """h(v) = log(v + 1)^c."""
    return HazardFunction(f"log-power c={c}", lambda v: np.power(np.log1p(np.maximum(v, 0.0)), c))


def mills_hazard() -> HazardFunction:
    """Hazard of the half-normal law, phi(v) / Phibar(v)."""

    def h(v):
        return np.exp(-0.5 * v * v - _LOG_SQRT_2PI - log_normal_sf(v))

    return HazardFunction("half-normal", h, lambda u: -(math.log(2.0) + log_normal_sf(u)))


@dataclass(frozen=True, eq=False)
class ContinuousLaw(JumpLaw):
    name: str
    log_tail_fn: Callable[[np.ndarray], np.ndarray]
    log_density_fn: Callable[[np.ndarray], np.ndarray]
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    lower: float = 0.0
    upper_bound: Optional[float] = None
    hazard: Optional[HazardFunction] = None
    u0: float = 0.0
    kind: LawKind = LawKind.CONTINUOUS_HAZARD
    params: dict = field(default_factory=dict)

    def log_tail(self, u: float) -> float:
        return float(self.log_tail_array(np.array([u]))[0])

    def log_tail_array(self, us) -> np.ndarray:
        return np.asarray(self.log_tail_fn(np.asarray(us, dtype=float)), dtype=float)

    def log_density(self, xs) -> np.ndarray:
        return np.asarray(self.log_density_fn(np.asarray(xs, dtype=float)), dtype=float)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sampler(rng, size)

    def lower_support(self) -> float:
        return self.lower


def half_normal_law() -> ContinuousLaw:
    log2 = math.log(2.0)

    def log_tail(u):
        return np.where(u <= 0, 0.0, log2 + log_normal_sf(np.maximum(u, 0.0)))

    def log_density(x):
        with np.errstate(divide="ignore"):
            return np.where(x < 0, LOG_ZERO, log2 - 0.5 * x * x - _LOG_SQRT_2PI)

    return ContinuousLaw(
        "half-normal",
        log_tail,
        log_density,
        lambda rng, n: np.abs(rng.standard_normal(n)),
        hazard=mills_hazard(),
    )


def exponential_law(rate: float = 1.0) -> ContinuousLaw:
    if rate <= 0:
        raise ValueError("rate must be positive")
    return ContinuousLaw(
        f"exponential rate={rate}",
        lambda u: np.where(u <= 0, 0.0, -rate * np.maximum(u, 0.0)),
        lambda x: np.where(x < 0, LOG_ZERO, math.log(rate) - rate * np.maximum(x, 0.0)),
        lambda rng, n: rng.exponential(1.0 / rate, n),
        hazard=constant_hazard(rate),
        params={"rate": rate},
    )


def uniform_law() -> ContinuousLaw:
    """Uniform on (0, 1)."""

    def log_tail(u):
        with np.errstate(divide="ignore"):
            return np.log(np.clip(1.0 - u, 0.0, 1.0))

    def log_density(x):
        return np.where((x >= 0) & (x < 1), 0.0, LOG_ZERO)

    return ContinuousLaw(
        "uniform",
        log_tail,
        log_density,
        lambda rng, n: rng.random(n),
        upper_bound=1.0,
        hazard=HazardFunction("uniform", lambda v: 1.0 / (1.0 - v)),
    )


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


class _CumulativeHazard:
    """H(u) = integral of h over (u0, u), by adaptive quadrature on a cached grid."""

    def __init__(self, h: HazardFunction, u0: float, cell: float = 0.5):
        self.h = h
        self.u0 = u0
        self.cell = cell
        self._nodes = [0.0]
        self._lock = threading.Lock()

    def _quad(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        val, _ = integrate.quad(lambda v: float(self.h(np.array(v))), a, b, epsabs=0.0, epsrel=1e-13, limit=200)
        return val

    def _node(self, j: int) -> float:
        with self._lock:
            while len(self._nodes) <= j:
                k = len(self._nodes)
                a = self.u0 + (k - 1) * self.cell
                self._nodes.append(self._nodes[-1] + self._quad(a, a + self.cell))
            return self._nodes[j]

    def __call__(self, u: float) -> float:
        if u <= self.u0:
            return 0.0
        j = int((u - self.u0) // self.cell)
        base = self._node(j)
        return base + self._quad(self.u0 + j * self.cell, u)

    def invert(self, e: np.ndarray) -> np.ndarray:
        """Solve H(x) = e for x, vectorised: bracket on nodes, then Newton."""
        e = np.asarray(e, dtype=float)
        top = float(e.max()) if e.size else 0.0
        j = 1
        while self._node(j) < top:
            j *= 2
        nodes = np.array([self._node(i) for i in range(j + 1)])
        cell = np.clip(np.searchsorted(nodes, e, side="right") - 1, 0, j - 1)
        left = self.u0 + cell * self.cell
        base = nodes[cell]
        slope = np.maximum(nodes[cell + 1] - base, 1e-300) / self.cell
        x = left + (e - base) / slope
        for _ in range(8):
            mid = 0.5 * (x + left)
            half = 0.5 * (x - left)
            pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
            integral = (self.h(pts) * _GL_WEIGHTS[None, :]).sum(axis=1) * half
            hx = np.maximum(self.h(x), 1e-300)
            x = np.clip(x - (base + integral - e) / hx, left, left + self.cell)
        return x


def hazard_law(h: HazardFunction, u0: float = 0.0, probe: Optional[Sequence[float]] = None) -> ContinuousLaw:
    """Law with P(X > u) = exp(-int_{u0}^u h) for u > u0 and tail 1 on [0, u0]."""
    if u0 < 0:
        raise ValueError("u0 must be >= 0")
    pts = np.asarray(probe if probe is not None else u0 + np.array([1e-6, 0.5, 1, 2, 5, 10, 50]), dtype=float)
    hv = h(pts)
    if np.any(~np.isfinite(hv)) or np.any(hv <= 0):
        raise ValueError(f"hazard {h.name} must be positive on (u0, inf)")
    cum = _CumulativeHazard(h, u0)

    def log_tail(us):
        us = np.atleast_1d(us)
        return np.array([-cum(float(u)) for u in us])

    def log_density(xs):
        xs = np.atleast_1d(xs)
        with np.errstate(divide="ignore"):
            return np.where(xs <= u0, LOG_ZERO, np.log(h(np.maximum(xs, u0 + 1e-300))) + log_tail(xs))

    def sampler(rng, n):
        e = rng.exponential(1.0, n)
        if h.inverse_cumulative is not None and u0 == 0:
            return np.asarray(h.inverse_cumulative(e), dtype=float)
        return cum.invert(e)

    return ContinuousLaw(
        f"hazard:{h.name}" + (f" u0={u0}" if u0 else ""),
        log_tail,
        log_density,
        sampler,
        lower=u0,
        hazard=h,
        u0=u0,
    )


# ---------------------------------------------------------------------------
# discretisation and Levy-measure conversion


def discretize(law: JumpLaw, a: float, eps: float = TRUNCATION_EPS) -> DiscreteLaw:
    """Lattice law of a * floor(X / a)."""
    if not a > 0:
        raise ValueError("step a must be positive")
    af = _as_fraction(a)
    if law.is_discrete:
        assert isinstance(law, DiscreteLaw)
        keys = np.array([math.floor(v / af) for v in law.exact_values()], dtype=object)
        keys, lms = segment_log_sum(keys, np.asarray(law.log_mass, dtype=float))
        return DiscreteLaw(
            name=f"discretize base={law.name} step={a}",
            kind=LawKind.LATTICE,
            step=af,
            index=_index_array(list(keys)),
            log_mass=lms,
            upper_bound=None if law.upper_bound is None else float(math.floor(_as_fraction(law.upper_bound) / af) * af),
            truncation_mass=law.truncation_mass,
        )

    af_float = float(af)
    log_eps = math.log(eps)
    n0 = math.floor(law.lower_support() / af_float)

    def tail_at(n: int) -> float:
        return law.log_tail(n * af_float)

    def series(n: int):
        hi, lo = tail_at(n), tail_at(n + 1)
        return n, float(log_diff_arrays(np.array(hi), np.array(lo)))

    def tail_fn(u: float) -> float:
        return law.log_tail((math.floor(u / af_float) + 1) * af_float)

    def tail_array_fn(us: np.ndarray) -> np.ndarray:
        # floor on the float grid; exact Fraction flooring happens in the scalar path
        return law.log_tail_array((np.floor(us / af_float + 1e-12) + 1) * af_float)

    def series_block(lo: int, hi: int):
        ns = np.arange(lo, hi + 1)
        lt = law.log_tail_array(ns * af_float)
        return ns[:-1], log_diff_arrays(lt[:-1], lt[1:])

    # tabulate the tail once on the grid, then difference
    idx, grid = [], []
    n = n0
    block = 256
    while True:
        ns = np.arange(n, n + block + 1)
        lt = law.log_tail_array(ns * af_float)
        grid.append(lt[:-1])
        idx.extend(range(n, n + block))
        if lt[-1] < log_eps or np.isneginf(lt[-1]):
            grid.append(lt[-1:])
            break
        n += block
    lt_all = np.concatenate(grid)
    lm = log_diff_arrays(lt_all[:-1], lt_all[1:])
    idx = np.asarray(idx)
    keep = ~np.isneginf(lm)
    last_kept = np.flatnonzero(keep)
    cut = last_kept[-1] + 1
    # stop at the first grid value whose tail is below eps
    below = np.flatnonzero(lt_all[1:] < log_eps)
    if below.size:
        cut = min(cut, below[0] + 1)
    keep[cut:] = False
    idx, lm = idx[keep], lm[keep]
    dropped = float(np.exp(lt_all[cut])) if cut < len(lt_all) else 0.0
    bounded = law.upper_bound is not None
    return DiscreteLaw(
        name=f"discretize base={law.name} step={a}",
        kind=LawKind.LATTICE,
        step=af,
        index=_index_array(list(int(i) for i in idx)),
        log_mass=lm,
        upper_bound=float(idx[-1] * af_float) if bounded else None,
        truncation_mass=0.0 if bounded else dropped,
        tail_fn=None if bounded else tail_fn,
        series=None if bounded else series,
        series_start=n0,
        params={"base": law.name, "step": a},
        series_block=None if bounded else series_block,
        tail_array_fn=None if bounded else tail_array_fn,
    )


@dataclass(frozen=True, eq=False)
class TailLaw(JumpLaw):
    """Law known only through its tail function (conditional Levy-measure law)."""

    name: str
    log_tail_fn: Callable[[float], float]
    lower: float
    kind: LawKind = LawKind.TAIL_ONLY
    upper_bound: Optional[float] = None

    def log_tail(self, u: float) -> float:
        return float(self.log_tail_fn(float(u)))

    def lower_support(self) -> float:
        return self.lower

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Inverse-tail sampling by vectorised bisection."""
        target = np.log(rng.random(size))
        lo = np.full(size, self.lower)
        width = 1.0
        while self.log_tail(self.lower + width) > float(target.min()) and width < 1e12:
            width *= 2
        hi = np.full(size, self.lower + width)
        tail = np.vectorize(self.log_tail)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            above = tail(mid) > target
            lo = np.where(above, mid, lo)
            hi = np.where(above, hi, mid)
        return hi


def from_levy_measure(
    rho_tail: Callable[[float], float], rho_neg_mass: float, a: float
) -> tuple[float, TailLaw]:
    """Positive-jump intensity rho((a, inf)) and the law of jumps beyond a.

    The returned law has tail rho((max(x, a), inf)) / rho((a, inf)).
    """
    if not a > 0:
        raise ValueError("a must be positive")
    if not (0 <= rho_neg_mass < math.inf):
        raise ValueError("rho((-inf, 0)) must be finite")
    lam_plus = float(rho_tail(a))
    if not lam_plus > 0:
        raise ValueError("rho((a, inf)) must be positive")
    log_lam = math.log(lam_plus)

    def log_tail(x: float) -> float:
        r = float(rho_tail(max(x, a)))
        return LOG_ZERO if r <= 0 else math.log(r) - log_lam

    return lam_plus, TailLaw(f"levy-measure a={a}", log_tail, lower=a)


# ---------------------------------------------------------------------------
# tail classification


@dataclass(frozen=True)
class ProbeConfig:
    u_max: Optional[float] = None
    n_points: int = 20
    a_probe: float = 1.0


@dataclass(frozen=True)
class TailClass:
    light1: bool
    light2: bool
    cond_pl: bool
    heavy: bool
    lattice_cond: Optional[bool]
    inconclusive: frozenset = frozenset()
    evidence: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "light1": self.light1,
            "light2": self.light2,
            "cond_pl": self.cond_pl,
            "heavy": self.heavy,
            "lattice_cond": self.lattice_cond,
            "inconclusive": sorted(self.inconclusive),
            "evidence": self.evidence,
        }


def _monotone(trace: Sequence[float], rel: float = 1e-9) -> tuple[bool, bool]:
    """(non-increasing, non-decreasing) with a relative slack."""
    t = np.asarray(trace, dtype=float)
    d = np.diff(t)
    slack = rel * np.maximum(np.abs(t[1:]), np.abs(t[:-1]))
    return bool(np.all(d <= slack)), bool(np.all(d >= -slack))


def log_two_fold_tail(law: JumpLaw, u: float) -> float:
    """log P(X1 + X2 > u) for independent copies."""
    if isinstance(law, DiscreteLaw):
        lower = law.lower_support()
        if law.series is not None and lower >= 0:
            idx, lm = law.masses_up_to(u)
            rest = law.log_tail(u)
            if not idx:
                return rest
            vals = np.array([float(i * law.step) for i in idx])
            tails = law.log_tail_array(u - vals)
            return log_sum_exp(np.append(lm + tails, rest))
        vals = law.values
        return log_sum_exp(law.log_mass + law.log_tail_array(u - vals))
    if isinstance(law, ContinuousLaw):
        lo = law.lower
        hi = u - lo
        rest = law.log_tail(hi)
        if hi <= lo:
            return rest
        xs = np.linspace(lo, hi, 801)
        g = law.log_density(xs) + law.log_tail_array(u - xs)
        gmax = float(np.max(g))
        if not np.isfinite(gmax):
            return rest
        x_star = float(xs[int(np.argmax(g))])

        def integrand(x):
            return math.exp(float(law.log_density(np.array([x]))[0] + law.log_tail(u - x)) - gmax)

        val, _ = integrate.quad(integrand, lo, hi, points=[x_star], limit=400, epsabs=0.0, epsrel=1e-10)
        if val <= 0:
            return rest
        return float(np.logaddexp(rest, gmax + math.log(val)))
    raise TypeError(f"cannot convolve {type(law).__name__}")


def _default_u_max(law: JumpLaw) -> float:
    if law.upper_bound is not None:
        return 2.0 * max(law.upper_bound, 1.0)
    return 200.0


def classify_tail(law: JumpLaw, probe: ProbeConfig = ProbeConfig()) -> TailClass:
    """Numerical verdicts on the light/heavy tail conditions.

    A flag for a zero limit is set when the ratio at the last probe is below
    0.01 and the trace is non-increasing over the final five probes; the
    heavy flag needs the last ratio above 0.99. A trace that is neither
    non-increasing nor non-decreasing over the last five probes marks the flag
    inconclusive.
    """
    u_max = probe.u_max if probe.u_max is not None else _default_u_max(law)
    us = np.linspace(u_max / probe.n_points, u_max, probe.n_points)
    a = probe.a_probe
    inconclusive = set()
    evidence: dict = {}

    lt = np.array([law.log_tail(float(u)) for u in us])
    lt_shift = np.array([law.log_tail(float(u + a)) for u in us])
    positive = bool(np.all(np.isfinite(lt)))

    # light2: bounded above with mass at positive levels
    bounded = law.upper_bound is not None
    alpha = 0.5 * law.upper_bound if bounded and law.upper_bound > 0 else None
    light2 = bool(bounded and law.log_tail(0.0) > LOG_ZERO)
    evidence["light2"] = {"upper_bound": law.upper_bound, "alpha": alpha, "log_tail_at_0": law.log_tail(0.0)}

    if positive:
        with np.errstate(invalid="ignore"):
            pl_trace = np.exp(lt_shift - lt)
        l1_trace = np.array([math.exp(lt[i] - log_two_fold_tail(law, float(u))) for i, u in enumerate(us)])
    else:
        pl_trace = np.full(len(us), np.nan)
        l1_trace = np.full(len(us), np.nan)
    evidence["cond_pl"] = {"u": us.tolist(), "a": a, "ratio": pl_trace.tolist()}
    evidence["light1"] = {"u": us.tolist(), "ratio": l1_trace.tolist()}

    def zero_limit(name: str, trace: np.ndarray, thr: float = 0.01) -> bool:
        if not positive:
            return False
        dec, inc = _monotone(trace[-5:])
        if not (dec or inc):
            inconclusive.add(name)
            return False
        return bool(trace[-1] < thr and dec)

    light1 = zero_limit("light1", l1_trace)
    cond_pl = zero_limit("cond_pl", pl_trace)
    heavy = False
    if positive:
        dec, inc = _monotone(pl_trace[-5:])
        if not (dec or inc):
            inconclusive.add("heavy")
        else:
            heavy = bool(pl_trace[-1] > 0.99)
    if cond_pl and not light1:
        # cond_pl implies light1 through P(X1+X2>u) >= P(X1>u-a) P(X2>a)
        light1 = True
        inconclusive.discard("light1")
        evidence["light1"]["implied_by"] = "cond_pl"

    lattice_cond = None
    if law.kind is LawKind.LATTICE:
        lattice_cond = check_lattice_cond(law).holds
    return TailClass(light1, light2, cond_pl, heavy, lattice_cond, frozenset(inconclusive), evidence)


@dataclass(frozen=True)
class CondHResult:
    holds: bool
    worst_margin: float
    at: float
    from_v: Optional[float]
    margins: list


def check_cond_h(h: Callable, b: float, v_grid: Sequence[float]) -> CondHResult:
    """Check h(v + b) <= exp(b h(v) / 8) on a grid, in log form.

    Only points past the first one with h(v) >= 1 count. The growth condition
    is asymptotic, so it is accepted when it holds on an unbroken terminal run
    of the grid that covers at least half of the counted points; ``from_v`` is
    where that run starts.
    """
    if not b > 0:
        raise ValueError("b must be positive")
    v = np.asarray(v_grid, dtype=float)
    if np.any(np.diff(v) <= 0):
        raise ValueError("v_grid must be increasing")
    hv = np.asarray(h(v), dtype=float)
    hvb = np.asarray(h(v + b), dtype=float)
    with np.errstate(divide="ignore"):
        margin = np.log(hvb) - b * hv / 8.0
    start = np.flatnonzero(hv >= 1.0)
    if start.size == 0:
        return CondHResult(False, float(np.max(margin)), float(v[int(np.argmax(margin))]), None, margin.tolist())
    s = int(start[0])
    m = margin[s:]
    worst = int(np.argmax(m))
    ok = m <= 0
    bad = np.flatnonzero(~ok)
    run_start = 0 if bad.size == 0 else int(bad[-1]) + 1
    run = len(m) - run_start
    holds = run > 0 and run * 2 >= len(m)
    return CondHResult(
        bool(holds),
        float(m[worst]),
        float(v[s + worst]),
        float(v[s + run_start]) if run > 0 else None,
        margin.tolist(),
    )


@dataclass(frozen=True)
class LatticeCondResult:
    holds: bool
    trace: list
    step: float


def check_lattice_cond(law: JumpLaw, n_max: int = 200) -> LatticeCondResult:
    """P(X > na) > 0 for n <= n_max and P(X > (n+1)a)/P(X > na) falling below 0.01."""
    if not isinstance(law, DiscreteLaw) or law.kind is not LawKind.LATTICE:
        raise ValueError("check_lattice_cond needs a lattice law")
    a = float(law.lattice_step)
    lt = np.array([law.log_tail(n * a) for n in range(1, n_max + 2)])
    if not np.all(np.isfinite(lt[:-1])):
        return LatticeCondResult(False, [], a)
    with np.errstate(invalid="ignore"):
        trace = np.exp(lt[1:] - lt[:-1])
    dec, _ = _monotone(trace[-5:])
    holds = bool(np.isfinite(lt[-1]) and dec and trace[-1] < 0.01)
    return LatticeCondResult(holds, trace.tolist(), a)
