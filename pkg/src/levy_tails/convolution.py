"""Convolution powers of discrete laws, kept exactly on an integer grid.

Fold k holds the law of S_k = X_1 + ... + X_k as sorted integer indices
(multiples of the base step) with log masses. Small masses may be pruned;
every pruned or truncated weight is accumulated in a per-fold bound so that
downstream tail probabilities come with a certified bracket.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .jump_laws import DiscreteLaw
from .logspace import LOG_ZERO, log_add, log_sum_exp, segment_log_sum

DEFAULT_PRUNE_EPS = 1e-20
DEFAULT_SUPPORT_CAP = 10_000_000
_INT64_SAFE = 2**62
_DENSE_SPAN_LIMIT = 4_000_000


class SupportCapExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Fold:
    index: np.ndarray
    log_mass: np.ndarray
    log_missing: float  # bound on the mass absent from this fold

    def __len__(self) -> int:
        return len(self.index)


_LIMB = 1 << 62


def is_wide(index: np.ndarray) -> bool:
    """Wide indices are (n, 2) int64 arrays of limbs: value = hi * 2**62 + lo."""
    return index.ndim == 2


def split_limbs(index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if is_wide(index):
        return index[:, 0], index[:, 1]
    if index.dtype == object:
        ints = [int(i) for i in index]
        return (np.array([i >> 62 for i in ints], dtype=np.int64),
                np.array([i & (_LIMB - 1) for i in ints], dtype=np.int64))
    return index >> 62, index & (_LIMB - 1)


def join_limbs(hi: np.ndarray, lo: np.ndarray) -> np.ndarray:
    """int64 when every value fits, else the wide (n, 2) layout."""
    if len(hi) == 0 or (hi.min() >= -1 and hi.max() <= 0):
        return hi * _LIMB + lo
    return np.stack([hi, lo], axis=1)


def to_python_ints(index: np.ndarray) -> list[int]:
    if is_wide(index):
        return [int(h) * _LIMB + int(l) for h, l in index]
    return [int(i) for i in index]


def count_le(index: np.ndarray, thr: int) -> int:
    """Number of sorted indices <= thr."""
    if not is_wide(index):
        if thr >= _INT64_SAFE:
            return len(index)
        if thr <= -_INT64_SAFE:
            return 0
        return int(np.searchsorted(index, thr, side="right"))
    hi, lo = index[:, 0], index[:, 1]
    t_hi, t_lo = thr >> 62, thr & (_LIMB - 1)
    a = int(np.searchsorted(hi, t_hi, side="left"))
    b = int(np.searchsorted(hi, t_hi, side="right"))
    return a + int(np.searchsorted(lo[a:b], t_lo, side="right"))


def index_to_float(index: np.ndarray, step) -> np.ndarray:
    if is_wide(index):
        vals = index[:, 0].astype(float) * float(_LIMB) + index[:, 1].astype(float)
    else:
        vals = index.astype(float)
    return vals * float(step)


def _needs_wide(a: np.ndarray, b: np.ndarray) -> bool:
    if is_wide(a) or is_wide(b) or a.dtype == object or b.dtype == object:
        return True
    if len(a) == 0 or len(b) == 0:
        return False
    return max(abs(int(a.max())) + abs(int(b.max())), abs(int(a.min())) + abs(int(b.min()))) >= _INT64_SAFE


def _group(hi, lo, vals):
    n = len(vals)
    change = np.empty(n, dtype=bool)
    change[0] = True
    change[1:] = (hi[1:] != hi[:-1]) | (lo[1:] != lo[:-1])
    starts = np.flatnonzero(change)
    _, sums = segment_log_sum(np.cumsum(change), vals)
    return hi[starts], lo[starts], sums


def _sparse_convolve(ia, la, ib, lb, cap: int):
    n = len(ia) * len(ib)
    if n > cap * 8:
        raise SupportCapExceeded(f"pairwise sum of {len(ia)} x {len(ib)} points exceeds the cap")
    vals = (la[:, None] + lb[None, :]).ravel()
    if not _needs_wide(ia, ib):
        keys = (ia[:, None] + ib[None, :]).ravel()
        order = np.argsort(keys, kind="stable")
        return segment_log_sum(keys[order], vals[order])
    ha, lo_a = split_limbs(ia)
    hb, lo_b = split_limbs(ib)
    hi = (ha[:, None] + hb[None, :]).ravel()
    lo = (lo_a[:, None] + lo_b[None, :]).ravel()
    carry = lo >= _LIMB
    lo = lo - carry * _LIMB
    hi = hi + carry
    order = np.lexsort((lo, hi))
    hi, lo, sums = _group(hi[order], lo[order], vals[order])
    return join_limbs(hi, lo), sums


def _dense_convolve(ia, la, ib, lb):
    """Direct (not FFT) convolution in linear space with max-scaling.

    All products are nonnegative so relative accuracy is kept; the only loss
    is underflow below ~1e-308 of the largest mass, reported as missing mass.
    """
    lo_a, lo_b = int(ia[0]), int(ib[0])
    da = np.zeros(int(ia[-1]) - lo_a + 1)
    db = np.zeros(int(ib[-1]) - lo_b + 1)
    ma, mb = float(la.max()), float(lb.max())
    da[ia - lo_a] = np.exp(la - ma)
    db[ib - lo_b] = np.exp(lb - mb)
    out = np.convolve(da, db)
    nz = np.flatnonzero(out > 0)
    with np.errstate(divide="ignore"):
        lm = np.log(out[nz]) + ma + mb
    # entries that underflowed in either input are bounded by 1e-308 * max each
    underflow = math.log(len(da) + len(db)) + ma + mb - 708.0
    return nz.astype(np.int64) + lo_a + lo_b, lm, underflow


def _prune(index: np.ndarray, log_mass: np.ndarray, eps: float):
    """Drop the smallest masses while their cumulative weight stays <= eps."""
    if eps <= 0 or len(index) <= 1:
        finite = ~np.isneginf(log_mass)
        return index[finite], log_mass[finite], LOG_ZERO
    order = np.argsort(log_mass, kind="stable")
    w = np.exp(log_mass[order])
    cum = np.cumsum(w)
    n_drop = int(np.searchsorted(cum, eps, side="right"))
    n_drop = min(n_drop, len(index) - 1)
    if n_drop == 0:
        return index, log_mass, LOG_ZERO
    dropped = log_sum_exp(log_mass[order[:n_drop]])
    keep = np.sort(order[n_drop:])
    return index[keep], log_mass[keep], dropped


class ConvolutionTable:
    """Lazily extended table of S_0, S_1, ..., S_K for a discrete base law.

    Extension is guarded by a lock so tables can be shared across threads.
    """

    def __init__(
        self,
        law: DiscreteLaw,
        K: int = 1,
        prune_eps: float = DEFAULT_PRUNE_EPS,
        cap: int = DEFAULT_SUPPORT_CAP,
    ):
        if not isinstance(law, DiscreteLaw):
            raise TypeError("convolution tables need a discrete law")
        if K < 0:
            raise ValueError("K must be >= 0")
        if prune_eps > 1e-20:
            raise ValueError("prune_eps must be <= 1e-20")
        self.law = law
        self.prune_eps = prune_eps
        self.cap = cap
        self.step = law.step
        self._base_index = join_limbs(*split_limbs(np.asarray(law.index)))
        self._base_mass = np.asarray(law.log_mass, dtype=float)
        self._log_trunc = math.log(law.truncation_mass) if law.truncation_mass > 0 else LOG_ZERO
        self._folds = [Fold(np.zeros(1, dtype=np.int64), np.zeros(1), LOG_ZERO)]
        self._values: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()
        self.ensure(K)

    @property
    def K(self) -> int:
        return len(self._folds) - 1

    def ensure(self, K: int) -> "ConvolutionTable":
        if K <= self.K:
            return self
        with self._lock:
            while self.K < K:
                self._folds.append(self._next_fold(self._folds[-1]))
        return self

    def _next_fold(self, prev: Fold) -> Fold:
        ia, la = prev.index, prev.log_mass
        ib, lb = self._base_index, self._base_mass
        underflow = LOG_ZERO
        dense_ok = (
            not is_wide(ia)
            and not is_wide(ib)
            and (int(ia[-1]) - int(ia[0]) + 1) <= _DENSE_SPAN_LIMIT
            and (int(ib[-1]) - int(ib[0]) + 1) <= _DENSE_SPAN_LIMIT
            and (int(ia[-1]) - int(ia[0]) + 1) <= 4 * len(ia) + 64
            and (int(ib[-1]) - int(ib[0]) + 1) <= 4 * len(ib) + 64
        )
        if dense_ok:
            keys, lms, underflow = _dense_convolve(ia, la, ib, lb)
        else:
            keys, lms = _sparse_convolve(ia, la, ib, lb, self.cap)
        keys, lms, pruned = _prune(keys, lms, self.prune_eps)
        if len(keys) > self.cap:
            raise SupportCapExceeded(f"fold {self.K + 1} has {len(keys)} support points (cap {self.cap})")
        missing = log_add(log_add(prev.log_missing, self._log_trunc), log_add(pruned, underflow))
        return Fold(keys, np.asarray(lms, dtype=float), missing)

    def fold(self, k: int) -> Fold:
        self.ensure(k)
        return self._folds[k]

    def values(self, k: int) -> np.ndarray:
        vals = self._values.get(k)
        if vals is None:
            vals = index_to_float(self.fold(k).index, self.step)
            self._values[k] = vals
        return vals

    def log_missing(self, k: int) -> float:
        return self.fold(k).log_missing

    def threshold_index(self, u: float) -> int:
        """Largest index i with i * step <= u."""
        from .jump_laws import _floor_div

        return _floor_div(u, self.step)


def convolution_table(law: DiscreteLaw, K: int, prune_eps: float = DEFAULT_PRUNE_EPS, cap: int = DEFAULT_SUPPORT_CAP):
    return ConvolutionTable(law, K, prune_eps, cap)


def sk_tail(table: ConvolutionTable, k: int, u: float) -> float:
    """log P(S_k > u) from the table (a lower bound; add log_missing for an upper one)."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return 0.0 if u < 0 else LOG_ZERO
    f = table.fold(k)
    if u == math.inf:
        return LOG_ZERO
    if u == -math.inf:
        return log_sum_exp(f.log_mass)
    pos = count_le(f.index, table.threshold_index(u))
    return min(0.0, log_sum_exp(f.log_mass[pos:]))


def barrier_tails(law: DiscreteLaw, n_max: int, u: float, cap: int = DEFAULT_SUPPORT_CAP) -> list[float]:
    """log P(max_{k<n} S_k <= u, S_n > u) for n = 1..n_max, without pruning."""
    from .jump_laws import _floor_div

    thr = _floor_div(u, law.step)
    ib = join_limbs(*split_limbs(np.asarray(law.index)))
    lb = np.asarray(law.log_mass, dtype=float)
    out = []
    below_idx, below_lm = np.zeros(1, dtype=np.int64), np.zeros(1)
    for _ in range(n_max):
        if len(below_idx) == 0:
            out.append(LOG_ZERO)
            continue
        keys, lms = _sparse_convolve(below_idx, below_lm, ib, lb, cap)
        n_below = count_le(keys, thr)
        out.append(log_sum_exp(lms[n_below:]))
        below_idx, below_lm = keys[:n_below], lms[:n_below]
        finite = ~np.isneginf(below_lm)
        below_idx, below_lm = below_idx[finite], below_lm[finite]
        if len(below_idx) > cap:
            raise SupportCapExceeded("barrier-restricted support exceeds the cap")
    return out


def barrier_tail(law: DiscreteLaw, n: int, u: float) -> float:
    """log P(max_{1<=k<=n-1} S_k <= u, S_n > u)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return barrier_tails(law, n, u)[-1]
