"""Exact-in-distribution simulation of X(t) = sigma B(t) + Z(t) - b t on [0, 1].

Paths are simulated in fixed-size chunks. Between jumps the path is a
Brownian motion with drift, so conditionally on the interval endpoints its
maximum is a Brownian-bridge maximum (the drift cancels) and can be drawn by
inverting P(M > m) = exp(-2 (m - a)(m - c) / (sigma^2 t)). No time grid is
involved.

Chunk i always draws from Philox(SeedSequence(seed, spawn_key=(i,))), so the
counts do not depend on how chunks are spread over workers.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .exact_engine import DEFAULT_TOL, LevyModel, TailValue, gaussian_smoothed_tail, model_tail
from .convolution import ConvolutionTable
from .jump_laws import DiscreteLaw, JumpLaw
from .logspace import log_normal_sf, log_sum_exp

CHUNK = 65_536
Z95 = 1.96
LOW_CONFIDENCE_HITS = 100

EVENTS = ("endpoint", "supremum", "penultimate_excess", "supB_plus_supZ", "sym_pair")


def bridge_max_inverse(a, c, t, sigma, p):
    """Maximum of a Brownian bridge from a to c over duration t, by inversion.

    ``p`` in (0, 1] is the survival level: the result m solves
    exp(-2 (m - a)(m - c) / (sigma^2 t)) = p, so m >= max(a, c).
    """
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    disc = (a - c) ** 2 - 2.0 * sigma * sigma * np.asarray(t, dtype=float) * np.log(p)
    m = 0.5 * (a + c + np.sqrt(disc))
    # guards the p -> 1 end against rounding below the endpoints
    m = np.maximum(m, np.maximum(a, c))
    return m if m.ndim else float(m)


@dataclass(frozen=True)
class PathBatch:
    """Summary fields of a batch of paths (one entry per path)."""

    tau: np.ndarray
    endpoint: np.ndarray
    supremum: np.ndarray
    penultimate: np.ndarray  # X(Gamma_{tau-1}) with Gamma_0 = 0; nan when tau = 0
    sup_b: np.ndarray
    sup_z: np.ndarray
    sigma_b1: np.ndarray
    post_jump_max: np.ndarray  # max_k X(Gamma_k), -inf when tau = 0


@dataclass(frozen=True)
class PathSample:
    jump_count: int
    jump_epochs: np.ndarray
    jump_sizes: np.ndarray
    brownian_values: np.ndarray  # B at 0, Gamma_1, ..., Gamma_tau, 1
    endpoint: float
    supremum: float
    penultimate: Optional[float]


def assemble_paths(
    sigma: float,
    b: float,
    epochs: np.ndarray,
    sizes: np.ndarray,
    normals: np.ndarray,
    bridge_p: np.ndarray,
    bridge_p_b: np.ndarray,
    tau: np.ndarray,
) -> PathBatch:
    """Assemble path summaries from padded per-path arrays.

    ``epochs`` (n, T) holds sorted jump times with unused slots set to 1;
    ``sizes`` (n, T) the jump sizes (unused slots are zeroed here);
    ``normals`` and ``bridge_p`` are (n, T + 1), one per inter-jump interval;
    ``bridge_p_b`` (n,) drives the maximum of sigma B alone.
    """
    n, T = sizes.shape
    slot = np.arange(T)[None, :]
    valid = slot < tau[:, None]
    sizes = np.where(valid, sizes, 0.0)
    times = np.concatenate([np.zeros((n, 1)), np.where(valid, epochs, 1.0), np.ones((n, 1))], axis=1)
    dt = np.diff(times, axis=1)  # (n, T + 1)
    dB = np.sqrt(dt) * normals
    inc = sigma * dB - b * dt
    jumps_before = np.concatenate([np.zeros((n, 1)), sizes], axis=1)  # jump at the start of interval j
    # start value of interval j is X(t_j) after the jump at t_j
    start = np.cumsum(jumps_before + np.concatenate([np.zeros((n, 1)), inc[:, :-1]], axis=1), axis=1)
    end = start + inc
    if sigma > 0:
        interval_max = bridge_max_inverse(start, end, dt, sigma, bridge_p)
    else:
        interval_max = np.maximum(start, end)
    supremum = np.maximum(interval_max.max(axis=1), 0.0)
    endpoint = end[:, -1]
    rows = np.arange(n)
    pen_idx = np.maximum(tau - 1, 0)
    penultimate = np.where(tau >= 1, start[rows, pen_idx], np.nan)
    post = np.where(valid, start[:, 1:], -np.inf)
    post_jump_max = post.max(axis=1) if T else np.full(n, -np.inf)

    # Brownian part alone and the jump part alone
    b_end = sigma * dB.sum(axis=1)
    sup_b = bridge_max_inverse(np.zeros(n), b_end, np.ones(n), sigma, bridge_p_b) if sigma > 0 else np.zeros(n)
    z_inc = -b * dt
    z_start = np.cumsum(jumps_before + np.concatenate([np.zeros((n, 1)), z_inc[:, :-1]], axis=1), axis=1)
    z_end = z_start + z_inc
    sup_z = np.maximum(np.maximum(z_start, z_end).max(axis=1), 0.0)
    return PathBatch(tau, endpoint, supremum, penultimate, sup_b, sup_z, b_end, post_jump_max)


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def simulate_batch(model: LevyModel, rng: np.random.Generator, n: int) -> PathBatch:
    tau = rng.poisson(model.lam, n)
    T = int(tau.max()) if n else 0
    epochs = np.sort(np.where(np.arange(T)[None, :] < tau[:, None], rng.random((n, T)), 1.0), axis=1)
    sizes = model.jumps.sample(rng, n * T).reshape(n, T) if T else np.zeros((n, 0))
    normals = rng.standard_normal((n, T + 1))
    bridge_p = 1.0 - rng.random((n, T + 1))
    bridge_p_b = 1.0 - rng.random(n)
    return assemble_paths(model.sigma, model.drift_b, epochs, sizes, normals, bridge_p, bridge_p_b, tau)


def sample_path(model: LevyModel, rng: np.random.Generator) -> PathSample:
    """One path with its jump data and exact supremum."""
    tau = int(rng.poisson(model.lam))
    epochs = np.sort(rng.random(tau))
    sizes = model.jumps.sample(rng, tau) if tau else np.zeros(0)
    normals = rng.standard_normal(tau + 1)
    bridge_p = 1.0 - rng.random(tau + 1)
    batch = assemble_paths(
        model.sigma,
        model.drift_b,
        epochs[None, :],
        sizes[None, :],
        normals[None, :],
        bridge_p[None, :],
        np.array([1.0 - rng.random()]),
        np.array([tau]),
    )
    times = np.concatenate([[0.0], epochs, [1.0]])
    bvals = np.concatenate([[0.0], np.cumsum(np.sqrt(np.diff(times)) * normals)])
    pen = None if tau == 0 else float(batch.penultimate[0])
    return PathSample(tau, epochs, sizes, bvals, float(batch.endpoint[0]), float(batch.supremum[0]), pen)


def _event_values(batch: PathBatch, event: str) -> np.ndarray:
    """Scalar per path whose exceedance of u is the event (except penultimate)."""
    if event == "endpoint":
        return batch.endpoint
    if event == "supremum":
        return batch.supremum
    if event == "supB_plus_supZ":
        return batch.sup_b + batch.sup_z
    if event == "sym_pair":
        return batch.endpoint - batch.sigma_b1 + np.abs(batch.sigma_b1)
    raise ValueError(f"unknown event {event!r}")


def _count_above(sorted_vals: np.ndarray, us: np.ndarray) -> np.ndarray:
    return len(sorted_vals) - np.searchsorted(sorted_vals, us, side="right")


def _chunk_counts(model: LevyModel, seed: int, chunk: int, n: int, us: np.ndarray, events: Sequence[str]):
    batch = simulate_batch(model, chunk_rng(seed, chunk), n)
    end_sorted = np.sort(batch.endpoint)
    hits, joint = {}, {}
    for ev in events:
        if ev == "penultimate_excess":
            pen = np.where(np.isnan(batch.penultimate), -np.inf, batch.penultimate)
            both = np.sort(np.minimum(pen, batch.endpoint))
            hits[ev] = _count_above(np.sort(pen), us) - _count_above(both, us)
            joint[ev] = np.zeros(len(us), dtype=np.int64)  # disjoint from the endpoint event
            continue
        vals = _event_values(batch, ev)
        hits[ev] = _count_above(np.sort(vals), us)
        joint[ev] = _count_above(np.sort(np.minimum(vals, batch.endpoint)), us)
    hits["endpoint"] = _count_above(end_sorted, us)
    return hits, joint


@dataclass(frozen=True)
class MCEstimate:
    event: str
    u: float
    hits: int
    trials: int
    seed: int
    wall_time: float = 0.0

    @property
    def p_hat(self) -> float:
        return self.hits / self.trials

    @property
    def stderr(self) -> float:
        p = self.p_hat
        return math.sqrt(p * (1.0 - p) / self.trials)

    def as_dict(self) -> dict:
        return {
            "event": self.event,
            "u": self.u,
            "hits": self.hits,
            "trials": self.trials,
            "p_hat": self.p_hat,
            "stderr": self.stderr,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class EventCounts:
    """Merged counts over all chunks for a grid of thresholds."""

    us: np.ndarray
    trials: int
    seed: int
    hits: dict
    joint_with_endpoint: dict
    wall_time: float

    def estimate(self, event: str, i: int) -> MCEstimate:
        return MCEstimate(event, float(self.us[i]), int(self.hits[event][i]), self.trials, self.seed, self.wall_time)


def count_events(
    model: LevyModel,
    us: Sequence[float],
    events: Iterable[str],
    trials: int,
    seed: int,
    workers: int = 1,
) -> EventCounts:
    """Count every requested event on common paths for each threshold."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    events = [e for e in dict.fromkeys(events) if e != "endpoint"]
    for e in events:
        if e not in EVENTS:
            raise ValueError(f"unknown event {e!r}")
    us = np.asarray(us, dtype=float)
    sizes = [CHUNK] * (trials // CHUNK) + ([trials % CHUNK] if trials % CHUNK else [])
    t0 = time.perf_counter()

    def work(i):
        return _chunk_counts(model, seed, i, sizes[i], us, events)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(work, range(len(sizes))))
    else:
        parts = [work(i) for i in range(len(sizes))]
    names = ["endpoint", *events]
    hits = {e: np.sum([p[0][e] for p in parts], axis=0).astype(np.int64) for e in names}
    joint = {e: np.sum([p[1][e] for p in parts], axis=0).astype(np.int64) for e in events}
    return EventCounts(us, trials, seed, hits, joint, time.perf_counter() - t0)


def estimate_events(
    model: LevyModel, u: float, events: Iterable[str], trials: int, seed: int, workers: int = 1
) -> list[MCEstimate]:
    events = list(dict.fromkeys(events))
    counts = count_events(model, [u], events, trials, seed, workers)
    return [counts.estimate(e, 0) for e in events]


# ---------------------------------------------------------------------------
# ratio curves


@dataclass(frozen=True)
class RatioRow:
    u: float
    numerator: float
    numerator_err: float
    denominator: float
    denominator_err: float
    ratio: float
    ratio_lo: float
    ratio_hi: float
    method: str
    numerator_hits: int
    low_confidence: bool

    @property
    def ci(self) -> float:
        return 0.5 * (self.ratio_hi - self.ratio_lo)

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class TailRatioCurve:
    rows: list
    trials: int
    seed: int
    numerator_event: str
    certificates: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def ratios(self) -> np.ndarray:
        return np.array([r.ratio for r in self.rows])

    @property
    def cis(self) -> np.ndarray:
        return np.array([r.ci for r in self.rows])


def paired_ratio(n1: int, n2: int, n12: int, trials: int) -> tuple[float, float]:
    """Ratio p1/p2 of two events on common paths and its delta-method CI half-width."""
    if n2 == 0:
        return math.nan, math.inf
    p1, p2, p12 = n1 / trials, n2 / trials, n12 / trials
    r = p1 / p2
    var = (p1 * (1 - p1) / p1**2 if p1 > 0 else 0.0) + (1 - p2) / p2 - 2 * (p12 - p1 * p2) / (p1 * p2 if p1 > 0 else 1)
    var = r * r * max(var, 0.0) / trials
    return r, Z95 * math.sqrt(var)


def _row_paired(u, n1, n2, n12, trials, label) -> RatioRow:
    r, half = paired_ratio(n1, n2, n12, trials)
    p1, p2 = n1 / trials, n2 / trials
    return RatioRow(
        u,
        p1,
        math.sqrt(p1 * (1 - p1) / trials),
        p2,
        math.sqrt(p2 * (1 - p2) / trials),
        r,
        r - half,
        r + half,
        label,
        int(n1),
        bool(n1 < LOW_CONFIDENCE_HITS),
    )


def _row_exact(u, n1, trials, exact: TailValue, label) -> RatioRow:
    p1 = n1 / trials
    se = math.sqrt(p1 * (1 - p1) / trials)
    den = exact.point
    if den <= 0:
        return RatioRow(u, p1, se, den, 0.0, math.nan, -math.inf, math.inf, label, int(n1), True)
    r = p1 / den
    lo = (p1 - Z95 * se) / exact.hi
    hi = (p1 + Z95 * se) / exact.lo if exact.lo > 0 else math.inf
    return RatioRow(
        u, p1, se, den, 0.5 * (exact.hi - exact.lo), r, min(lo, r), max(hi, r), label, int(n1),
        bool(n1 < LOW_CONFIDENCE_HITS),
    )


def ratio_curve(
    model: LevyModel,
    u_grid: Sequence[float],
    trials: int,
    seed: int,
    denominator_mode: str = "mc",
    numerator_event: str = "supremum",
    workers: int = 1,
    tol: float = DEFAULT_TOL,
) -> TailRatioCurve:
    """P(numerator event)/P(X(1) > u) over a grid.

    ``denominator_mode``: "mc" pairs both estimates on the same paths (delta
    method CI); "exact" divides by the exact/sandwich endpoint tail; "auto"
    picks exact for discrete jumps and paired MC otherwise.
    """
    if denominator_mode == "auto":
        denominator_mode = "exact" if model.jumps.is_discrete else "mc"
    if denominator_mode not in ("mc", "exact"):
        raise ValueError("denominator_mode must be mc, exact or auto")
    counts = count_events(model, u_grid, [numerator_event], trials, seed, workers)
    rows, certs = [], []
    for i, u in enumerate(counts.us):
        n1 = int(counts.hits[numerator_event][i])
        if denominator_mode == "mc":
            n2 = int(counts.hits["endpoint"][i])
            n12 = int(counts.joint_with_endpoint[numerator_event][i])
            rows.append(_row_paired(float(u), n1, n2, n12, trials, "mc-paired"))
        else:
            tv = model_tail(model, float(u), tol)
            certs.append({"u": float(u), **tv.as_dict()})
            rows.append(_row_exact(float(u), n1, trials, tv, f"mc/{tv.method}"))
    return TailRatioCurve(rows, trials, seed, numerator_event, certs, counts.wall_time)


# ---------------------------------------------------------------------------
# symmetrisation identity


def _log_abs_smoothed_tail(vals: np.ndarray, log_mass: np.ndarray, sigma: float, u: float) -> float:
    """log P(X + |sigma N| > u) for discrete X."""
    z = (u - vals) / sigma
    # P(|N| > z) = 1 for z < 0, else 2 Phibar(z)
    lp = np.where(z < 0, 0.0, math.log(2.0) + log_normal_sf(np.maximum(z, 0.0)))
    return log_sum_exp(log_mass + lp)


def _log_excess_over_abs(vals: np.ndarray, log_mass: np.ndarray, sigma: float, u: float) -> float:
    """log P(X > u + |sigma N|) for discrete X."""
    z = (vals - u) / sigma
    # P(|N| < z) = 1 - 2 Phibar(z) for z > 0
    with np.errstate(divide="ignore"):
        lp = np.where(z > 0, np.log(np.maximum(-np.expm1(math.log(2.0) + log_normal_sf(np.maximum(z, 0.0))), 0.0)), -np.inf)
    return log_sum_exp(log_mass + lp)


def sym_identity_terms(x_law: JumpLaw, sigma: float, u: float) -> tuple[float, float, float]:
    """(P(X + |Y| > u), P(X + Y > u), P(X > u + |Y|)) for Y = sigma N, exactly."""
    if not isinstance(x_law, DiscreteLaw):
        raise TypeError("exact evaluation needs a discrete law")
    vals = x_law.values
    lm = np.asarray(x_law.log_mass, dtype=float)
    lhs = math.exp(_log_abs_smoothed_tail(vals, lm, sigma, u))
    table = ConvolutionTable(x_law, 1, 0.0)
    mid = math.exp(gaussian_smoothed_tail(table, 1, sigma, u))
    last = math.exp(_log_excess_over_abs(vals, lm, sigma, u))
    return lhs, mid, last


def sym_identity_residual(
    x_law: JumpLaw,
    y_sigma: float,
    u_grid: Sequence[float],
    trials: Optional[int] = None,
    seed: int = 0,
) -> float:
    """max_u |P(X+|Y|>u) - 2 P(X+Y>u) + P(X>u+|Y|)|.

    Exact for discrete X when ``trials`` is None; otherwise a Monte Carlo
    evaluation on common samples.
    """
    if trials is None:
        res = []
        for u in u_grid:
            lhs, mid, last = sym_identity_terms(x_law, y_sigma, float(u))
            res.append(abs(lhs - (2 * mid - last)))
        return float(max(res))
    rng = chunk_rng(seed, 0)
    x = x_law.sample(rng, trials)
    y = y_sigma * rng.standard_normal(trials)
    res = []
    for u in u_grid:
        lhs = np.mean(x + np.abs(y) > u)
        rhs = 2 * np.mean(x + y > u) - np.mean(x > u + np.abs(y))
        res.append(abs(lhs - rhs))
    return float(max(res))
