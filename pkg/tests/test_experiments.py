import math

import numpy as np
import pytest

from levy_tails.exact_engine import LevyModel
from levy_tails.experiments import (
    CONSISTENT,
    HYPOTHESIS_FAILS,
    LOW_CONFIDENCE,
    factorial_exact_tables,
    not_growing,
    run_prop_main,
    run_prop_pl,
    run_prop_pl2,
    run_thm1,
    run_thm2,
    run_thm3,
    within_nonincreasing_trend,
)
from levy_tails.jump_laws import (
    discretize,
    exponential_law,
    factorial_law,
    half_normal_law,
    lattice_factorial_law,
    plus_minus_law,
)
from levy_tails.path_sim import RatioRow


def test_nonincreasing_trend_check():
    ok, _ = within_nonincreasing_trend([1.5, 1.4, 1.41, 1.2], [0.02] * 4)
    assert ok
    bad, _ = within_nonincreasing_trend([1.1, 1.5, 1.9], [0.01] * 3)
    assert not bad


def test_not_growing():
    assert not_growing([1.0, 0.9, 0.95, 0.93])
    assert not not_growing([1.0, 1.1, 1.3, 1.5])


def test_every_verdict_references_rows():
    model = LevyModel(1.0, 0.0, 1.0, half_normal_law())
    rep = run_thm1(model, [2, 3], 50_000, seed=1)
    us = {r.u for r in rep.rows}
    for v in rep.verdicts:
        assert v.rows and set(v.rows) <= us


def test_thm1_too_few_trials_is_low_confidence():
    rep = run_thm1(LevyModel(1.0, 0.0, 1.0, half_normal_law()), [4, 6], 10, seed=0)
    assert rep.status == LOW_CONFIDENCE


def test_thm2_q_ratio_decreasing():
    rep = run_thm2(LevyModel(0.0, 1.0, 1.0, half_normal_law()), [2, 3, 4, 5, 6], 20_000, seed=1)
    assert rep.hypotheses["cond_h"]
    q = [r["q_ratio"] for r in rep.extra["q_ratio"]]
    assert all(b < a for a, b in zip(q, q[1:])) and min(q) > 0
    assert rep.verdict("Q ratio positive and strictly decreasing").passed


def test_thm2_negative_u_row_is_exactly_one():
    rep = run_thm2(LevyModel(0.0, 0.5, 1.0, half_normal_law()), [-1.0], 1000, seed=1)
    assert rep.rows[0].ratio == 1.0
    assert rep.status == CONSISTENT


def test_thm3_denominator_cross_check():
    rep = run_thm3(LevyModel(0.0, 0.5, 1.0, lattice_factorial_law()), [3, 4], 20_000, seed=2)
    for c in rep.extra["denominator_cross_check"]:
        assert math.isclose(c["denominator"], c["compound_series_at_u_plus_b"], rel_tol=1e-12)
    assert rep.hypotheses["lattice_cond"]


def test_pl_exact_trace_against_grid_convolution():
    law = discretize(half_normal_law(), 0.25)
    rep = run_prop_pl(law, 1.0, [2.0, 6.0, 10.0])
    # independent oracle: dense convolution of the floor-discretized law
    from scipy.special import erfc
    from scipy.stats import poisson

    j = np.arange(0, 200)
    pm = erfc(j * 0.25 / math.sqrt(2)) - erfc((j + 1) * 0.25 / math.sqrt(2))
    dist, tot = np.zeros(4000), np.zeros(4000)
    dist[0] = 1
    for k in range(60):
        tot += poisson.pmf(k, 1) * dist
        dist = np.convolve(dist, pm)[:4000]

    def tail(u):
        return tot[int(np.floor(u / 0.25)) + 1:].sum()

    for r in rep.rows:
        assert math.isclose(r.ratio, tail(r.u + 1) / tail(r.u), rel_tol=1e-9)
    assert rep.verdict("ratio in (0, 1]").passed


def test_pl_refuses_exponential():
    rep = run_prop_pl(exponential_law(1.0), 1.0, [2.0, 4.0])
    assert rep.status == HYPOTHESIS_FAILS
    assert rep.rows == []


def test_pl2_l_table():
    rep = run_prop_pl2(LevyModel(1.0, 0.0, 1.0, half_normal_law()), [2, 4], 20_000, seed=1)
    l1 = [r for r in rep.extra["l_table"] if r["alpha"] == 1.0][0]["l"]
    assert math.isclose(l1, 1.682689, abs_tol=1e-6)
    assert rep.verdict("1 < l(alpha) < 2").passed


def test_main_d_positive():
    rep = run_prop_main(LevyModel(0.0, 0.0, 1.0, plus_minus_law(1.0)), [0.5, 1.5], 50_000, seed=1)
    assert all(d["D"] > 0 for d in rep.extra["D"])
    assert rep.status == CONSISTENT


def test_factorial_tables_structure():
    model = LevyModel(1.0, 0.0, 1.0, factorial_law(1.0))
    t = factorial_exact_tables(model, range(2, 6))
    rows = {r["n"]: r for r in t["rows"]}
    assert math.isclose(t["I_k"][2], 0.331476, abs_tol=1e-6)
    assert all(rows[n]["delta"] > 0 for n in (3, 4, 5))
    # the k >= 2 residual carries (n+1) C I_1 / 1 that the k >= 1 sum removes
    c = 1 / (math.e - 1)
    for n in (3, 4, 5):
        diff = rows[n]["scaled_residual_from_2"] - rows[n]["scaled_residual_from_1"]
        assert math.isclose(diff, (n + 1) * c * t["I_k"][1], rel_tol=1e-9)
    # P(S_k + B > n n!) ~ k P(X = (n+1)!)
    for r in rows[5]["as2"]:
        assert abs(r["beta_over_k"]) < 2.0
