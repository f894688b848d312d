"""Acceptance suite: twelve end-to-end criteria, one PASS/FAIL line each.

Criteria 6-11 run 10^7 Monte Carlo paths and take minutes; the suite prints
its verdict lines even under output capture.
"""

import itertools
import math
import time

import numpy as np
import pytest
from scipy.stats import norm, poisson

from levy_tails.cli import main as cli_main
from levy_tails.convolution import ConvolutionTable, barrier_tail
from levy_tails.exact_engine import LevyModel, compound_tail, model_tail, normal_tail
from levy_tails.experiments import (
    run_prop_main,
    run_prop_pl2,
    run_thm1,
    run_thm2,
    run_thm3,
    run_thm4,
)
from levy_tails.jump_laws import (
    discrete_law,
    factorial_law,
    half_normal_law,
    lattice_factorial_law,
    plus_minus_law,
    point_law,
)
from levy_tails.path_sim import count_events, sym_identity_residual

BIG = 10_000_000


@pytest.fixture
def verdict(capsys):
    def report(criterion: int, passed: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        assert passed, detail

    return report


def test_01_reflection_principle(verdict):
    t0 = time.perf_counter()
    model = LevyModel(1.0, 0.0, 1e-12, point_law(1.0))
    est = count_events(model, [1.0], ["supremum"], 1_000_000, seed=2024).estimate("supremum", 0)
    exact = 2 * norm.sf(1.0)
    z = (est.p_hat - exact) / est.stderr
    dt = time.perf_counter() - t0
    verdict(1, abs(z) <= 3 and dt < 60, f"P(sup>1)={est.p_hat:.6f} vs {exact:.7f}, z={z:.2f}, {dt:.1f}s")


def test_02_normal_tail_bracket(verdict):
    ok, worst = True, []
    for x in (1.1, 1.5, 2, 3, 5, 10, 20):
        lt = normal_tail(x)
        log_up = math.log(norm.pdf(x)) - math.log(x)
        log_lo = log_up + math.log1p(-1 / x**2)
        ok &= log_lo <= lt <= log_up
        worst.append(min(lt - log_lo, log_up - lt))
    verdict(2, ok, f"min log-margin {min(worst):.3g}")


def test_03_symmetrization_identity(verdict):
    grid = np.linspace(-3.0, 12.0, 20)
    res = max(
        sym_identity_residual(law, s, grid)
        for law in (plus_minus_law(1.0), factorial_law(1.0))
        for s in (0.5, 1.0, 2.0)
    )
    verdict(3, res < 1e-10, f"max residual {res:.3g}")


def _brute_barrier(values, probs, n, u):
    total = 0.0
    for combo in itertools.product(range(len(values)), repeat=n):
        s, ok = 0.0, True
        for j, i in enumerate(combo):
            s += values[i]
            if j < n - 1 and s > u:
                ok = False
                break
        if ok and s > u:
            total += math.prod(probs[i] for i in combo)
    return total


def test_04_exact_vs_brute_force(verdict):
    err_ct = 0.0
    for v, lam in ((1.0, 0.5), (1.0, 3.0), (0.5, 2.0), (2.0, 7.0)):
        table = ConvolutionTable(point_law(v), 1, prune_eps=0.0)
        for u in np.linspace(-1, 30, 32):
            got = math.exp(compound_tail(lam, table, float(u))[0])
            exact = 1.0 if u < 0 else poisson.sf(math.floor(u / v), lam)
            err_ct = max(err_ct, abs(got - exact))
    rng = np.random.default_rng(7)
    err_b = 0.0
    for _ in range(12):
        vals = sorted(rng.choice(np.arange(-3, 5), size=int(rng.integers(2, 5)), replace=False).tolist())
        w = rng.random(len(vals)) + 0.1
        probs = (w / w.sum()).tolist()
        law = discrete_law(vals, probs)
        u = float(rng.uniform(-1, 4))
        for n in range(1, 9):
            ref = _brute_barrier(vals, probs, n, u)
            got = math.exp(barrier_tail(law, n, u))
            if ref > 0:
                err_b = max(err_b, abs(got - ref) / ref)
            else:
                err_b = max(err_b, got)
    verdict(4, err_ct <= 1e-12 and err_b <= 1e-10, f"compound abs err {err_ct:.2g}, barrier rel err {err_b:.2g}")


def test_05_mc_vs_exact(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(55)
    worst, checked = 0.0, 0
    for m in range(5):
        n_pts = int(rng.integers(2, 5))
        vals = rng.choice(np.arange(-4, 9), size=n_pts, replace=False) * 0.5
        w = rng.random(n_pts) + 0.1
        model = LevyModel(float(rng.choice([0.0, 0.5, 1.0])), float(rng.uniform(-1, 1)), float(rng.uniform(0.5, 3)),
                          discrete_law(vals.tolist(), (w / w.sum()).tolist()))
        grid = np.linspace(-1, 6, 8)
        counts = count_events(model, grid, [], 1_000_000, seed=100 + m)
        for i, u in enumerate(counts.us):
            p = model_tail(model, float(u)).point
            if p * 1_000_000 < 50:
                continue
            est = counts.estimate("endpoint", i)
            se = math.sqrt(p * (1 - p) / est.trials)  # binomial stderr at the exact p
            worst = max(worst, abs(est.p_hat - p) / se if se > 0 else (0.0 if est.p_hat == p else math.inf))
            checked += 1
    dt = time.perf_counter() - t0
    verdict(5, worst <= 3 and dt < 300, f"{checked} grid points, max |z|={worst:.2f}, {dt:.0f}s")


def _trend_detail(rep):
    return ", ".join(f"u={r.u:g}: {r.ratio:.4f}+-{r.ci:.4f}" for r in rep.rows)


def test_06_brownian_component_ratio_trend(verdict):
    t0 = time.perf_counter()
    rep = run_thm1(LevyModel(1.0, 0.0, 1.0, half_normal_law()), [2, 3, 4, 5, 6], BIG, seed=6)
    dt = time.perf_counter() - t0
    ge1 = rep.verdict("ratio >= 1 - CI").passed
    mono = rep.verdict("non-increasing within CI").passed
    final = rep.rows[-1].ratio <= 1.10
    verdict(6, ge1 and mono and final and dt < 900,
            f"ge1={ge1} nonincreasing={mono} final<=1.10={final} [{_trend_detail(rep)}] {dt:.0f}s")


def test_07_no_brownian_ratio_trend(verdict):
    rep = run_thm2(LevyModel(0.0, 1.0, 1.0, half_normal_law()), [2, 3, 4, 5, 6], BIG, seed=7)
    ge1 = rep.verdict("ratio >= 1 - CI").passed
    mono = rep.verdict("non-increasing within CI").passed
    final = rep.rows[-1].ratio <= 1.10
    q = rep.verdict("Q ratio positive and strictly decreasing").passed
    qs = [round(r["q_ratio"], 5) for r in rep.extra["q_ratio"]]
    verdict(7, ge1 and mono and final and q,
            f"ge1={ge1} nonincreasing={mono} final<=1.10={final} Q decreasing={q} {qs} [{_trend_detail(rep)}]")


def test_08_lattice_subsequences(verdict):
    rep = run_thm3(LevyModel(0.0, 0.5, 1.0, lattice_factorial_law()), [4, 5, 6, 7], BIG, seed=8)
    plus = [r for r in rep.rows if r.method.endswith("plus")]
    minus = [r for r in rep.rows if r.method.endswith("minus")]
    inc = all(b.ratio > a.ratio for a, b in zip(plus, plus[1:]))
    hits = all(r.numerator_hits >= 100 for r in plus)
    window = all(1 - r.ci <= r.ratio <= 1 + 3 * r.ci for r in minus)
    verdict(8, inc and hits and window,
            f"plus {[round(r.ratio, 4) for r in plus]} hits>={min(r.numerator_hits for r in plus)}; "
            f"minus {[round(r.ratio, 5) for r in minus]}")


def test_09_factorial_example(verdict):
    t0 = time.perf_counter()
    rep = run_thm4(range(2, 9), BIG, v=1.0, seed=9)
    dt = time.perf_counter() - t0
    rows = {r["n"]: r for r in rep.extra["exact"]["rows"]}
    ns = range(3, 9)
    bounded_a = rep.verdict("O-term at n! bounded (sum of I_k from k=1)").passed
    bounded_nn = rep.verdict("O-term at n n! bounded").passed
    delta_pos = all(rows[n]["delta"] > 0 for n in ns)
    mc = {r.u: r for r in rep.rows}
    r120, r96 = mc[120.0], mc[96.0]
    c1 = r120.ratio > 1 + rows[5]["delta"] - r120.ci
    c2 = 1 - r96.ci <= r96.ratio <= 1 + 3 * r96.ci
    verdict(9, bounded_a and bounded_nn and delta_pos and c1 and c2 and dt < 1800,
            f"O-terms n!={[round(rows[n]['scaled_residual_from_1'], 3) for n in ns]} "
            f"n*n!={[round(rows[n]['scaled_residual_nn'], 3) for n in ns]}; "
            f"delta_5={rows[5]['delta']:.5f}; u=120: {r120.ratio:.4f}+-{r120.ci:.4f}; "
            f"u=96: {r96.ratio:.5f}+-{r96.ci:.5f}; {dt:.0f}s")


def test_10_independent_suprema(verdict):
    rep = run_prop_pl2(LevyModel(1.0, 0.0, 1.0, half_normal_law()), [2, 4, 6, 8], BIG, seed=10)
    ratios = [r.ratio for r in rep.rows]
    inc = all(b > a for a, b in zip(ratios, ratios[1:]))
    last = rep.rows[-1]
    final = last.ratio > 1.5 and last.ratio_lo >= 1.3
    l_tab = {r["alpha"]: r["l"] for r in rep.extra["l_table"]}
    l_ok = math.isclose(l_tab[1.0], 1.682689, abs_tol=1e-6) and all(1 < l_tab[a] < 2 for a in (0.25, 0.5, 1, 2, 4))
    verdict(10, inc and final and l_ok,
            f"ratios {[round(x, 4) for x in ratios]}, final CI low {last.ratio_lo:.4f}, l(1)={l_tab[1.0]:.6f}")


def test_11_symmetric_upper_bound(verdict):
    rep = run_prop_main(LevyModel(0.0, 0.0, 1.0, plus_minus_law(1.0)), [0.5, 1.5, 2.5, 3.5], BIG, seed=11)
    a = rep.verdict("sup tail <= 2 P(X(1)>u) - D(u) + 3 stderr").passed
    b = rep.verdict("ratio <= 2 - D(u)/P(X(1)>u) + 3 relative CI").passed
    bounds = [round(d["ratio_bound"], 4) for d in rep.extra["D"]]
    verdict(11, a and b, f"ratios {[round(r.ratio, 4) for r in rep.rows]} vs bounds {bounds}")


def test_12_determinism(verdict, tmp_path):
    cfgs = {
        "thm1": "[experiment]\nid = thm1\nu = 1,2,3\ntrials = 300000\nseed = 5\n"
        "[model]\nsigma = 1\nb = 0\nlambda = 1\nlaw = half-normal\n",
        "main": "[experiment]\nid = main\nu = 0.5,1.5\ntrials = 300000\nseed = 5\n"
        "[model]\nsigma = 0\nb = 0\nlambda = 1\nlaw = pm value=1\n",
    }
    same = True
    for name, text in cfgs.items():
        path = tmp_path / f"{name}.ini"
        path.write_text(text)
        outs = []
        for i, workers in enumerate(("1", "1", "4")):
            out = tmp_path / f"{name}{i}"
            cli_main(["verify", name, str(path), "--outdir", str(out), "--workers", workers])
            outs.append((out / "table.csv").read_bytes())
        same &= outs[0] == outs[1] == outs[2]
    verdict(12, same, "table.csv byte-identical across runs and worker counts")
