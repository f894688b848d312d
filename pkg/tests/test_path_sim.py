import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm, poisson

from levy_tails.exact_engine import LevyModel, model_tail
from levy_tails.jump_laws import discrete_law, factorial_law, half_normal_law, plus_minus_law, point_law
from levy_tails.path_sim import (
    assemble_paths,
    bridge_max_inverse,
    chunk_rng,
    count_events,
    paired_ratio,
    ratio_curve,
    sample_path,
    simulate_batch,
    sym_identity_residual,
)


def test_bridge_max_inverse_solves_survival_equation():
    a, c, t, s, p = 0.3, -0.2, 0.7, 1.3, 0.25
    m = bridge_max_inverse(a, c, t, s, p)
    assert math.isclose(math.exp(-2 * (m - a) * (m - c) / (s * s * t)), p, rel_tol=1e-12)
    assert bridge_max_inverse(a, c, t, s, 1.0) == max(a, c)


def test_bridge_max_distribution():
    # P(max of bridge 0 -> 0 over [0,1] > m) = exp(-2 m^2)
    rng = np.random.default_rng(5)
    m = bridge_max_inverse(np.zeros(200_000), np.zeros(200_000), 1.0, 1.0, 1 - rng.random(200_000))
    for level in (0.3, 0.8):
        p = math.exp(-2 * level**2)
        assert abs(np.mean(m > level) - p) < 4 * math.sqrt(p * (1 - p) / len(m))


def test_assemble_paths_hand_example():
    # sigma = 0, b = 1: one jump of size 2 at t = 0.5 -> path 0, -0.5, 1.5, 1.0
    batch = assemble_paths(
        0.0, 1.0, np.array([[0.5]]), np.array([[2.0]]), np.zeros((1, 2)), np.ones((1, 2)), np.ones(1), np.array([1])
    )
    assert math.isclose(batch.endpoint[0], 1.0)
    assert math.isclose(batch.supremum[0], 1.5)
    assert math.isclose(batch.penultimate[0], 0.0)
    assert math.isclose(batch.sup_z[0], 1.5)


def test_endpoint_law_matches_exact_tail():
    model = LevyModel(0.5, 0.2, 1.5, discrete_law([1, 2], [0.7, 0.3]))
    counts = count_events(model, [0.5, 1.5, 3.0], ["supremum"], 200_000, seed=11)
    for i, u in enumerate(counts.us):
        p = model_tail(model, float(u)).point
        est = counts.estimate("endpoint", i)
        assert abs(est.p_hat - p) < 4 * est.stderr


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_supremum_dominates_endpoint(seed):
    model = LevyModel(1.0, 0.5, 2.0, half_normal_law())
    batch = simulate_batch(model, chunk_rng(seed, 0), 500)
    assert np.all(batch.supremum >= batch.endpoint)
    assert np.all(batch.supremum >= 0)
    assert np.all(batch.sup_b >= np.maximum(batch.sigma_b1, 0.0))


def test_brownian_supremum_law():
    # sup of sigma B over [0, 1] has P(> m) = 2 Phibar(m / sigma)
    model = LevyModel(1.5, 0.0, 1.0, point_law(1.0))
    batch = simulate_batch(model, chunk_rng(7, 0), 200_000)
    for m in (1.0, 3.0):
        p = 2 * norm.sf(m / 1.5)
        assert abs(np.mean(batch.sup_b > m) - p) < 4 * math.sqrt(p * (1 - p) / 200_000)


def test_counts_deterministic_across_workers():
    model = LevyModel(1.0, 0.0, 1.0, half_normal_law())
    a = count_events(model, [1.0, 2.0], ["supremum"], 150_000, seed=3, workers=1)
    b = count_events(model, [1.0, 2.0], ["supremum"], 150_000, seed=3, workers=3)
    assert np.array_equal(a.hits["supremum"], b.hits["supremum"])
    assert np.array_equal(a.joint_with_endpoint["supremum"], b.joint_with_endpoint["supremum"])


def test_no_jump_reflection_small():
    model = LevyModel(1.0, 0.0, 1e-12, point_law(1.0))
    est = count_events(model, [1.0], ["supremum"], 200_000, seed=1).estimate("supremum", 0)
    assert abs(est.p_hat - 2 * norm.sf(1.0)) < 3.5 * est.stderr


def test_paired_ratio_identical_events_has_zero_width():
    r, half = paired_ratio(500, 500, 500, 10_000)
    assert r == 1.0 and half == 0.0


def test_paired_ratio_against_bootstrap():
    rng = np.random.default_rng(0)
    n = 20_000
    x = rng.random(n)
    a, b = x < 0.3, x < 0.2  # b inside a
    r, half = paired_ratio(a.sum(), b.sum(), (a & b).sum(), n)
    boots = []
    for _ in range(300):
        i = rng.integers(0, n, n)
        boots.append(a[i].mean() / b[i].mean())
    assert math.isclose(half / 1.96, np.std(boots), rel_tol=0.15)


def test_sigma_zero_positive_jumps_ratio_one_below_zero():
    model = LevyModel(0.0, 0.5, 1.0, point_law(1.0))
    curve = ratio_curve(model, [-1.0], 10_000, 0, "exact")
    assert curve.rows[0].ratio == 1.0


def test_sample_path_consistency():
    model = LevyModel(1.0, 0.3, 3.0, factorial_law(1.0))
    rng = np.random.default_rng(4)
    for _ in range(50):
        p = sample_path(model, rng)
        z = p.jump_sizes.sum()
        assert math.isclose(p.endpoint, p.brownian_values[-1] + z - 0.3, abs_tol=1e-9)
        assert p.supremum >= max(p.endpoint, 0.0)


def test_symmetrization_identity_exact_and_mc():
    grid = np.linspace(-2, 6, 20)
    assert sym_identity_residual(plus_minus_law(1.0), 1.0, grid) < 1e-10
    assert sym_identity_residual(factorial_law(1.0), 0.5, grid) < 1e-10
    assert sym_identity_residual(plus_minus_law(1.0), 1.0, grid, trials=200_000, seed=2) < 0.01


def test_tau_distribution():
    model = LevyModel(0.0, 0.0, 2.5, point_law(1.0))
    batch = simulate_batch(model, chunk_rng(9, 0), 100_000)
    # sigma = 0, b = 0, unit jumps: endpoint = tau
    assert np.array_equal(batch.endpoint, batch.tau.astype(float))
    assert abs(batch.tau.mean() - 2.5) < 4 * math.sqrt(2.5 / 100_000)
    assert abs(np.mean(batch.tau == 0) - poisson.pmf(0, 2.5)) < 0.005
