import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erfc

from levy_tails.jump_laws import (
    LawKind,
    ProbeConfig,
    check_cond_h,
    check_lattice_cond,
    classify_tail,
    discrete_law,
    discretize,
    exponential_law,
    factorial_law,
    from_levy_measure,
    geometric_law,
    half_normal_law,
    hazard_law,
    lattice_factorial_law,
    log_power_hazard,
    mills_hazard,
    plus_minus_law,
    point_law,
    power_hazard,
    shift_law,
    uniform_law,
)


def test_discrete_law_merges_and_normalizes():
    law = discrete_law([1, 2, 1], [0.2, 0.5, 0.3])
    assert law.kind is LawKind.LATTICE
    assert law.exact_values() == [Fraction(1), Fraction(2)]
    np.testing.assert_allclose(np.exp(law.log_mass), [0.5, 0.5])


def test_decimal_steps_are_exact():
    law = discrete_law([0.01, 0.03], [0.5, 0.5])
    assert law.step == Fraction(1, 100)
    assert law.tail(0.03) == 0.0
    assert math.isclose(law.tail(0.02), 0.5)


def test_factorial_law_masses_and_tail():
    law = factorial_law(1.0)
    c = 1 / (math.e - 1)
    assert math.isclose(law.mass_at(6), c / 6, rel_tol=1e-14)
    # oracle: direct sum of C / n! over n! > 24
    direct = c * sum(1 / math.factorial(n) for n in range(5, 40))
    assert math.isclose(law.tail(24), direct, rel_tol=1e-12)
    assert law.tail(0.5) == 1.0


def test_factorial_rejects_small_v():
    with pytest.raises(ValueError):
        factorial_law(0.5)


def test_lattice_factorial_and_geometric():
    law = lattice_factorial_law()
    assert law.lattice_step == 1
    assert check_lattice_cond(law, 150).holds
    g = geometric_law(0.3)
    assert math.isclose(g.tail(4), 0.7**4, rel_tol=1e-12)


def test_discretized_half_normal_masses():
    law = discretize(half_normal_law(), 0.25)
    j = np.arange(0, 10)
    expected = erfc(j * 0.25 / math.sqrt(2)) - erfc((j + 1) * 0.25 / math.sqrt(2))
    np.testing.assert_allclose([law.mass_at(0.25 * k) for k in j], expected, rtol=1e-10)


def test_shift_law_moves_support():
    law = shift_law(point_law(1.0), Fraction(1, 2))
    assert law.values.tolist() == [1.5]


def test_hazard_law_linear_tail():
    law = hazard_law(power_hazard(1.0))
    # P(X > u) = exp(-u^2 / 2)
    assert math.isclose(law.log_tail(3.0), -4.5, rel_tol=1e-10)


def test_mills_hazard_reproduces_half_normal():
    law = hazard_law(mills_hazard())
    assert math.isclose(law.log_tail(2.0), half_normal_law().log_tail(2.0), rel_tol=1e-8)


def test_sampler_matches_tail():
    rng = np.random.default_rng(1)
    law = hazard_law(log_power_hazard(2.0))
    x = law.sample(rng, 200_000)
    for u in (1.0, 3.0):
        p = law.tail(u)
        assert abs(np.mean(x > u) - p) < 4 * math.sqrt(p * (1 - p) / len(x))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 50))
def test_tails_monotone(u):
    for law in (half_normal_law(), exponential_law(2.0), factorial_law(1.0)):
        assert law.log_tail(u + 0.5) <= law.log_tail(u) + 1e-12


def test_classifier_flags():
    assert classify_tail(exponential_law(1.0)).light1
    assert not classify_tail(exponential_law(1.0)).cond_pl
    hn = classify_tail(half_normal_law())
    assert hn.light1 and hn.cond_pl
    assert classify_tail(point_law(1.0)).light2
    assert classify_tail(uniform_law()).light2
    assert classify_tail(factorial_law(1.0)).heavy


def test_cond_h_check():
    v = np.linspace(10, 100, 200)
    assert check_cond_h(power_hazard(1.0), 1.0, v).holds
    assert not check_cond_h(power_hazard(1.0), 0.01, v).holds


def test_from_levy_measure_total_mass():
    lam, law = from_levy_measure(lambda u: 2.0 * math.exp(-u), 0.0, 0.5)
    assert math.isclose(lam, 2.0 * math.exp(-0.5))
    # jumps beyond a = 0.5 are exponential conditioned on exceeding a
    assert math.isclose(law.tail(1.5), math.exp(-1.0), rel_tol=1e-12)
    assert law.tail(0.2) == 1.0


def test_plus_minus_symmetric():
    assert plus_minus_law(1.0).is_symmetric()
    assert not point_law(1.0).is_symmetric()
