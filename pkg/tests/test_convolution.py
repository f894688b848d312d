import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import binom

from levy_tails.convolution import ConvolutionTable, barrier_tail, sk_tail
from levy_tails.jump_laws import discrete_law, factorial_law, plus_minus_law


def brute_force_fold(values, probs, k):
    out = {}
    for combo in itertools.product(range(len(values)), repeat=k):
        s = sum(values[i] for i in combo)
        out[s] = out.get(s, 0.0) + math.prod(probs[i] for i in combo)
    return out


@settings(max_examples=25, deadline=None)
@given(
    st.lists(st.integers(-5, 9), min_size=1, max_size=4, unique=True),
    st.integers(1, 4),
    st.data(),
)
def test_fold_matches_enumeration(values, k, data):
    w = data.draw(st.lists(st.floats(0.05, 1.0), min_size=len(values), max_size=len(values)))
    probs = [x / sum(w) for x in w]
    table = ConvolutionTable(discrete_law(values, probs), k, prune_eps=0.0)
    ref = brute_force_fold(values, probs, k)
    f = table.fold(k)
    got = dict(zip(table.values(k).round(9).tolist(), np.exp(f.log_mass)))
    assert set(got) == {float(s) for s in ref}
    for s, p in ref.items():
        assert math.isclose(got[float(s)], p, rel_tol=1e-12)


def test_binomial_fold_tail():
    table = ConvolutionTable(plus_minus_law(1.0), 10, prune_eps=0.0)
    # S_10 = 2 Bin(10, 1/2) - 10 > 2  <=> Bin > 6
    assert math.isclose(math.exp(sk_tail(table, 10, 2.0)), binom.sf(6, 10, 0.5), rel_tol=1e-13)


def test_factorial_fold_uses_exact_wide_indices():
    table = ConvolutionTable(factorial_law(1.0), 3)
    c = 1 / (math.e - 1)
    f = table.fold(3)
    assert math.isclose(math.exp(f.log_mass[0]), c**3, rel_tol=1e-13)
    assert table.values(3)[0] == 3.0


def test_missing_mass_bound_is_monotone():
    table = ConvolutionTable(factorial_law(1.0), 6)
    miss = [table.log_missing(k) for k in range(1, 7)]
    assert all(b >= a for a, b in zip(miss, miss[1:]))
    total = [math.exp(np.logaddexp.reduce(table.fold(k).log_mass)) for k in range(1, 7)]
    for k, t in enumerate(total, start=1):
        assert 1 - t <= math.exp(table.log_missing(k)) + 1e-15


def test_prune_eps_guard():
    with pytest.raises(ValueError):
        ConvolutionTable(plus_minus_law(1.0), 1, prune_eps=1e-10)


def brute_barrier(values, probs, n, u):
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


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=2, max_size=4, unique=True), st.integers(1, 8), st.floats(-2, 4))
def test_barrier_tail_matches_enumeration(values, n, u):
    probs = [1 / len(values)] * len(values)
    law = discrete_law(values, probs)
    ref = brute_barrier(values, probs, n, u)
    got = math.exp(barrier_tail(law, n, u))
    assert math.isclose(got, ref, rel_tol=1e-10, abs_tol=1e-300)
