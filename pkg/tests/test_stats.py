import itertools
import math

import numpy as np
import pytest
import scipy.special
import scipy.stats
from hypothesis import given, strategies as st

from weaknesslab import stats


def rank_formula(n, perm):
    d2 = sum((i - p) ** 2 for i, p in enumerate(perm))
    return 1 - 6 * d2 / (n * (n * n - 1))


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_spearman_equals_rank_formula_on_all_permutations(n):
    x = np.arange(n) * 1.5 + 0.25
    for perm in itertools.permutations(range(n)):
        y = np.array(perm) * 2.0 - 7.0
        assert stats.spearman(x, y).rho == pytest.approx(rank_formula(n, perm), abs=1e-15)


@given(st.floats(0.1, 50), st.floats(0.1, 50), st.floats(0, 1))
def test_betainc_against_scipy(a, b, x):
    assert stats.betainc(a, b, x) == pytest.approx(scipy.special.betainc(a, b, x), abs=1e-12)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30).flatmap(
    lambda xs: st.tuples(st.just(xs), st.lists(st.floats(-100, 100), min_size=len(xs), max_size=len(xs)))))
def test_spearman_against_scipy(xy):
    x, y = map(np.array, xy)
    if np.all(x == x[0]) or np.all(y == y[0]):
        with pytest.raises(stats.UndefinedCorrelation):
            stats.spearman(x, y)
        return
    ours = stats.spearman(x, y)
    ref = scipy.stats.spearmanr(x, y)
    assert ours.rho == pytest.approx(ref.statistic, abs=1e-12)
    if abs(ours.rho) < 1:
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-14)


def test_rank_ties_average():
    np.testing.assert_array_equal(stats.rankdata([3, 1, 3, 2]), [3.5, 1, 3.5, 2])


def test_perfect_monotone():
    r = stats.spearman([1, 2, 3, 4], [10, 20, 30, 40])
    assert r.rho == 1.0 and r.p_value == 0.0


def test_permutation_p_value():
    rng = np.random.Generator(np.random.PCG64(0))
    x = rng.standard_normal(15)
    y = x + rng.standard_normal(15)
    a = stats.spearman(x, y, stats.PERMUTATION, seed=3, n_permutations=2000)
    assert a == stats.spearman(x, y, stats.PERMUTATION, seed=3, n_permutations=2000)
    assert abs(a.p_value - stats.spearman(x, y).p_value) < 0.03
    with pytest.raises(ValueError):
        stats.spearman(x, y, "kendall")


def test_spearman_input_errors():
    with pytest.raises(ValueError):
        stats.spearman([1, 2], [1, 2])
    with pytest.raises(ValueError):
        stats.spearman([1, 2, 3], [1, 2])


def test_welch_identical_samples():
    t, p = stats.welch([1.0, 2.0, 4.0], [1.0, 2.0, 4.0])
    assert t == 0.0 and p == 1.0


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=15),
       st.lists(st.floats(-10, 10), min_size=2, max_size=15))
def test_welch_against_scipy(x, y):
    if np.var(x) == 0 and np.var(y) == 0:
        with pytest.raises(stats.DegenerateVariance):
            stats.welch(x, y)
        return
    t, p = stats.welch(x, y)
    ref = scipy.stats.ttest_ind(x, y, equal_var=False)
    assert t == pytest.approx(ref.statistic, rel=1e-9, abs=1e-12)
    assert p == pytest.approx(ref.pvalue, rel=1e-7, abs=1e-12)


def test_t_tail_edges():
    assert stats.t_two_sided(0.0, 5) == 1.0
    assert stats.t_two_sided(math.inf, 5) == 0.0
    assert math.isnan(stats.t_two_sided(math.nan, 5))
