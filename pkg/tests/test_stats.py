import math
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import chi2_1dof_sf
from tokeval.stats import (StatsError, bonferroni, chi2_sf_1dof, discordant_counts,
                           exact_binomial_p, mcnemar, mcnemar_from_counts, pairwise_mcnemar, pearson)

# chi-square(1) upper-tail values from standard tables
CHI2_TABLE = [(0.0158, 0.90), (0.455, 0.50), (2.706, 0.10), (3.841, 0.05), (6.635, 0.01),
              (10.828, 0.001)]


@pytest.mark.parametrize("x,p", CHI2_TABLE)
def test_chi2_sf_table(x, p):
    assert chi2_sf_1dof(x) == pytest.approx(p, rel=2e-3)


@pytest.mark.parametrize("x", [1e-6, 0.1, 1.0, 4.05, 12.5, 40.0, 100.0])
def test_chi2_sf_erfc(x):
    assert abs(chi2_sf_1dof(x) - chi2_1dof_sf(x)) <= 1e-10


def test_chi2_corrected_15_5():
    r = mcnemar_from_counts(15, 5, method="chi2_corrected")
    assert r.statistic == pytest.approx(4.05, abs=1e-12)
    assert r.p_raw == pytest.approx(0.04417134490844261, abs=1e-10)


def test_auto_picks_exact_below_threshold():
    assert mcnemar_from_counts(15, 5).method == "exact_binomial"
    assert mcnemar_from_counts(15, 10).method == "chi2_corrected"


def test_exact_binomial_enumeration():
    # 2 * P(X <= 5), X ~ Bin(20, 1/2) by direct enumeration
    expected = 2 * sum(math.comb(20, k) for k in range(6)) / 2**20
    assert exact_binomial_p(15, 5) == pytest.approx(expected, abs=1e-15)
    assert exact_binomial_p(3, 3) == 1.0
    assert exact_binomial_p(0, 0) == 1.0


@pytest.mark.parametrize("method", ["auto", "chi2_corrected", "exact_binomial"])
@pytest.mark.parametrize("k", [0, 1, 7, 30])
def test_equal_discordance(method, k):
    r = mcnemar_from_counts(k, k, method=method)
    assert r.p_raw == 1.0
    assert r.statistic == 0.0


def test_identical_predictions():
    r = mcnemar([1, 0, 1], [1, 1, 0], [1, 1, 0])
    assert (r.b, r.c, r.p_raw) == (0, 0, 1.0)


def test_counts_and_errors():
    assert discordant_counts("abcd", "abxx", "xbcx") == (1, 1)
    with pytest.raises(StatsError):
        mcnemar([1], [1, 0], [1])
    with pytest.raises(StatsError):
        mcnemar([], [], [])


@given(st.integers(0, 200), st.integers(0, 200))
def test_symmetry(b, c):
    assert mcnemar_from_counts(b, c).p_raw == mcnemar_from_counts(c, b).p_raw


def test_seed_pooling():
    rng = random.Random(0)
    runs = []
    for _ in range(3):
        n = 50
        gold = [rng.randint(0, 2) for _ in range(n)]
        pa = [g if rng.random() < 0.8 else (g + 1) % 3 for g in gold]
        pb = [g if rng.random() < 0.6 else (g + 2) % 3 for g in gold]
        runs.append((gold, pa, pb))
    pooled = mcnemar(*[sum((r[i] for r in runs), []) for i in range(3)])
    b = sum(discordant_counts(*r)[0] for r in runs)
    c = sum(discordant_counts(*r)[1] for r in runs)
    assert pooled == mcnemar_from_counts(b, c)


def test_bonferroni():
    assert bonferroni(0.001, 26) == pytest.approx(0.026, abs=1e-15)
    assert bonferroni(0.001, 26) == min(1.0, 26 * 0.001)
    assert bonferroni(0.05, 26) == 1.0
    assert bonferroni(0.37, 1) == 0.37
    for bad in (-0.1, 1.5):
        with pytest.raises(StatsError):
            bonferroni(bad, 3)
    with pytest.raises(StatsError):
        bonferroni(0.1, 0)


@given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 50), st.integers(1, 50))
def test_bonferroni_monotone(p1, p2, m1, m2):
    assert 0.0 <= bonferroni(p1, m1) <= 1.0
    if p1 <= p2:
        assert bonferroni(p1, m1) <= bonferroni(p2, m1)
    if m1 <= m2:
        assert bonferroni(p1, m1) <= bonferroni(p1, m2)


def test_adjusted_p_in_result():
    r = mcnemar_from_counts(40, 15, m=26)
    assert r.p_adjusted == min(1.0, 26 * r.p_raw)


def test_pearson():
    x = [0.3, 1.7, 2.2, 5.0]
    assert pearson(x, x) == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, [-v for v in x]) == pytest.approx(-1.0, abs=1e-12)
    assert pearson([1, 2, 3], [2, 4, 6.1]) == pytest.approx(0.9999008674099175, abs=1e-12)
    for bad in (([1, 2], [1, 2, 3]), ([1], [1]), ([1, 1, 1], [1, 2, 3])):
        with pytest.raises(StatsError):
            pearson(*bad)


@given(st.lists(st.floats(-100, 100), min_size=3, max_size=20), st.floats(0.1, 10), st.floats(-50, 50))
def test_pearson_affine_invariance(xs, scale, shift):
    rng = np.random.default_rng(len(xs))
    ys = list(rng.normal(size=len(xs)))
    try:
        r = pearson(xs, ys)
    except StatsError:
        return
    if np.std(xs) < 1e-3:
        return
    assert pearson([scale * v + shift for v in xs], ys) == pytest.approx(r, abs=1e-12)


def test_pairwise_matrix():
    gold = [0, 1, 1, 0, 1, 0]
    preds = {"a": [0, 1, 1, 0, 1, 0], "b": [0, 0, 1, 0, 1, 1], "c": [1, 0, 0, 1, 0, 1]}
    res = pairwise_mcnemar(gold, preds)
    assert list(res) == [("a", "b"), ("a", "c"), ("b", "c")]
    assert res[("a", "c")].b == 6 and res[("a", "c")].p_adjusted == min(1.0, 3 * res[("a", "c")].p_raw)
