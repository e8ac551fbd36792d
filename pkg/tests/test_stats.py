"""Mann-Whitney kernel against a brute-force enumeration oracle."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perfdrift.stats import PValueMethod, mann_whitney_u, rank_with_ties


def oracle_p(a, b, alternative="two-sided"):
    """Exact p by enumerating every assignment of pooled values to groups.

    Independent of the library implementation: U is counted directly from
    pairwise comparisons (0.5 per tie) for every combination of positions.
    """
    pooled = list(a) + list(b)
    n = len(a)

    def u_of(group_a):
        group_b = [pooled[i] for i in range(len(pooled)) if i not in group_a]
        u = 0.0
        for x in group_a:
            for y in group_b:
                if pooled[x] > y:
                    u += 1.0
                elif pooled[x] == y:
                    u += 0.5
        return u

    observed = u_of(tuple(range(n)))
    us = [u_of(c) for c in itertools.combinations(range(len(pooled)), n)]
    total = len(us)
    ge = sum(1 for u in us if u >= observed - 1e-12) / total
    le = sum(1 for u in us if u <= observed + 1e-12) / total
    if alternative == "greater":
        return ge
    if alternative == "less":
        return le
    return min(1.0, 2.0 * min(ge, le))


def test_ranks_distinct():
    assert rank_with_ties([3, 1, 2]).tolist() == [3, 1, 2]


def test_ranks_full_tie():
    assert rank_with_ties([5, 5]).tolist() == [1.5, 1.5]


def test_ranks_partial_tie():
    assert rank_with_ties([1, 2, 2, 3]).tolist() == [1, 2.5, 2.5, 4]


def test_rank_sum_identity():
    rng = np.random.default_rng(7)
    for _ in range(25):
        values = rng.integers(0, 5, size=rng.integers(1, 40)).astype(float)
        ranks = rank_with_ties(values)
        n = len(values)
        assert math.isclose(ranks.sum(), n * (n + 1) / 2, rel_tol=0, abs_tol=1e-9)


def test_separated_samples_exact():
    res = mann_whitney_u([1, 2, 3], [4, 5, 6])
    assert res.method is PValueMethod.EXACT
    assert res.u_statistic == 0.0
    assert res.p_value == pytest.approx(0.1, abs=1e-12)


def test_identical_samples():
    res = mann_whitney_u([1.0, 2.0, 5.0], [1.0, 2.0, 5.0])
    assert res.p_value == 1.0


def test_all_tied_input():
    res = mann_whitney_u([2.0] * 10, [2.0] * 10)
    assert res.p_value == 1.0


def test_strong_separation_large():
    res = mann_whitney_u([0.5] * 100, [-0.5] * 100)
    assert res.method is PValueMethod.NORMAL_APPROX
    assert res.u_statistic == 100 * 100
    assert res.p_value < 1e-6


def test_matches_enumeration_oracle_small_samples():
    rng = np.random.default_rng(42)
    for n in range(1, 8):
        for m in range(1, 8):
            a = rng.normal(size=n)
            b = rng.normal(size=m)
            res = mann_whitney_u(a, b)
            assert res.method is PValueMethod.EXACT
            assert res.p_value == pytest.approx(oracle_p(a, b), abs=1e-9), (n, m)


def test_matches_oracle_one_sided():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a = rng.normal(size=int(rng.integers(2, 7)))
        b = rng.normal(size=int(rng.integers(2, 7)))
        for alt in ("greater", "less"):
            res = mann_whitney_u(a, b, alternative=alt)
            assert res.p_value == pytest.approx(oracle_p(a, b, alt), abs=1e-9)


def test_matches_scipy_with_ties():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(11)
    for _ in range(30):
        a = rng.integers(0, 6, size=int(rng.integers(3, 40))).astype(float)
        b = rng.integers(0, 6, size=int(rng.integers(3, 40))).astype(float)
        if np.ptp(np.concatenate([a, b])) == 0:
            continue
        mine = mann_whitney_u(a, b)
        ref = scipy_stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic")
        assert mine.p_value == pytest.approx(ref.pvalue, abs=1e-8)
        assert mine.u_statistic == pytest.approx(ref.statistic, abs=1e-9)


@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=30),
       st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=30))
@settings(max_examples=150, deadline=None)
def test_symmetry_under_swap(a, b):
    r_ab = mann_whitney_u(a, b)
    r_ba = mann_whitney_u(b, a)
    assert r_ab.p_value == pytest.approx(r_ba.p_value, rel=1e-9, abs=1e-12)
    assert r_ab.u_statistic + r_ba.u_statistic == pytest.approx(len(a) * len(b))


@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=12, unique=True),
       st.lists(st.floats(-100, 100, allow_nan=False), min_size=2, max_size=12, unique=True),
       st.floats(0.1, 50))
@settings(max_examples=100, deadline=None)
def test_shift_does_not_weaken_one_sided(a, b, shift):
    from hypothesis import assume

    shifted_a = [x + shift for x in a]
    # a shift that introduces ties switches the p-value method; p-values of
    # different methods are not comparable at this precision, U always is
    assume(len(set(a) | set(b)) == len(a) + len(b))
    base = mann_whitney_u(a, b, alternative="greater")
    shifted = mann_whitney_u(shifted_a, b, alternative="greater")
    assert shifted.u_statistic >= base.u_statistic
    if len(set(shifted_a) | set(b)) == len(a) + len(b):
        assert shifted.p_value <= base.p_value + 1e-9


def test_exact_and_approx_agree_moderately():
    rng = np.random.default_rng(9)
    for _ in range(40):
        n = int(rng.integers(4, 9))
        m = int(rng.integers(4, 9))
        a = rng.normal(size=n)
        b = rng.normal(size=m)
        result = mann_whitney_u(a, b)
        # same statistic through the normal approximation
        from perfdrift.stats import _approx_p, _tie_term
        pooled = np.sort(np.concatenate([a, b]))
        approx = _approx_p(result.u_statistic, n, m, _tie_term(pooled), "two-sided")
        assert abs(result.p_value - approx) <= 0.05


def test_empty_inputs_rejected():
    with pytest.raises(ValueError):
        mann_whitney_u([], [1.0])
    with pytest.raises(ValueError):
        mann_whitney_u([1.0], [])
    with pytest.raises(ValueError):
        rank_with_ties([])


def test_unknown_alternative_rejected():
    with pytest.raises(ValueError):
        mann_whitney_u([1.0], [2.0], alternative="sideways")
