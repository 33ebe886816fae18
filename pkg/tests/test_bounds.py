import math
from fractions import Fraction

import pytest

from profilest import (
    InvalidInputError,
    Profile,
    bounds_report,
    continuous_mass_cap,
    corollary_flags,
    distinct_values_cap,
    enumerate_profiles,
    is_discrete_forced,
    pml_uniform_profile,
    support_lower_bound,
    support_upper_bound,
)

nontrivial = [p for n in range(2, 13) for p in enumerate_profiles(n)]


def test_uniform_ten_pairs():
    prof = Profile({2: 10})
    assert support_upper_bound(prof) == 14
    # 9 + 9 * (1/4) / 2
    assert support_lower_bound(prof) == Fraction(81, 8)
    assert bounds_report(prof).to_json()["support_lower"] == 10.125


def test_all_distinct_is_vacuous():
    prof = Profile({1: 5})
    assert support_upper_bound(prof) == math.inf
    assert support_lower_bound(prof) == math.inf
    assert bounds_report(prof).to_json()["support_upper"] == "inf"


def test_single_singleton_forces_discrete():
    assert is_discrete_forced(Profile({3: 1, 1: 1}))
    assert not is_discrete_forced(Profile({1: 2, 2: 1}))
    assert is_discrete_forced(Profile({2: 2}))


def test_continuous_cap():
    assert continuous_mass_cap(Profile({1: 2, 2: 1})) == Fraction(1, 2)
    assert continuous_mass_cap(Profile({4: 2})) == 0


def test_distinct_values_cap_small():
    assert distinct_values_cap(Profile({1: 1, 2: 1})) == 2
    assert distinct_values_cap(Profile({5: 2})) == 4
    assert distinct_values_cap(Profile({1: 2, 2: 2, 5: 1})) == 10


def test_trivial_rejected():
    with pytest.raises(InvalidInputError):
        bounds_report(Profile({1: 1}))


@pytest.mark.parametrize("prof", nontrivial, ids=str)
def test_lower_does_not_exceed_upper(prof):
    lo, hi = support_lower_bound(prof), support_upper_bound(prof)
    if not math.isinf(hi):
        assert lo <= hi
        assert hi >= prof.m
    assert math.isinf(lo) or lo >= prof.m - 1


@pytest.mark.parametrize("prof", nontrivial, ids=str)
def test_corollary_flags_follow_from_bounds(prof):
    k_eq, s_gt = corollary_flags(prof)
    if k_eq:
        assert support_upper_bound(prof) == prof.m
    if s_gt:
        assert support_lower_bound(prof) > prof.m
    assert k_eq == (prof.mu_min > math.log2(prof.m + 1))
    assert s_gt == (prof.mu_max < math.log2(math.sqrt(prof.m) + 1))


@pytest.mark.parametrize("prof", nontrivial, ids=str)
def test_distinct_cap_formula(prof):
    assert distinct_values_cap(prof) == min(2**prof.m, prof.n - 1)


@pytest.mark.parametrize("r, m", [(r, m) for r in (2, 3, 4) for m in range(2, 30)])
def test_uniform_optimum_inside_bounds(r, m):
    res = pml_uniform_profile(r, m)
    rep = bounds_report(Profile({r: m}))
    assert rep.min_support <= res.k <= rep.support_upper
    assert rep.violations(res.distribution.atoms, res.q) == []


def test_violations_report_each_rule():
    rep = bounds_report(Profile({3: 1, 1: 1}))
    assert rep.violations([0.5, 0.5], 0.0) == []
    assert any("forces a discrete" in v for v in rep.violations([0.5, 0.3], 0.2))
    assert any("below lower" in v for v in rep.violations([1.0], 0.0))
    many = bounds_report(Profile({4: 2}))
    assert any("above upper" in v for v in many.violations([0.25] * 4, 0.0))
