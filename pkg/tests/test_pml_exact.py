import json
import math

import numpy as np
import pytest
from sweep import kmax_for, small_profile_results

from profilest import (
    Distribution,
    NotApplicableError,
    PmlMethod,
    Profile,
    SearchConfig,
    UnboundedSearchError,
    bounds_report,
    pattern_prob_profile,
    pml_binary,
    pml_search,
    pml_trivial,
    pml_uniform_profile,
    pml_uniform_ratio_limit,
    uniform_profile_k,
)
from profilest.probability import log_pattern_prob_profile, pattern_prob_grad

# independent high-precision roots (mpmath, 30 digits)
ALPHA_2 = 1.2550009749159752658
ALPHA_3 = 1.0632870688777625420
ALPHA_10 = 1.0000454226184670388
BINARY_1_9_ROOT = 0.11111113405492488033
BINARY_1_9_PROB = 0.038742049800000743380


@pytest.mark.parametrize("prof, atoms, q", [
    (Profile({7: 1}), (1.0,), 0.0),
    (Profile({1: 5}), (), 1.0),
    (Profile({1: 1}), (1.0,), 0.0),
])
def test_trivial_forms(prof, atoms, q):
    res = pml_trivial(prof)
    assert res.distribution.atoms == atoms
    assert res.q == q
    assert res.probability == 1.0
    assert res.method is PmlMethod.TRIVIAL


def test_trivial_rejects_general_profile():
    with pytest.raises(NotApplicableError):
        pml_trivial(Profile({2: 2}))


@pytest.mark.parametrize("n0, n1", [(1, 2), (1, 3), (2, 2), (3, 5), (4, 7)])
def test_binary_balanced_regime(n0, n1):
    n = n0 + n1
    assert (n1 - n0) ** 2 <= n
    res = pml_binary(n0, n1)
    assert res.distribution.atoms == (0.5, 0.5)
    assert res.probability == 0.5 ** (n - 1)


def test_binary_skewed_root():
    res = pml_binary(1, 9)
    assert res.diagnostics["ratio_root"] == pytest.approx(BINARY_1_9_ROOT, rel=1e-12)
    assert res.probability == pytest.approx(BINARY_1_9_PROB, rel=1e-12)
    p = BINARY_1_9_ROOT
    assert res.distribution.atoms == pytest.approx((1 / (1 + p), p / (1 + p)), rel=1e-12)


def test_binary_grid():
    res = pml_binary(1, 9)
    p = np.linspace(0.5, 1.0, 200001)
    grid = p**9 * (1 - p) + p * (1 - p) ** 9
    assert grid.max() <= res.probability + 1e-12
    assert grid.max() == pytest.approx(res.probability, rel=1e-8)


def test_binary_argument_order_irrelevant():
    assert pml_binary(9, 1).probability == pml_binary(1, 9).probability


def test_uniform_profile_examples():
    assert uniform_profile_k(2, 10) == 12
    res = pml_uniform_profile(2, 2)
    assert res.k == 2
    assert res.probability == pytest.approx(1 / 8)
    one = pml_uniform_profile(5, 1)
    assert one.k == 1 and one.probability == 1.0


def test_ratio_limit():
    assert pml_uniform_ratio_limit(2) == pytest.approx(ALPHA_2, rel=1e-10)
    assert pml_uniform_ratio_limit(3) == pytest.approx(ALPHA_3, rel=1e-10)
    assert pml_uniform_ratio_limit(10) == pytest.approx(ALPHA_10, rel=1e-10)
    assert pml_uniform_ratio_limit(10) < pml_uniform_ratio_limit(3) < pml_uniform_ratio_limit(2)
    assert uniform_profile_k(2, 1000) / 1000 == pytest.approx(ALPHA_2, rel=0.02)


def test_three_symbols_two_singletons():
    res = pml_search(Profile({1: 2, 2: 1}), SearchConfig(kmax=10))
    assert res.method is PmlMethod.NUMERIC_SEARCH
    assert res.k == 5
    assert res.distribution.atoms == pytest.approx((0.2,) * 5, abs=1e-7)
    assert res.probability == pytest.approx(0.096, abs=1e-9)
    assert res.converged


def test_dispatch():
    assert pml_search(Profile({2: 2})).distribution.atoms == (0.5, 0.5)
    assert pml_search(Profile({1: 1, 2: 1})).k == 2
    assert pml_search(Profile({2: 10})).method is PmlMethod.UNIFORM_PROFILE


def test_singletons_need_a_cap():
    with pytest.raises(UnboundedSearchError):
        pml_search(Profile({1: 2, 2: 1}))


binary_profiles = [(n0, n - n0) for n in range(3, 13) for n0 in range(1, n // 2 + 1)]


@pytest.mark.parametrize("n0, n1", binary_profiles)
def test_numeric_reproduces_binary(n0, n1):
    closed = pml_binary(n0, n1)
    cfg = SearchConfig(kmax=4, starts=8)
    num = pml_search(Profile.from_multiplicities([n0, n1]), cfg, force_numeric=True)
    assert num.probability == pytest.approx(closed.probability, rel=1e-6)


@pytest.mark.parametrize("r, m", [(r, m) for r in (2, 3) for m in range(2, 5)])
def test_numeric_reproduces_uniform(r, m):
    closed = pml_uniform_profile(r, m)
    num = pml_search(Profile({r: m}), SearchConfig(starts=8), force_numeric=True)
    assert num.probability == pytest.approx(closed.probability, rel=1e-6)
    assert num.k == closed.k


@pytest.mark.parametrize("prof", [p for p in small_profile_results()], ids=str)
def test_dominates_random_distributions(prof):
    res = small_profile_results()[prof]
    rep = bounds_report(prof)
    kmax = min(kmax_for(prof.n), rep.support_upper)
    rng = np.random.default_rng(abs(hash(str(prof))) % 2**32)
    cap = float(rep.continuous_cap)
    for _ in range(200):
        k = int(rng.integers(1, kmax + 1))
        q = 0.0 if rep.discrete_forced else float(rng.uniform(0, 1))
        d = Distribution(rng.dirichlet(np.ones(k)) * (1 - q))
        assert pattern_prob_profile(d, prof).value <= res.probability + 1e-9
    assert cap >= res.q - 1e-9


stationary = [p for p, r in small_profile_results().items()
              if r.method is PmlMethod.NUMERIC_SEARCH and r.converged]


@pytest.mark.parametrize("prof", stationary, ids=str)
def test_stationarity_with_finite_differences(prof):
    res = small_profile_results()[prof]
    atoms = np.array(res.distribution.atoms)
    q = res.q
    log_p, ga, _ = pattern_prob_grad(prof, atoms, q)
    raw = ga * math.exp(log_p)
    assert raw.max() - raw.min() <= 1e-8
    h = 1e-6
    for j in range(atoms.size):
        up, dn = atoms.copy(), atoms.copy()
        up[j] += h
        dn[j] -= h
        fd = (math.exp(log_pattern_prob_profile(prof, up, q))
              - math.exp(log_pattern_prob_profile(prof, dn, q))) / (2 * h)
        assert raw[j] == pytest.approx(fd, rel=1e-4)


@pytest.mark.parametrize("text", ["1^2 2^1 3^1", "1^3 2^2", "1^1 2^2 3^1"])
def test_more_starts_never_hurt(text):
    prof = Profile.parse(text)
    probs = [pml_search(prof, SearchConfig(kmax=10, starts=s, seed=3)).probability for s in (1, 4, 16)]
    for a, b in zip(probs, probs[1:]):
        assert b >= a * (1 - 1e-9)


def test_deterministic_given_seed():
    prof = Profile.parse("1^3 2^1 3^1")
    a = pml_search(prof, SearchConfig(kmax=9, seed=11)).to_json()
    b = pml_search(prof, SearchConfig(kmax=9, seed=11)).to_json()
    assert json.dumps(a) == json.dumps(b)


def test_k_range_override():
    res = pml_search(Profile({1: 2, 2: 1}), SearchConfig(k_range_override=(3, 4)))
    assert res.k <= 4
    assert res.diagnostics["k_range"] == (3, 4)


def test_json_fields():
    out = pml_search(Profile({1: 2, 2: 1}), SearchConfig(kmax=6)).to_json()
    assert set(out) == {"atoms", "q", "probability", "log_probability", "method", "k",
                        "certificates", "converged"}
    assert out["method"] == "numeric-search"


@pytest.mark.parametrize("bad", [dict(starts=0), dict(gradient_tolerance=0.0), dict(max_iterations=0)])
def test_config_validation(bad):
    with pytest.raises(ValueError):
        SearchConfig(**bad)
