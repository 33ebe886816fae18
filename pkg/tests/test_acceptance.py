"""End-to-end acceptance checks; each one also reports a PASS/FAIL line in the terminal summary."""

import json
import math
import subprocess
import sys
import time
from fractions import Fraction

import numpy as np
import pytest
from conftest import record
from scipy.optimize import minimize_scalar
from sweep import small_profile_results

from profilest import (
    Distribution,
    EmConfig,
    Profile,
    SearchConfig,
    convergence_experiment,
    enumerate_patterns,
    em_pml,
    pattern_prob,
    pattern_prob_oracle,
    pml_binary,
    pml_search,
    pml_uniform_profile,
    uniform_profile_k,
)
from profilest.cli import main

# Tabulated optima for the nontrivial profiles of length at most 4; () means all mass continuous.
TABULATED = {
    "2^1": (1,),
    "3^1": (1,),
    "4^1": (1,),
    "1^2": (),
    "1^3": (),
    "1^4": (),
    "2^1 1^1": (Fraction(1, 2),) * 2,
    "3^1 1^1": (Fraction(1, 2),) * 2,
    "2^2": (Fraction(1, 2),) * 2,
    "2^1 1^2": (Fraction(1, 5),) * 5,
}


def _tabulated_probability(text):
    atoms = [float(a) for a in TABULATED[text]]
    prof = Profile.parse(text)
    if not atoms:
        return 1.0
    pattern = [i + 1 for i, mu in enumerate(prof.multiplicities()) for _ in range(mu)]
    return pattern_prob_oracle(Distribution(atoms), pattern).value


def test_criterion_1_table(capsys):
    start = time.perf_counter()
    code = main(["table1"])
    elapsed = time.perf_counter() - start
    lines = capsys.readouterr().out.splitlines()
    header = lines[0].split("\t")
    rows = {r[0]: dict(zip(header, r)) for r in (line.split("\t") for line in lines[1:])}
    bad = []
    for text in TABULATED:
        got = float(rows[text]["probability"])
        if abs(got - _tabulated_probability(text)) > 1e-6:
            bad.append(text)
    ok = code == 0 and not bad and elapsed < 10.0
    record("criterion 1", ok, f"table of {len(TABULATED)} rows, mismatches={bad}, {elapsed:.2f}s")
    assert code == 0
    assert not bad
    assert elapsed < 10.0


def _uniform_ten_pairs(k):
    # falling power k^(10) / k^20, exactly
    return Fraction(math.perm(k, 10), k**20)


def test_criterion_2_uniform_pairs():
    res = pml_uniform_profile(2, 10)
    k = uniform_profile_k(2, 10)
    best = _uniform_ten_pairs(12)
    beaten = all(best > _uniform_ten_pairs(j) for j in (10, 11, 13, 14))
    ok = k == 12 and res.k == 12 and beaten and res.probability == pytest.approx(float(best), rel=1e-12)
    record("criterion 2", ok, f"k={k}, strict over 10,11,13,14: {beaten}")
    assert k == res.k == 12
    assert beaten
    assert res.probability == pytest.approx(float(best), rel=1e-12)


def test_criterion_3_pair_and_two_singletons():
    res = pml_search(Profile({1: 2, 2: 1}), SearchConfig(kmax=10), force_numeric=True)
    want = math.perm(5, 3) / 5**4
    ok = (res.k == 5 and res.q == 0.0 and abs(res.probability - want) <= 1e-6
          and np.allclose(res.distribution.atoms, 0.2, atol=1e-4))
    record("criterion 3", ok, f"k={res.k}, P={res.probability:.9f}, target {want}")
    assert ok


def _grid_best(n0, n1):
    def neg(p):
        return -(p**n0 * (1 - p) ** n1 + p**n1 * (1 - p) ** n0)

    grid = np.linspace(0.0, 1.0, 2000)
    vals = -neg(grid)
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    refined = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return max(vals[i], -refined.fun)


def test_criterion_4_binary():
    worst = 0.0
    balanced_exact = True
    count = 0
    for n in range(3, 13):
        for n0 in range(1, n // 2 + 1):
            n1 = n - n0
            res = pml_binary(n0, n1)
            worst = max(worst, abs(res.probability - _grid_best(n0, n1)))
            if (n1 - n0) ** 2 <= n:
                balanced_exact &= res.distribution.atoms == (0.5, 0.5)
                balanced_exact &= Fraction(res.probability) == Fraction(1, 2 ** (n - 1))
            count += 1
    ok = worst <= 1e-6 and balanced_exact
    record("criterion 4", ok, f"{count} binary profiles, max |diff|={worst:.2e}, balanced exact: {balanced_exact}")
    assert worst <= 1e-6
    assert balanced_exact


def test_criterion_5_oracle_equivalence():
    rng = np.random.default_rng(20240)
    dists = [Distribution(rng.dirichlet(np.ones(int(rng.integers(1, 5))))) for _ in range(100)]
    patterns = [p for n in range(1, 8) for p in enumerate_patterns(n)]
    start = time.perf_counter()
    worst = 0.0
    for d in dists:
        for pat in patterns:
            fast = pattern_prob(d, pat, fast_path=False).value
            slow = pattern_prob_oracle(d, pat).value
            if slow == 0.0:
                err = abs(fast)
            else:
                err = abs(fast - slow) / slow
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 60.0
    record("criterion 5", ok, f"{len(patterns)} patterns x 100 distributions, max rel err {worst:.1e}, "
                              f"{elapsed:.1f}s")
    assert worst <= 1e-9
    assert elapsed < 60.0


def _certificates(prof):
    # recomputed here from the profile alone, independent of the bounds module
    mus = sorted(prof.multiplicities())
    m, n = len(mus), sum(mus)
    lo_mu, hi_mu = mus[0], mus[-1]
    upper = math.inf if lo_mu == 1 else m + (m - 1) // (2**lo_mu - 2)
    if hi_mu == 1:
        lower = math.inf
    else:
        drop = mus.index(hi_mu)
        lower = m - 1 + sum(Fraction(1, 2**mu) for j, mu in enumerate(mus) if j != drop) / (2**hi_mu - 2)
    phi1 = mus.count(1)
    return upper, lower, Fraction(phi1, n), phi1 <= 1, min(2**m, n - 1)


def _distinct_values(atoms, tol=1e-6):
    vals = sorted(atoms)
    groups = 0
    last = None
    for v in vals:
        if last is None or v - last > tol:
            groups += 1
            last = v
    return groups


def test_criterion_6_certificates():
    results = small_profile_results()
    bad = []
    for prof, res in results.items():
        upper, lower, cap, forced, distinct_cap = _certificates(prof)
        d = res.distribution
        support = d.k if d.q == 0.0 else math.inf  # continuous mass means infinitely many symbols
        checks = [
            lower - 1e-9 <= support <= upper,
            d.q <= cap + 1e-6,
            not forced or d.q == 0.0,
            _distinct_values(d.atoms) <= distinct_cap,
        ]
        if not all(checks):
            bad.append((str(prof), d.atoms, d.q, checks))
    ok = not bad
    record("criterion 6", ok, f"{len(results)} profiles with n <= 8, violations={len(bad)}")
    assert not bad, bad[:5]


def _alpha_by_bisection(r, lo=1.0 + 1e-12, hi=100.0):
    def f(a):
        return -a * math.log(1 - 1 / a) - r

    for _ in range(200):
        mid = (lo + hi) / 2
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def test_criterion_7_ratio_limit():
    start = time.perf_counter()
    k = uniform_profile_k(2, 1000)
    elapsed = time.perf_counter() - start
    alpha = _alpha_by_bisection(2)
    rel = abs(k / 1000 - alpha) / alpha
    ok = rel <= 0.02 and elapsed < 1.0
    record("criterion 7", ok, f"k={k}, alpha={alpha:.10f}, rel diff {rel:.2e}, {elapsed * 1000:.0f} ms")
    assert rel <= 0.02
    assert elapsed < 1.0


def test_criterion_8_convergence_trend():
    rows = convergence_experiment((0.6, 0.4), [10, 100])
    d10, d100 = rows[0].d_bits, rows[1].d_bits
    ok = d100 < d10 and d100 <= 0.02
    record("criterion 8", ok, f"D(n=10)={d10:.3e}, D(n=100)={d100:.3e} bits")
    assert d100 < d10
    assert d100 <= 0.02


def test_criterion_9_em_agreement():
    worst = 0.0
    monotone = True
    for text in TABULATED:
        prof = Profile.parse(text)
        if prof.m == prof.n:
            k = 1
        else:
            k = pml_search(prof, SearchConfig(kmax=10)).k
        exact = pml_search(prof, SearchConfig(kmax=10)).probability
        best = 0.0
        for seed in range(5):
            res = em_pml(prof, EmConfig(k=k, seed=seed))
            best = max(best, res.probability)
            if res.diagnostics.get("estep") == "exact":
                hist = res.diagnostics["log_probability_history"]
                monotone &= all(b >= a - 1e-12 * abs(a) for a, b in zip(hist, hist[1:]))
        worst = max(worst, abs(best - exact) / exact)
    ok = worst <= 1e-3 and monotone
    record("criterion 9", ok, f"max rel gap {worst:.1e} over {len(TABULATED)} profiles, monotone: {monotone}")
    assert worst <= 1e-3
    assert monotone


def test_criterion_10_determinism():
    argv = [sys.executable, "-m", "profilest", "pml", "--em", "--seed", "7", "--estep-threshold", "1",
            "--iterations", "25", "--steps", "5000", "--kmax", "6"]
    text = "a a b b b c d d\n"
    runs = [subprocess.run(argv, input=text, capture_output=True, text=True) for _ in range(2)]
    same = runs[0].stdout == runs[1].stdout and bool(runs[0].stdout)
    method = json.loads(runs[0].stdout)["method"] if runs[0].stdout else None
    ok = same and runs[0].returncode in (0, 3) and method == "em-approx"
    record("criterion 10", ok, f"exit {runs[0].returncode}, {len(runs[0].stdout)} bytes, identical: {same}")
    assert ok, runs[0].stderr
