"""Empirical-frequency baseline, divergences and future-sample predictions.

Distributions are compared through their nonincreasing atom vectors padded
with zeros, which is the best alignment for these comparisons.  Logarithms
are base 2.
"""

from __future__ import annotations

import math
from collections import Counter
from collections.abc import Hashable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NotApplicableError
from .patterns import Profile
from .pml_exact import PmlResult, SearchConfig, pml_search
from .probability import MASS_TOL, Distribution

__all__ = [
    "AlphaVector",
    "ConvergenceRow",
    "convergence_experiment",
    "entropy",
    "expected_new_symbols",
    "kl_divergence",
    "l1_distance",
    "ml_distribution",
]


def ml_distribution(seq: Sequence[Hashable]) -> Distribution:
    """Relative frequencies of the tokens, nonincreasing."""
    if len(seq) == 0:
        raise InvalidInputError("empty sequence")
    n = len(seq)
    return Distribution([c / n for c in Counter(seq).values()])


def _padded(a: Distribution, b: Distribution) -> tuple[np.ndarray, np.ndarray]:
    size = max(a.k, b.k)
    pa = np.zeros(size)
    pb = np.zeros(size)
    pa[: a.k] = a.atoms
    pb[: b.k] = b.atoms
    return pa, pb


def _require_discrete(*ds: Distribution) -> None:
    for d in ds:
        if d.q > MASS_TOL:
            raise NotApplicableError(f"{d} has continuous mass; divergence needs discrete inputs")


def entropy(a: Distribution) -> float:
    """Shannon entropy in bits of a discrete distribution."""
    _require_discrete(a)
    p = np.array(a.atoms)
    return float(-(p * np.log2(p)).sum())


def kl_divergence(a: Distribution, b: Distribution) -> float:
    """``D(a || b)`` in bits; ``inf`` when ``a`` puts mass where ``b`` has none."""
    _require_discrete(a, b)
    pa, pb = _padded(a, b)
    on = pa > 0
    if np.any(pb[on] == 0):
        return math.inf
    return max(0.0, float((pa[on] * np.log2(pa[on] / pb[on])).sum()))


def l1_distance(a: Distribution, b: Distribution) -> float:
    """``sum |a_i - b_i|`` over aligned atoms plus the continuous-mass difference."""
    pa, pb = _padded(a, b)
    return float(np.abs(pa - pb).sum() + abs(a.q - b.q))


def expected_new_symbols(d: Distribution, observed_m: int, t: int) -> float:
    """Expected number of distinct unseen values in ``t`` further draws.

    The largest ``observed_m`` atoms stand for the symbols already seen;
    every other atom contributes ``1 - (1 - p)**t`` and every continuous
    draw is new.
    """
    if observed_m < 0 or t < 0:
        raise InvalidInputError("observed_m and t must be non-negative")
    rest = np.array(d.atoms[observed_m:])
    if not rest.size:
        return d.q * t
    with np.errstate(divide="ignore"):  # an atom of mass 1 gives log1p(-1) = -inf, term 1
        unseen = -np.expm1(t * np.log1p(-rest)).sum()
    return float(unseen + d.q * t)


@dataclass(frozen=True)
class AlphaVector:
    """Source probabilities ``alpha_1 >= ... >= alpha_m > 0`` summing to one."""

    alpha: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(a) for a in self.alpha)
        if not vals or any(a <= 0 for a in vals):
            raise InvalidInputError("alpha needs positive entries")
        if any(x < y for x, y in zip(vals, vals[1:])):
            raise InvalidInputError("alpha must be nonincreasing")
        if abs(math.fsum(vals) - 1.0) > 1e-12:
            raise InvalidInputError(f"alpha sums to {math.fsum(vals)!r}, not 1")
        object.__setattr__(self, "alpha", vals)

    def counts(self, n: int) -> list[int]:
        """Per-symbol counts ``alpha_i * n``; they must be integers."""
        out = []
        for a in self.alpha:
            c = a * n
            if abs(c - round(c)) > 1e-9 or round(c) < 1:
                raise InvalidInputError(f"alpha_i * n = {c!r} is not a positive integer for n={n}")
            out.append(int(round(c)))
        return out

    def profile(self, n: int) -> Profile:
        return Profile.from_multiplicities(self.counts(n))

    def distribution(self) -> Distribution:
        return Distribution(self.alpha)


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    k: int
    q: float
    d_bits: float
    l1: float
    result: PmlResult

    def tsv(self) -> str:
        return "\t".join([str(self.n), str(self.k), _fmt(self.q), _fmt(self.d_bits), _fmt(self.l1)])


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return f"{x:.12g}"


def convergence_experiment(alpha: AlphaVector | Sequence[float], n_values: Sequence[int],
                           cfg: SearchConfig | None = None) -> list[ConvergenceRow]:
    """PML of the ideal profile ``prod (alpha_i n)^1`` for each ``n``, scored against ``alpha``."""
    if not isinstance(alpha, AlphaVector):
        alpha = AlphaVector(tuple(alpha))
    truth = alpha.distribution()
    rows = []
    for n in n_values:
        result = pml_search(alpha.profile(n), cfg)
        est = result.distribution
        d_bits = kl_divergence(truth, est) if est.q <= MASS_TOL else math.inf
        rows.append(ConvergenceRow(n, est.k, est.q, d_bits, l1_distance(truth, est), result))
    return rows
