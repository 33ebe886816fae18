"""Probability that an i.i.d. source assigns to a pattern.

A distribution is a nonincreasing vector of atom probabilities plus the
leftover continuous mass ``q``; draws from the continuous part never repeat.
Pattern probability sums, over which singleton symbols came from the
continuous part and over injections of the other symbols into atoms, the
product of ``p**mu`` terms (times ``q`` per continuous singleton).

The sum is evaluated without listing injections: atoms are absorbed one at a
time into a vector indexed by how many symbols of each multiplicity class
are still unplaced, so cost is ``k * prod(phi_mu + 1) * (#classes)`` rather
than the falling power ``k^(m)``.
"""

from __future__ import annotations

import enum
import math
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import (
    InternalError,
    InvalidDistributionError,
    InvalidInputError,
    NotApplicableError,
    ResourceLimitError,
)
from .patterns import Pattern, Profile, profile_of

__all__ = [
    "DEFAULT_MAX_WORK",
    "Distribution",
    "PatternProbability",
    "ProbMethod",
    "StateSpace",
    "check_work",
    "dp_work",
    "log_pattern_prob_profile",
    "max_work",
    "pattern_distribution_oracle",
    "pattern_prob",
    "pattern_prob_grad",
    "pattern_prob_oracle",
    "pattern_prob_profile",
    "pattern_prob_uniform",
    "state_space",
]

MASS_TOL = 1e-9
DEFAULT_MAX_WORK = 10**9
ORACLE_MAX_SEQUENCES = 10**7


def max_work() -> int:
    """Resource cap on DP work, overridable through ``PROFILEST_MAX_WORK``."""
    env = os.environ.get("PROFILEST_MAX_WORK")
    if env:
        try:
            return int(float(env))
        except ValueError as exc:
            raise InvalidInputError(f"PROFILEST_MAX_WORK={env!r} is not a number") from exc
    return DEFAULT_MAX_WORK


@dataclass(frozen=True)
class Distribution:
    """Monotone atom vector; ``q = 1 - sum(atoms)`` is continuous mass.

    Atoms are sorted nonincreasing and zero atoms are dropped.  Passing ``q``
    explicitly checks that atoms and ``q`` add up to one.
    """

    atoms: tuple[float, ...]

    def __init__(self, atoms: Iterable[float] = (), q: float | None = None):
        vals = [float(a) for a in atoms]
        for a in vals:
            if not math.isfinite(a) or a < 0.0 or a > 1.0 + MASS_TOL:
                raise InvalidDistributionError(f"atom {a!r} outside [0, 1]")
        vals = sorted((min(a, 1.0) for a in vals if a > 0.0), reverse=True)
        total = math.fsum(vals)
        if total > 1.0 + MASS_TOL:
            raise InvalidDistributionError(f"discrete mass {total!r} exceeds 1")
        if q is not None:
            if not math.isfinite(q) or q < -MASS_TOL or q > 1.0 + MASS_TOL:
                raise InvalidDistributionError(f"continuous mass {q!r} outside [0, 1]")
            if abs(total + q - 1.0) > MASS_TOL:
                raise InvalidDistributionError(
                    f"atoms sum to {total!r} and q={q!r}: total mass is not 1"
                )
        object.__setattr__(self, "atoms", tuple(vals))

    @classmethod
    def uniform(cls, k: int) -> "Distribution":
        if k < 1:
            raise InvalidInputError("uniform distribution needs k >= 1")
        return cls([1.0 / k] * k)

    @property
    def k(self) -> int:
        return len(self.atoms)

    @property
    def discrete_mass(self) -> float:
        return min(1.0, math.fsum(self.atoms))

    @property
    def q(self) -> float:
        rest = 1.0 - math.fsum(self.atoms)
        return rest if rest > 1e-12 else 0.0  # float round-off is not mass

    @property
    def total_size(self) -> float:
        """``k`` if discrete, infinity if any continuous mass."""
        return float(self.k) if self.q <= MASS_TOL else math.inf

    def is_discrete(self, tol: float = MASS_TOL) -> bool:
        return self.q <= tol

    def is_uniform(self) -> bool:
        return self.k > 0 and self.atoms[0] == self.atoms[-1] and self.q <= MASS_TOL

    def as_array(self) -> np.ndarray:
        return np.asarray(self.atoms, dtype=np.float64)

    def __str__(self) -> str:
        body = ", ".join(f"{a:.6g}" for a in self.atoms)
        return f"({body})" + (f" + q={self.q:.6g}" if self.q > MASS_TOL else "")


class ProbMethod(str, enum.Enum):
    EXACT_SUM = "exact-sum"
    UNIFORM_FAST_PATH = "uniform-fast-path"
    BRUTE_FORCE_ORACLE = "brute-force-oracle"


@dataclass(frozen=True)
class PatternProbability:
    value: float
    log_value: float
    method: ProbMethod

    def __float__(self) -> float:
        return self.value

    @property
    def log2_value(self) -> float:
        return self.log_value / math.log(2.0)


# ---------------------------------------------------------------------------
# state space


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Mixed-radix encoding of 'unplaced symbols per multiplicity class'."""

    mus: np.ndarray       # class multiplicities, ascending
    phis: np.ndarray      # class prevalences
    strides: np.ndarray
    counts: np.ndarray    # (n_states, n_classes)
    phi1: int             # singleton prevalence (0 if none)

    @property
    def n_states(self) -> int:
        return self.counts.shape[0]


@lru_cache(maxsize=4096)
def state_space(profile: Profile) -> StateSpace:
    mus = np.array([mu for mu, _ in profile.prevalences], dtype=np.int64)
    phis = np.array([phi for _, phi in profile.prevalences], dtype=np.int64)
    radices = phis + 1
    strides = np.ones(len(mus), dtype=np.int64)
    for c in range(1, len(mus)):
        strides[c] = strides[c - 1] * radices[c - 1]
    n_states = int(np.prod(radices)) if len(mus) else 1
    idx = np.arange(n_states, dtype=np.int64)
    counts = np.empty((n_states, len(mus)), dtype=np.int64)
    for c in range(len(mus)):
        counts[:, c] = (idx // strides[c]) % radices[c]
    return StateSpace(mus, phis, strides, counts, profile.phi1)


def dp_work(profile: Profile, k: int) -> int:
    """Inner-loop operation count of one probability evaluation with ``k`` atoms."""
    space = state_space(profile)
    return max(1, k) * space.n_states * max(1, len(space.mus))


def check_work(profile: Profile, k: int, cap: int | None = None, *, gradient: bool = False) -> None:
    """Raise ResourceLimitError if evaluating with ``k`` atoms exceeds ``cap``."""
    cap = max_work() if cap is None else cap
    work = dp_work(profile, k) * (max(1, k) if gradient else 1)
    if work > cap:
        raise ResourceLimitError(
            f"pattern probability needs ~{work:.3g} operations (cap {cap:.3g}); "
            "raise PROFILEST_MAX_WORK to allow it"
        )


def _log(x: float) -> float:
    return math.log(x) if x > 0.0 else -math.inf


def log_pattern_prob_profile(profile: Profile, atoms: Sequence[float] | np.ndarray, q: float,
                             *, cap: int | None = None) -> float:
    """Natural log of the pattern probability for raw ``(atoms, q)``; no validation.

    Used by optimizers that move through points that need not be sorted.
    """
    atoms = np.ascontiguousarray(atoms, dtype=np.float64)
    if profile.n == 0:
        return 0.0
    check_work(profile, atoms.shape[0], cap)
    sp = state_space(profile)
    return float(_kernels.log_prob(atoms, float(q), sp.mus, sp.counts, sp.strides, sp.phi1))


def pattern_prob_grad(profile: Profile, atoms: Sequence[float] | np.ndarray, q: float,
                      *, cap: int | None = None) -> tuple[float, np.ndarray, float]:
    """Log probability and its partial derivatives.

    Returns ``(log P, dP/dp / P, dP/dq / P)`` with ``q`` treated as a free
    coordinate.  Multiply the ratios by ``exp(log P)`` for raw partials.
    """
    atoms = np.ascontiguousarray(atoms, dtype=np.float64)
    check_work(profile, atoms.shape[0], cap, gradient=True)
    sp = state_space(profile)
    grad = np.empty(atoms.shape[0] + 1)
    log_p = _kernels.log_prob_grad(atoms, float(q), sp.mus, sp.counts, sp.strides, sp.phi1, grad)
    return float(log_p), grad[:-1], float(grad[-1])


def _finish(log_value: float, method: ProbMethod) -> PatternProbability:
    value = math.exp(log_value) if log_value != -math.inf else 0.0
    if value > 1.0:
        if value > 1.0 + 1e-12:
            raise InternalError(f"pattern probability {value!r} exceeds 1")
        value, log_value = 1.0, 0.0
    return PatternProbability(value, log_value, method)


def pattern_prob_profile(d: Distribution, profile: Profile, *, fast_path: bool = True,
                         cap: int | None = None) -> PatternProbability:
    """Pattern probability of any pattern with the given profile."""
    if profile.n == 0:
        return PatternProbability(1.0, 0.0, ProbMethod.EXACT_SUM)
    if fast_path and d.is_uniform():
        return pattern_prob_uniform(d.k, profile.m, profile.n)
    return _finish(log_pattern_prob_profile(profile, d.as_array(), d.q, cap=cap), ProbMethod.EXACT_SUM)


def pattern_prob(d: Distribution, pattern: Pattern | Sequence[int], *, fast_path: bool = True,
                 cap: int | None = None) -> PatternProbability:
    """Exact probability that ``d`` generates a sequence with this pattern.

    Depends on the pattern only through its profile.  ``fast_path`` routes
    uniform discrete distributions to the falling-power formula.  Raises
    ResourceLimitError when the DP work exceeds ``cap``
    (default ``PROFILEST_MAX_WORK`` or 1e9).
    """
    if not isinstance(pattern, Pattern):
        pattern = Pattern(tuple(pattern))
    return pattern_prob_profile(d, profile_of(pattern), fast_path=fast_path, cap=cap)


def _log_falling(k: int, m: int) -> float:
    return math.lgamma(k + 1) - math.lgamma(k - m + 1)


def pattern_prob_uniform(k: int, m: int, n: int) -> PatternProbability:
    """``k^(m) / k^n`` (falling power over power): uniform(k) on any ``n``-long, ``m``-symbol pattern."""
    if k < 1 or m < 0 or n < 0:
        raise InvalidInputError(f"bad arguments k={k}, m={m}, n={n}")
    if m > n or (n > 0 and m == 0):
        raise InvalidInputError(f"a pattern of length {n} cannot have {m} symbols")
    if m > k:
        return PatternProbability(0.0, -math.inf, ProbMethod.UNIFORM_FAST_PATH)
    if n * math.log2(k) <= 4000:
        exact = Fraction(math.perm(k, m), k**n)
        value = float(exact)
        log_value = math.log(exact.numerator) - math.log(exact.denominator)
    else:
        log_value = _log_falling(k, m) - n * math.log(k)
        value = math.exp(log_value)
    return PatternProbability(value, log_value, ProbMethod.UNIFORM_FAST_PATH)


# ---------------------------------------------------------------------------
# brute-force oracle


def _patterns_of_rows(seqs: np.ndarray) -> np.ndarray:
    """Pattern of every row of an integer array, vectorized across rows."""
    rows, n = seqs.shape
    out = np.zeros_like(seqs)
    out[:, 0] = 1
    top = np.ones(rows, dtype=seqs.dtype)
    for i in range(1, n):
        label = np.zeros(rows, dtype=seqs.dtype)
        for j in range(i):
            hit = (seqs[:, i] == seqs[:, j]) & (label == 0)
            label[hit] = out[hit, j]
        fresh = label == 0
        top[fresh] += 1
        label[fresh] = top[fresh]
        out[:, i] = label
    return out


@lru_cache(maxsize=256)
def _oracle_table(atoms: tuple[float, ...], n: int) -> dict[tuple[int, ...], float]:
    k = len(atoms)
    p = np.asarray(atoms)
    seqs = np.indices((k,) * n).reshape(n, -1).T
    probs = np.prod(p[seqs], axis=1)
    pats = _patterns_of_rows(seqs)
    keys, inverse = np.unique(pats, axis=0, return_inverse=True)
    sums = np.bincount(inverse.ravel(), weights=probs, minlength=len(keys))
    return {tuple(int(v) for v in key): float(s) for key, s in zip(keys, sums)}


def pattern_distribution_oracle(d: Distribution, n: int) -> dict[tuple[int, ...], float]:
    """Probability of every length-``n`` pattern, by summing over all ``k**n`` sequences."""
    if not d.is_discrete():
        raise NotApplicableError("the enumeration oracle needs a discrete distribution")
    if d.k == 0 or n < 1:
        raise InvalidInputError("the enumeration oracle needs k >= 1 and n >= 1")
    if d.k**n > ORACLE_MAX_SEQUENCES:
        raise ResourceLimitError(f"{d.k}**{n} sequences exceed the oracle limit {ORACLE_MAX_SEQUENCES}")
    return _oracle_table(d.atoms, n)


def pattern_prob_oracle(d: Distribution, pattern: Pattern | Sequence[int]) -> PatternProbability:
    """Independent check of ``pattern_prob``: enumerate every sequence over the support."""
    if not isinstance(pattern, Pattern):
        pattern = Pattern(tuple(pattern))
    table = pattern_distribution_oracle(d, pattern.n)
    value = table.get(pattern.indices, 0.0)
    return PatternProbability(value, _log(value), ProbMethod.BRUTE_FORCE_ORACLE)
