"""Analytic certificates on any high-profile distribution of a profile.

Support-size brackets, the continuous-mass cap, forced discreteness and the
cap on distinct atom values.  Values are exact (``Fraction`` or ``int``)
wherever the formula allows; ``math.inf`` marks a vacuous bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import InvalidInputError
from .patterns import Profile, is_trivial

__all__ = [
    "BoundsReport",
    "bounds_report",
    "continuous_mass_cap",
    "corollary_flags",
    "distinct_values_cap",
    "is_discrete_forced",
    "support_lower_bound",
    "support_upper_bound",
]


def _require_nontrivial(profile: Profile) -> None:
    if is_trivial(profile):
        raise InvalidInputError(f"profile {profile} is trivial: every distribution is optimal")


def support_upper_bound(profile: Profile) -> int | float:
    """``floor(m + (m-1)/(2**mu_min - 2))``, or ``inf`` when some symbol appears once."""
    _require_nontrivial(profile)
    if profile.mu_min == 1:
        return math.inf
    m = profile.m
    return m + (m - 1) // (2**profile.mu_min - 2)


def support_lower_bound(profile: Profile) -> Fraction | float:
    """``m - 1 + sum_{j != i*} 2**-mu_j / (2**mu_max - 2)`` with ``i*`` a most frequent symbol.

    ``inf`` for all-distinct profiles (``mu_max = 1``).
    """
    _require_nontrivial(profile)
    mu_max = profile.mu_max
    if mu_max == 1:
        return math.inf
    rest = profile.multiplicities()[1:]  # drop one symbol of multiplicity mu_max
    total = sum((Fraction(1, 2**mu) for mu in rest), Fraction(0))
    return profile.m - 1 + total / (2**mu_max - 2)


def continuous_mass_cap(profile: Profile) -> Fraction:
    """Fraction of the sample made of singletons, ``phi_1 / n``."""
    _require_nontrivial(profile)
    return Fraction(profile.phi1, profile.n)


def is_discrete_forced(profile: Profile) -> bool:
    """Length at least 2 with at most one singleton: no continuous part."""
    return profile.n >= 2 and profile.phi1 <= 1


def distinct_values_cap(profile: Profile) -> int:
    """At most ``min(2**m, n - 1)`` distinct atom probabilities."""
    _require_nontrivial(profile)
    m, n = profile.m, profile.n
    return n - 1 if m >= n.bit_length() else min(2**m, n - 1)


def corollary_flags(profile: Profile) -> tuple[bool, bool]:
    """``(k_equals_m, s_exceeds_m)``.

    ``k_equals_m``: ``mu_min > log2(m + 1)``, so no unseen symbols.
    ``s_exceeds_m``: ``mu_max < log2(sqrt(m) + 1)``, so more symbols than seen.
    Both comparisons are done in integers.
    """
    _require_nontrivial(profile)
    m = profile.m
    k_equals_m = 2**profile.mu_min > m + 1
    # mu_max < log2(sqrt(m) + 1)  <=>  (2**mu_max - 1)**2 < m
    s_exceeds_m = (2**profile.mu_max - 1) ** 2 < m
    return k_equals_m, s_exceeds_m


@dataclass(frozen=True)
class BoundsReport:
    support_upper: int | float
    support_lower: Fraction | float
    continuous_cap: Fraction
    discrete_forced: bool
    distinct_values_cap: int
    k_equals_m: bool
    s_exceeds_m: bool

    def to_json(self) -> dict:
        def num(x):
            if isinstance(x, float) and math.isinf(x):
                return "inf"
            if isinstance(x, Fraction):
                return int(x) if x.denominator == 1 else float(f"{float(x):.12g}")
            return x

        return {
            "support_upper": num(self.support_upper),
            "support_lower": num(self.support_lower),
            "continuous_cap": num(self.continuous_cap),
            "discrete_forced": self.discrete_forced,
            "distinct_values_cap": self.distinct_values_cap,
            "k_equals_m": self.k_equals_m,
            "s_exceeds_m": self.s_exceeds_m,
        }

    @property
    def min_support(self) -> int | float:
        """Smallest integer support size allowed by the lower bound."""
        lo = self.support_lower
        return lo if isinstance(lo, float) and math.isinf(lo) else math.ceil(lo)

    def violations(self, atoms, q: float, *, tol: float = 1e-6) -> list[str]:
        """Reasons a candidate ``(atoms, q)`` breaks this report (empty when fine)."""
        out = []
        discrete = q <= tol
        size = len(atoms) if discrete else math.inf
        if size > self.support_upper:
            out.append(f"support {size} above upper bound {self.support_upper}")
        if size < self.min_support:
            out.append(f"support {size} below lower bound {self.support_lower}")
        if q > float(self.continuous_cap) + tol:
            out.append(f"continuous mass {q:.3g} above cap {self.continuous_cap}")
        if self.discrete_forced and not discrete:
            out.append(f"continuous mass {q:.3g} but the profile forces a discrete optimum")
        values = _distinct(atoms, tol)
        if values > self.distinct_values_cap:
            out.append(f"{values} distinct atom values above cap {self.distinct_values_cap}")
        return out


def _distinct(atoms, tol: float) -> int:
    vals = sorted(atoms)
    count = 0
    prev = None
    for v in vals:
        if prev is None or v - prev > tol * max(1.0, abs(v)):
            count += 1
        prev = v
    return count


def bounds_report(profile: Profile) -> BoundsReport:
    k_eq, s_gt = corollary_flags(profile)
    return BoundsReport(
        support_upper=support_upper_bound(profile),
        support_lower=support_lower_bound(profile),
        continuous_cap=continuous_mass_cap(profile),
        discrete_forced=is_discrete_forced(profile),
        distinct_values_cap=distinct_values_cap(profile),
        k_equals_m=k_eq,
        s_exceeds_m=s_gt,
    )
