"""Patterns and profiles of token sequences.

A pattern replaces every token by the order of its first appearance, so
``abracadabra`` becomes ``1 2 3 1 4 1 5 1 2 3 1``.  A profile records how
many symbols appear exactly ``mu`` times; it is a sufficient statistic for
the probability any i.i.d. source assigns to a pattern.
"""

from __future__ import annotations

import re
from collections import Counter
from collections.abc import Hashable, Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property

from .errors import InvalidInputError

__all__ = [
    "Pattern",
    "Profile",
    "canonical_pattern",
    "enumerate_patterns",
    "enumerate_profiles",
    "is_trivial",
    "pattern_of",
    "profile_of",
    "profile_of_sequence",
]


@dataclass(frozen=True)
class Pattern:
    """A pattern: 1-based first-appearance indices.

    Construction validates the index property: the first entry is 1 and
    every entry is at most one more than the running maximum.
    """

    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        object.__setattr__(self, "indices", idx)
        top = 0
        for pos, i in enumerate(idx):
            if i < 1 or i > top + 1:
                raise InvalidInputError(
                    f"not a pattern: entry {i} at position {pos} (running max {top})"
                )
            top = max(top, i)

    @classmethod
    def parse(cls, text: str) -> "Pattern":
        """Parse ``"1 1 2 3"`` or, when every index is a single digit, ``"1123"``."""
        text = text.strip()
        if not text:
            raise InvalidInputError("empty pattern literal")
        parts = text.replace(",", " ").split()
        if len(parts) == 1 and parts[0].isdigit() and len(parts[0]) > 1:
            parts = list(parts[0])
        try:
            return cls(tuple(int(p) for p in parts))
        except ValueError as exc:
            raise InvalidInputError(f"bad pattern literal {text!r}") from exc

    @property
    def n(self) -> int:
        return len(self.indices)

    @property
    def m(self) -> int:
        return max(self.indices, default=0)

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self) -> Iterator[int]:
        return iter(self.indices)

    def __str__(self) -> str:
        return " ".join(map(str, self.indices))


@dataclass(frozen=True)
class Profile:
    """Sparse map multiplicity -> prevalence.

    ``Profile({1: 2, 2: 2, 5: 1})`` is the profile of *abracadabra*.  Entries
    with zero prevalence are dropped.  The empty profile (``n = 0``) exists
    only so that the empty pattern has a profile.
    """

    prevalences: tuple[tuple[int, int], ...]

    def __init__(self, prevalences: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        items = prevalences.items() if isinstance(prevalences, Mapping) else prevalences
        merged: dict[int, int] = {}
        for mu, phi in items:
            mu, phi = int(mu), int(phi)
            if mu < 1:
                raise InvalidInputError(f"multiplicity must be positive, got {mu}")
            if phi < 0:
                raise InvalidInputError(f"prevalence must be non-negative, got {phi}")
            if phi:
                merged[mu] = merged.get(mu, 0) + phi
        object.__setattr__(self, "prevalences", tuple(sorted(merged.items())))

    # -- constructors -----------------------------------------------------

    @classmethod
    def from_multiplicities(cls, multiplicities: Iterable[int]) -> "Profile":
        """Profile of a collection of per-symbol counts (zeros ignored)."""
        counts = Counter(int(mu) for mu in multiplicities if int(mu) != 0)
        return cls(counts)

    @classmethod
    def parse(cls, text: str) -> "Profile":
        """Parse caret notation, e.g. ``"1^2 2^2 5^1"`` or ``"2^1 1^2"``.

        Factors are whitespace separated, in any order; ``^1`` may be omitted.
        Repeated multiplicities are merged.
        """
        factors = text.split()
        if not factors:
            raise InvalidInputError("empty profile literal")
        out: dict[int, int] = {}
        for factor in factors:
            match = _FACTOR.fullmatch(factor)
            if match is None:
                raise InvalidInputError(f"bad profile factor {factor!r}")
            mu = int(match.group(1))
            phi = int(match.group(2)) if match.group(2) is not None else 1
            if mu < 1 or phi < 1:
                raise InvalidInputError(f"bad profile factor {factor!r}")
            out[mu] = out.get(mu, 0) + phi
        return cls(out)

    # -- derived quantities ----------------------------------------------

    def as_dict(self) -> dict[int, int]:
        return dict(self.prevalences)

    def __getitem__(self, mu: int) -> int:
        return self.as_dict().get(mu, 0)

    def __iter__(self):
        return iter(self.prevalences)

    def __len__(self) -> int:
        return len(self.prevalences)

    @cached_property
    def n(self) -> int:
        return sum(mu * phi for mu, phi in self.prevalences)

    @cached_property
    def m(self) -> int:
        return sum(phi for _, phi in self.prevalences)

    @property
    def mu_min(self) -> int:
        return self.prevalences[0][0] if self.prevalences else 0

    @property
    def mu_max(self) -> int:
        return self.prevalences[-1][0] if self.prevalences else 0

    @property
    def phi1(self) -> int:
        return self[1]

    def multiplicities(self) -> list[int]:
        """Per-symbol multiplicities, nonincreasing."""
        out: list[int] = []
        for mu, phi in reversed(self.prevalences):
            out.extend([mu] * phi)
        return out

    def __str__(self) -> str:
        return " ".join(f"{mu}^{phi}" for mu, phi in self.prevalences)

    def __repr__(self) -> str:
        return f"Profile({self.as_dict()!r})"


_FACTOR = re.compile(r"(\d+)(?:\^(\d+))?")


def pattern_of(seq: Sequence[Hashable]) -> Pattern:
    """Pattern of a token sequence.

    Raises InvalidInputError for an empty sequence.
    """
    if len(seq) == 0:
        raise InvalidInputError("empty sequence has no pattern")
    index: dict[Hashable, int] = {}
    out = []
    for tok in seq:
        if tok not in index:
            index[tok] = len(index) + 1
        out.append(index[tok])
    return Pattern(tuple(out))


def profile_of(pattern: Pattern | Sequence[int]) -> Profile:
    if not isinstance(pattern, Pattern):
        pattern = Pattern(tuple(pattern))
    return Profile.from_multiplicities(Counter(pattern.indices).values())


def profile_of_sequence(seq: Iterable[Hashable]) -> Profile:
    """Profile straight from token multiplicities, without forming the pattern."""
    return Profile.from_multiplicities(Counter(seq).values())


def canonical_pattern(profile: Profile) -> Pattern:
    """The unique pattern ``1^mu1 2^mu2 ...`` with nonincreasing run lengths."""
    out: list[int] = []
    for sym, mu in enumerate(profile.multiplicities(), start=1):
        out.extend([sym] * mu)
    return Pattern(tuple(out))


def is_trivial(profile: Profile) -> bool:
    """True for the profiles of the empty pattern and of the pattern ``1``."""
    return profile.n <= 1


def enumerate_profiles(n: int) -> Iterator[Profile]:
    """All profiles of length ``n``, i.e. integer partitions of ``n``."""
    for parts in _partitions(n, n):
        yield Profile.from_multiplicities(parts)


def _partitions(n: int, largest: int) -> Iterator[list[int]]:
    if n == 0:
        yield []
        return
    for first in range(min(n, largest), 0, -1):
        for rest in _partitions(n - first, first):
            yield [first, *rest]


def enumerate_patterns(n: int) -> Iterator[Pattern]:
    """All patterns of length ``n`` (restricted growth strings), lexicographically."""
    if n < 1:
        return
    seq = [1] * n
    top = [1] * n  # top[i] = max(seq[:i+1])
    while True:
        yield Pattern(tuple(seq))
        i = n - 1
        while i > 0 and seq[i] > top[i - 1]:
            i -= 1
        if i == 0:
            return
        seq[i] += 1
        top[i] = max(top[i - 1], seq[i])
        for j in range(i + 1, n):
            seq[j] = 1
            top[j] = top[i]
