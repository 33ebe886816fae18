"""Expectation maximization over symbol-to-atom assignments.

The pattern probability is a sum, over injections of the pattern's symbols
into the atoms (singletons may instead land on the continuous part), of
``prod p_{f(j)}**mu_j * q**(#continuous)``.  Treating the injection as the
latent variable, the E-step is the posterior expected number of
observations on every atom and on the continuous part; the M-step divides
those counts by ``n``.

Small instances enumerate every injection.  Larger ones run Metropolis
chains that either swap two symbols' atoms (or move a symbol to an unused
atom) or move a singleton between an atom and the continuous part.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple, TextIO

import numpy as np

from . import _kernels
from .bounds import bounds_report
from .errors import InfeasibleError, InvalidInputError, ResourceLimitError
from .patterns import Pattern, Profile, is_trivial, profile_of
from .pml_exact import PmlMethod, PmlResult
from .probability import (
    Distribution,
    log_pattern_prob_profile,
    max_work,
    pattern_prob_profile,
)

__all__ = [
    "EmConfig",
    "ProbabilityEstimate",
    "em_pml",
    "em_probability_estimate",
    "estep_exact",
    "estep_size",
]

FLOOR = 1e-12
PRUNE_TOL = 1e-10
STOP_GAIN = 1e-12
MCMC_SETTLED = 1e-4


@dataclass(frozen=True)
class EmConfig:
    """EM settings.

    ``exact_estep_threshold`` caps the number of enumerated assignments;
    above it the E-step is sampled by ``chains`` Metropolis chains of
    ``mcmc_steps_per_estep`` steps, the first ``burn_in`` of which are
    discarded.
    """

    k: int
    q_enabled: bool = True
    iterations: int = 500
    chains: int = 4
    mcmc_steps_per_estep: int = 20000
    burn_in: int = 2000
    seed: int = 0
    exact_estep_threshold: int = 200_000

    def __post_init__(self):
        for name in ("k", "iterations", "chains", "mcmc_steps_per_estep", "burn_in",
                     "exact_estep_threshold"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be >= 1")
        if self.burn_in >= self.mcmc_steps_per_estep:
            raise InvalidInputError("burn_in must be smaller than mcmc_steps_per_estep")


class ProbabilityEstimate(NamedTuple):
    value: float
    std_error: float
    samples: int


def _as_profile(p: Pattern | Profile) -> Profile:
    return p if isinstance(p, Profile) else profile_of(p)


def _check_feasible(profile: Profile, k: int, q_enabled: bool) -> None:
    if q_enabled:
        if k < profile.m - profile.phi1:
            raise InfeasibleError(
                f"{profile.m - profile.phi1} repeated symbols cannot fit on {k} atoms"
            )
    elif k < profile.m:
        raise InfeasibleError(f"{profile.m} symbols cannot fit injectively on {k} atoms")


def _placements(profile: Profile, k: int, q_enabled: bool) -> range:
    """Numbers ``c`` of singletons sent to the continuous part."""
    c_max = profile.phi1 if q_enabled else 0
    return range(max(0, profile.m - k), c_max + 1)


def estep_size(profile: Profile, k: int, q_enabled: bool) -> int:
    """Rows the exact E-step enumerates (singletons on the continuous part are exchangeable)."""
    return sum(math.perm(k, profile.m - c) for c in _placements(profile, k, q_enabled))


class _Enumeration:
    """Every injection of the placed symbols, grouped by continuous count ``c``."""

    def __init__(self, profile: Profile, k: int, q_enabled: bool):
        self.mus = np.array(profile.multiplicities(), dtype=np.float64)
        self.k = k
        self.phi1 = profile.phi1
        self.blocks = []
        for c in _placements(profile, k, q_enabled):
            placed = profile.m - c
            rows = list(itertools.permutations(range(k), placed))
            perms = np.array(rows, dtype=np.intp).reshape(len(rows), placed)
            self.blocks.append((c, perms, math.log(math.comb(self.phi1, c))))


def estep_exact(enum: _Enumeration, atoms: np.ndarray, q: float) -> tuple[float, np.ndarray]:
    """``(log P, expected counts)``; counts has ``k`` atom entries then the continuous one."""
    with np.errstate(divide="ignore"):
        log_atoms = np.log(atoms)
        log_q = math.log(q) if q > 0.0 else -math.inf
    logs = []
    for c, perms, log_ways in enum.blocks:
        if c > 0 and log_q == -math.inf:
            logs.append(None)
            continue
        mus = enum.mus[: perms.shape[1]]
        logs.append(log_atoms[perms] @ mus + (c * log_q if c else 0.0) + log_ways)
    top = max((lw.max() for lw in logs if lw is not None and lw.size), default=-math.inf)
    if top == -math.inf:
        return -math.inf, np.zeros(enum.k + 1)
    total = 0.0
    counts = np.zeros(enum.k + 1)
    for (c, perms, _), lw in zip(enum.blocks, logs):
        if lw is None:
            continue
        w = np.exp(lw - top)
        total += w.sum()
        mus = enum.mus[: perms.shape[1]]
        counts[: enum.k] += np.bincount(perms.ravel(), weights=(w[:, None] * mus).ravel(),
                                        minlength=enum.k)
        counts[enum.k] += c * w.sum()
    return top + math.log(total), counts / total


class _Chains:
    """Persistent Metropolis chains; each owns a generator split from the seed."""

    def __init__(self, profile: Profile, k: int, cfg: EmConfig):
        self.mus = np.array(profile.multiplicities(), dtype=np.float64)
        m = self.mus.shape[0]
        self.singles = np.flatnonzero(self.mus == 1.0).astype(np.int64)
        self.k = k
        self.cfg = cfg
        self.rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(cfg.chains)]
        self.states = []
        for _ in range(cfg.chains):
            assign = np.full(m, -1, dtype=np.int64)
            owner = np.full(k, -1, dtype=np.int64)
            for j in range(min(k, m)):
                assign[j] = j
                owner[j] = j
            self.states.append((assign, owner))
        self._no_trace = np.zeros(0, dtype=np.int64)

    def estep(self, atoms: np.ndarray, q: float) -> tuple[np.ndarray, float]:
        cfg = self.cfg
        log_atoms = np.log(atoms)
        log_q = math.log(q) if q > 0.0 else -math.inf
        span = cfg.mcmc_steps_per_estep - cfg.burn_in
        counts = np.zeros(self.k + 1)
        accepted = 0
        for rng, (assign, owner) in zip(self.rngs, self.states):
            uniforms = rng.random(4 * cfg.mcmc_steps_per_estep)
            acc = np.zeros(self.k + 1)
            accepted += _kernels.mcmc_chain(log_atoms, log_q, self.mus, self.singles, assign, owner,
                                            uniforms, cfg.burn_in, acc, self._no_trace)
            counts += acc / span
        return counts / cfg.chains, accepted / (cfg.chains * cfg.mcmc_steps_per_estep)


def _initial(profile: Profile, k: int, q_enabled: bool) -> tuple[np.ndarray, float]:
    """Empirical frequencies of the ``k`` most frequent symbols, extra atoms at singleton weight."""
    mults = np.array(profile.multiplicities()[:k], dtype=np.float64)
    if k > mults.shape[0]:
        mults = np.append(mults, np.ones(k - mults.shape[0]))
    q = profile.phi1 / (2.0 * profile.n) if q_enabled else 0.0
    return mults * ((1.0 - q) / mults.sum()), q


def _mstep(counts: np.ndarray, n: int, k: int, q_enabled: bool) -> tuple[np.ndarray, float]:
    atoms = np.maximum(counts[:k] / n, FLOOR / k)
    q = counts[k] / n if q_enabled else 0.0
    scale = (1.0 - q) / atoms.sum()
    return atoms * scale, q


def _log_prob(profile: Profile, atoms: np.ndarray, q: float) -> float:
    return log_pattern_prob_profile(profile, atoms, q)


def _finish(profile: Profile, atoms: np.ndarray, q: float) -> Distribution:
    kept = atoms[atoms > PRUNE_TOL]
    if q <= PRUNE_TOL:
        q = 0.0
    kept = kept * ((1.0 - q) / kept.sum())
    return Distribution(kept.tolist())


def em_pml(p: Pattern | Profile, cfg: EmConfig, progress: TextIO | None = None) -> PmlResult:
    """Fit ``cfg.k`` atoms (plus continuous mass if enabled) by EM.

    With an enumerated E-step the probability never decreases across
    iterations, and the run stops once the log-probability gain falls
    below 1e-12.  With a sampled E-step all iterations run and the best
    iterate (by exact probability) is returned.  ``progress`` receives one
    tab-separated line per iteration: iteration, log-probability,
    acceptance rate.
    """
    profile = _as_profile(p)
    if is_trivial(profile):
        raise InvalidInputError("trivial pattern: every distribution has probability 1")
    report = bounds_report(profile)
    q_enabled = cfg.q_enabled and not report.discrete_forced
    k, n = cfg.k, profile.n
    _check_feasible(profile, k, q_enabled)
    atoms, q = _initial(profile, k, q_enabled)

    exact = estep_size(profile, k, q_enabled) <= cfg.exact_estep_threshold
    if not exact and k * len(profile) * profile.n > max_work():
        raise ResourceLimitError("sampled E-step too large for the work cap")
    enum = _Enumeration(profile, k, q_enabled) if exact else None
    chains = None if exact else _Chains(profile, k, cfg)

    history: list[float] = []
    rates: list[float] = []
    stopped = False
    best = (-math.inf, atoms, q)
    for it in range(1, cfg.iterations + 1):
        if exact:
            log_p, counts = estep_exact(enum, atoms, q)
            rate = math.nan
        else:
            counts, rate = chains.estep(atoms, q)
            log_p = _log_prob(profile, atoms, q)
            rates.append(rate)
        if progress is not None:
            progress.write(f"{it}\t{log_p:.12g}\t{rate:.6g}\n")
        gain = log_p - history[-1] if history else math.inf
        history.append(log_p)
        if log_p > best[0]:
            best = (log_p, atoms, q)
        if exact and gain < STOP_GAIN:
            stopped = True
            break
        atoms, q = _mstep(counts, n, k, q_enabled)
    if not stopped:
        log_p = _log_prob(profile, atoms, q)
        history.append(log_p)
        if log_p > best[0]:
            best = (log_p, atoms, q)

    _, atoms, q = best
    dist = _finish(profile, atoms, q)
    prob = pattern_prob_profile(dist, profile, fast_path=False)
    if exact:
        settled = stopped
    else:
        settled = len(history) >= 2 and abs(history[-1] - history[-2]) <= MCMC_SETTLED
    violations = report.violations(dist.atoms, dist.q)
    diagnostics = {
        "estep": "exact" if exact else "mcmc",
        "iterations": len(history) - (0 if stopped else 1),
        "log_probability_history": history,
        "certificate_violations": violations,
        "k_requested": k,
    }
    if rates:
        diagnostics["acceptance_rate"] = float(np.mean(rates))
    return PmlResult(dist, prob.value, prob.log_value, PmlMethod.EM_APPROX, report,
                     settled and not violations, candidates_examined=1, diagnostics=diagnostics)


def em_probability_estimate(p: Pattern | Profile, d: Distribution, cfg: EmConfig) -> ProbabilityEstimate:
    """Unbiased importance-sampling estimate of the pattern probability under ``d``.

    Symbols are placed in decreasing multiplicity, each on a free atom with
    probability proportional to ``p**mu`` (singletons also on the continuous
    part, weight ``q``); the sample weight is the product of the
    normalizers.  ``chains * mcmc_steps_per_estep`` samples are drawn.
    """
    profile = _as_profile(p)
    samples = cfg.chains * cfg.mcmc_steps_per_estep
    if profile.n == 0:
        return ProbabilityEstimate(1.0, 0.0, samples)
    mus = np.array(profile.multiplicities(), dtype=np.float64)
    atoms = d.as_array()
    if samples * mus.shape[0] * max(1, atoms.shape[0]) > max_work():
        raise ResourceLimitError("importance sampling exceeds the work cap")
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    uniforms = rng.random(samples * mus.shape[0])
    logw = np.empty(samples)
    _kernels.sis_log_weights(atoms, float(d.q), mus, uniforms, logw)
    top = logw.max()
    if top == -math.inf:
        return ProbabilityEstimate(0.0, 0.0, samples)
    w = np.exp(logw - top)
    scale = math.exp(top)
    value = float(w.mean() * scale)
    err = float(w.std(ddof=1) / math.sqrt(samples) * scale) if samples > 1 else math.inf
    return ProbabilityEstimate(min(value, 1.0) if err == 0.0 else value, err, samples)
