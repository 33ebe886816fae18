"""High-profile (pattern maximum likelihood) distributions.

Closed forms cover trivial, constant and all-distinct profiles, profiles of
two symbols, and uniform profiles ``r^m``.  Everything else goes through a
bounded numerical search: for every candidate discrete size ``k`` allowed by
the support bounds, multi-start projected gradient ascent on the log
pattern probability over ``k`` atoms plus a continuous coordinate ``q``,
followed by a constrained Newton polish of the best point.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from . import _kernels
from .bounds import BoundsReport, _distinct, bounds_report
from .errors import (
    InternalError,
    InvalidInputError,
    NotApplicableError,
    UnboundedSearchError,
)
from .patterns import Profile, is_trivial
from .probability import (
    Distribution,
    check_work,
    state_space,
    pattern_prob_grad,
    pattern_prob_profile,
    pattern_prob_uniform,
)

__all__ = [
    "PmlMethod",
    "PmlResult",
    "SearchConfig",
    "candidate_k_range",
    "pml",
    "pml_binary",
    "pml_search",
    "pml_trivial",
    "pml_uniform_profile",
    "pml_uniform_ratio_limit",
    "uniform_profile_k",
]

TIE_TOL = 1e-9
PRUNE_TOL = 1e-10
SCREEN_ITERATIONS = 200
REFINE_STARTS = 4


class PmlMethod(str, enum.Enum):
    TRIVIAL = "trivial"
    BINARY_CLOSED_FORM = "binary-closed-form"
    UNIFORM_PROFILE = "uniform-profile"
    NUMERIC_SEARCH = "numeric-search"
    EM_APPROX = "em-approx"


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the numerical search.

    ``k_range_override`` replaces the bound-derived candidate range; ``kmax``
    only caps its upper end (needed whenever singletons make the upper
    bound infinite).
    """

    k_range_override: tuple[int, int] | None = None
    kmax: int | None = None
    starts: int = 32
    max_iterations: int = 5000
    gradient_tolerance: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.starts < 1:
            raise InvalidInputError("starts must be >= 1")
        if not self.gradient_tolerance > 0:
            raise InvalidInputError("gradient_tolerance must be positive")
        if self.max_iterations < 1:
            raise InvalidInputError("max_iterations must be >= 1")


@dataclass
class PmlResult:
    distribution: Distribution
    probability: float
    log_probability: float
    method: PmlMethod
    certificates: BoundsReport | None
    converged: bool
    candidates_examined: int = 1
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.distribution.k

    @property
    def q(self) -> float:
        return self.distribution.q

    def to_json(self) -> dict:
        return {
            "atoms": [_sig(a) for a in self.distribution.atoms],
            "q": _sig(self.distribution.q),
            "probability": _sig(self.probability),
            "log_probability": _sig(self.log_probability),
            "method": self.method.value,
            "k": self.k,
            "certificates": self.certificates.to_json() if self.certificates else None,
            "converged": self.converged,
        }


def _sig(x: float):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(f"{x:.12g}")


# ---------------------------------------------------------------------------
# invariants


def _checked(result: PmlResult, profile: Profile) -> PmlResult:
    """Assert that a result satisfies its own certificates and probability."""
    if result.certificates is not None:
        bad = result.certificates.violations(result.distribution.atoms, result.distribution.q)
        if bad:
            raise InternalError(f"high-profile candidate for {profile} breaks bounds: {bad}")
    if not is_trivial(profile):
        again = pattern_prob_profile(result.distribution, profile)
        if abs(again.value - result.probability) > 1e-9 * max(1.0, result.probability):
            raise InternalError(
                f"reported probability {result.probability!r} != recomputed {again.value!r}"
            )
    return result


def _report(profile: Profile) -> BoundsReport | None:
    return None if is_trivial(profile) else bounds_report(profile)


# ---------------------------------------------------------------------------
# closed forms


def pml_trivial(profile: Profile) -> PmlResult:
    """Trivial, constant (``n^1``) and all-distinct (``1^n``) profiles: probability 1."""
    if is_trivial(profile):
        dist = Distribution([1.0])
    elif profile.m == 1:
        dist = Distribution([1.0])
    elif profile.mu_max == 1:
        dist = Distribution([])
    else:
        raise NotApplicableError(f"profile {profile} has no trivial high-profile distribution")
    result = PmlResult(dist, 1.0, 0.0, PmlMethod.TRIVIAL, _report(profile), True)
    return _checked(result, profile)


def _binary_poly(p: float, n0: int, n: int) -> float:
    d = n - 2 * n0
    return n0 * p ** (d + 1) - (n - n0) * p**d + (n - n0) * p - n0


def pml_binary(n0: int, n1: int) -> PmlResult:
    """Two symbols seen ``n0 <= n1`` times.

    Balanced enough (``(n1 - n0)**2 <= n``): ``(1/2, 1/2)``.  Otherwise the
    atoms are ``(1, p)/(1 + p)`` with ``p`` the root in (0, 1) of
    ``n0 p^(n-2n0+1) - (n-n0) p^(n-2n0) + (n-n0) p - n0``.
    """
    if n0 > n1:
        n0, n1 = n1, n0
    if n0 < 1:
        raise NotApplicableError("binary closed form needs both symbols observed")
    n = n0 + n1
    profile = Profile.from_multiplicities([n0, n1])
    if n == 2:
        raise NotApplicableError("profile 1^2 is all-distinct; use pml_trivial")
    if (n1 - n0) ** 2 <= n:
        dist = Distribution([0.5, 0.5])
        prob = math.ldexp(1.0, 1 - n)  # exact power of two
        result = PmlResult(dist, prob, math.log(prob), PmlMethod.BINARY_CLOSED_FORM,
                           bounds_report(profile), True)
        return _checked(result, profile)

    def g(p):
        return _binary_poly(p, n0, n)

    # p = 1 is always a root; g'(1) = n - (n1 - n0)**2 < 0 here, so g > 0 just below 1
    hi = None
    for j in range(1, 200):
        cand = 1.0 - 2.0**-j
        if g(cand) > 0:
            hi = cand
            break
    if hi is None or g(0.0) >= 0:
        raise InternalError(f"binary root not bracketed for n0={n0}, n1={n1}")
    root = bisect(g, 0.0, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(g(root)) > 1e-12 * max(1.0, n):
        raise InternalError(f"binary root residual {g(root)!r} too large")
    dist = Distribution([1.0 / (1.0 + root), root / (1.0 + root)])
    log_p = np.logaddexp(n0 * math.log(root), n1 * math.log(root)) - n * math.log1p(root)
    result = PmlResult(dist, math.exp(log_p), float(log_p), PmlMethod.BINARY_CLOSED_FORM,
                       bounds_report(profile), True, diagnostics={"ratio_root": root})
    return _checked(result, profile)


def _uniform_step_down(k: int, m: int, n: int) -> bool:
    """Whether uniform(k+1) is strictly worse than uniform(k) on an ``n``-long ``m``-symbol pattern.

    ``(1 + 1/k)**n * (1 - m/(k+1)) > 1``, decided in floats with an exact
    integer fallback near equality.
    """
    approx = n * math.log1p(1.0 / k) + math.log1p(-m / (k + 1))
    if abs(approx) > 1e-9:
        return approx > 0
    return (k + 1) ** n * (k + 1 - m) > k**n * (k + 1)


def uniform_profile_k(r: int, m: int) -> int:
    """Smallest ``k >= m`` past which uniform(k) stops improving on profile ``r^m``."""
    if r < 2 or m < 1:
        raise InvalidInputError("uniform profile needs r >= 2 and m >= 1")
    n = r * m
    k = m
    while not _uniform_step_down(k, m, n):
        k += 1
        if k > 10**9:
            raise InternalError(f"no uniform optimum below 1e9 for r={r}, m={m}")
    return k


def pml_uniform_profile(r: int, m: int) -> PmlResult:
    """Profile ``r^m`` (``m`` symbols, each seen ``r`` times): uniform over ``k_hat`` atoms."""
    k = uniform_profile_k(r, m)
    prob = pattern_prob_uniform(k, m, r * m)
    profile = Profile({r: m})
    method = PmlMethod.TRIVIAL if m == 1 else PmlMethod.UNIFORM_PROFILE
    result = PmlResult(Distribution.uniform(k), prob.value, prob.log_value, method,
                       bounds_report(profile), True)
    return _checked(result, profile)


def pml_uniform_ratio_limit(r: int) -> float:
    """Limit of ``k_hat / m`` for profiles ``r^m``: ``alpha`` with ``-alpha ln(1 - 1/alpha) = r``."""
    if r < 2:
        raise InvalidInputError("ratio limit needs r >= 2")

    def f(alpha):
        return -alpha * math.log1p(-1.0 / alpha) - r

    lo = 1.0 + 1e-15
    return bisect(f, lo, 10.0, xtol=1e-13, maxiter=500)


# ---------------------------------------------------------------------------
# numerical search


def candidate_k_range(profile: Profile, cfg: SearchConfig,
                      report: BoundsReport | None = None) -> tuple[int, int]:
    """Discrete sizes to try.

    With a forced-discrete profile: ``[max(m, ceil(lower)), upper]``.  With
    room for continuous mass the lower bound constrains total size only, so
    the sweep starts at ``max(1, m - phi_1)`` (every repeated symbol needs an
    atom).
    """
    report = report or bounds_report(profile)
    if report.discrete_forced:
        floor = profile.m
        lo = max(floor, int(report.min_support))
    else:
        floor = max(1, profile.m - profile.phi1)
        lo = floor
    hi = report.support_upper
    if cfg.k_range_override is not None:
        lo, hi = cfg.k_range_override
        lo = max(lo, floor)
    if cfg.kmax is not None:
        hi = min(hi, cfg.kmax)
    if math.isinf(hi):
        raise UnboundedSearchError(
            f"profile {profile} has singletons, so its support bound is infinite; "
            "pass kmax (or k_range_override) to cap the search"
        )
    hi = int(hi)
    if hi < lo:
        raise InvalidInputError(f"empty candidate range [{lo}, {hi}] for profile {profile}")
    return lo, hi


class _Objective:
    """log P over the packed vector ``x = (atoms..., q)``."""

    def __init__(self, profile: Profile):
        self.profile = profile
        self.space = state_space(profile)
        self.evals = 0

    def grad(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        self.evals += 1
        sp = self.space
        g = np.empty(x.shape[0])
        f = _kernels.log_prob_grad(np.ascontiguousarray(x[:-1]), float(x[-1]),
                                   sp.mus, sp.counts, sp.strides, sp.phi1, g)
        return float(f), g

    def ascend(self, x0: np.ndarray, cap: float, max_iter: int) -> tuple[float, np.ndarray]:
        sp = self.space
        x = np.array(x0, dtype=np.float64)
        f, _, evals = _kernels.ascend(x, float(cap), int(max_iter), sp.mus, sp.counts, sp.strides, sp.phi1)
        self.evals += int(evals)
        return float(f), x


def _polish(obj: _Objective, x: np.ndarray, cap: float, iters: int = 60) -> tuple[float, np.ndarray]:
    """Newton steps on the active face (positive atoms, q if strictly inside its bounds)."""
    atoms, q = x[:-1].copy(), float(x[-1])
    atoms = atoms[atoms > PRUNE_TOL]
    q_free = cap > 0.0 and PRUNE_TOL < q < cap - PRUNE_TOL
    if not q_free:
        q = 0.0 if q <= 0.5 * cap or cap == 0.0 else cap
    atoms *= (1.0 - q) / atoms.sum()

    def pack(z):
        return np.append(z[:-1], z[-1]) if q_free else np.append(z, q)

    z = np.append(atoms, q) if q_free else atoms
    upper = np.full(z.shape, np.inf)
    if q_free:
        upper[-1] = cap

    def grad(zz):
        f, g = obj.grad(pack(zz))
        return f, (g if q_free else g[:-1])

    f, g = grad(z)
    if not math.isfinite(f):
        return f, pack(z)
    dim = z.shape[0]
    for _ in range(iters):
        h = 1e-6 * np.maximum(z, 1e-3)
        H = np.empty((dim, dim))
        for i in range(dim):
            e = np.zeros(dim)
            e[i] = h[i]
            _, gp = grad(z + e)
            _, gm = grad(z - e)
            H[:, i] = (gp - gm) / (2 * h[i])
        H = 0.5 * (H + H.T)
        kkt = np.zeros((dim + 1, dim + 1))
        kkt[:dim, :dim] = H
        kkt[:dim, dim] = 1.0
        kkt[dim, :dim] = 1.0
        rhs = np.append(-g, 0.0)
        try:
            step = np.linalg.solve(kkt, rhs)[:dim]
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        alpha = 1.0
        accepted = False
        while alpha > 1e-12:
            cand = z + alpha * step
            if np.all(cand > 0.0) and np.all(cand <= upper):
                fc, gc = grad(cand)
                if fc >= f:
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break
        done = np.max(np.abs(cand - z)) < 1e-15
        z, f, g = cand, fc, gc
        if done:
            break
    return f, pack(z)


def _starts(profile: Profile, k: int, cap: float, count: int, rng: np.random.Generator) -> list[np.ndarray]:
    m, n = profile.m, profile.n
    q_needed = k < m
    base_q = 0.5 * cap if q_needed else 0.0
    out = [np.append(np.full(k, (1.0 - base_q) / k), base_q)]
    mults = np.array(profile.multiplicities()[:k], dtype=float)
    if k > m:
        mults = np.append(mults, np.full(k - m, 0.5))
    atoms = mults / mults.sum()
    ml_q = (m - k) / n if q_needed else 0.0
    out.append(np.append(atoms * (1.0 - ml_q), ml_q))
    for _ in range(count):
        qq = rng.uniform(0.0, cap) if cap > 0 else 0.0
        if q_needed and qq == 0.0:
            qq = 0.5 * cap
        out.append(np.append(rng.dirichlet(np.ones(k)) * (1.0 - qq), qq))
    return out


def _better(a: tuple[float, np.ndarray], b: tuple[float, np.ndarray] | None) -> bool:
    """Whether candidate ``a`` beats ``b`` under the tie-break rule.

    Higher probability wins unless within TIE_TOL (relative); then fewer
    atoms, then the lexicographically larger sorted atom vector.
    """
    if b is None:
        return True
    fa, xa = a
    fb, xb = b
    if abs(fa - fb) > TIE_TOL:
        return fa > fb
    ka, kb = int(np.sum(xa[:-1] > PRUNE_TOL)), int(np.sum(xb[:-1] > PRUNE_TOL))
    if ka != kb:
        return ka < kb
    sa = sorted(xa[:-1][xa[:-1] > PRUNE_TOL], reverse=True)
    sb = sorted(xb[:-1][xb[:-1] > PRUNE_TOL], reverse=True)
    return sa > sb


def _to_distribution(x: np.ndarray, discrete: bool) -> Distribution:
    atoms = x[:-1][x[:-1] > PRUNE_TOL]
    q = float(x[-1])
    if discrete or q <= PRUNE_TOL:
        atoms = atoms / atoms.sum()
    else:
        atoms = atoms * ((1.0 - q) / atoms.sum())
    return Distribution(atoms.tolist())


def _stationarity(profile: Profile, dist: Distribution, cap: float) -> tuple[float, float]:
    """Spread of the raw partials ``dP/dp_j`` over positive atoms (and ``q`` if interior)."""
    log_p, ga, gq = pattern_prob_grad(profile, dist.as_array(), dist.q)
    raw = list(ga * math.exp(log_p))
    if cap > 0.0 and PRUNE_TOL < dist.q < cap - 1e-9:
        raw.append(gq * math.exp(log_p))
    lam = float(np.mean(raw))
    return float(max(raw) - min(raw)), lam


def _numeric(profile: Profile, cfg: SearchConfig) -> PmlResult:
    report = bounds_report(profile)
    cap = 0.0 if report.discrete_forced else float(report.continuous_cap)
    lo, hi = candidate_k_range(profile, cfg, report)
    check_work(profile, hi, gradient=True)
    obj = _Objective(profile)
    best = None
    examined = 0
    per_k = {}
    for k in range(lo, hi + 1):
        rng = np.random.default_rng([cfg.seed, k])
        # short screening ascent from every start, full budget for the leaders
        screened = []
        for x0 in _starts(profile, k, cap, cfg.starts, rng):
            f, x = obj.ascend(x0, cap, min(SCREEN_ITERATIONS, cfg.max_iterations))
            examined += 1
            if math.isfinite(f):
                screened.append((f, x))
        if not screened:
            continue
        screened.sort(key=lambda fx: -fx[0])
        k_best = None
        for f, x in screened[:REFINE_STARTS]:
            if cfg.max_iterations > SCREEN_ITERATIONS:
                f, x = obj.ascend(x, cap, cfg.max_iterations - SCREEN_ITERATIONS)
            if math.isfinite(f) and _better((f, x), k_best):
                k_best = (f, x)
        k_best = _polish(obj, k_best[1], cap)
        per_k[k] = k_best[0]
        if _better(k_best, best):
            best = k_best
    if best is None:
        raise InternalError(f"no feasible start for profile {profile}")
    dist = _to_distribution(best[1], report.discrete_forced)
    prob = pattern_prob_profile(dist, profile, fast_path=False)
    spread, lam = _stationarity(profile, dist, cap)
    converged = spread <= cfg.gradient_tolerance and _distinct(dist.atoms, 1e-6) <= report.distinct_values_cap
    result = PmlResult(
        dist, prob.value, prob.log_value, PmlMethod.NUMERIC_SEARCH, report, converged,
        candidates_examined=examined,
        diagnostics={"gradient_spread": spread, "lambda": lam, "k_range": (lo, hi),
                     "log_probability_by_k": per_k, "evaluations": obj.evals},
    )
    return _checked(result, profile)


def pml_search(profile: Profile, cfg: SearchConfig | None = None, *,
               force_numeric: bool = False) -> PmlResult:
    """High-profile distribution of ``profile``.

    Closed forms are used where they apply unless ``force_numeric``; trivial,
    constant and all-distinct profiles always use the trivial form.  The
    numeric search raises UnboundedSearchError for profiles with singletons
    unless ``cfg`` caps ``k``.
    """
    cfg = cfg or SearchConfig()
    if is_trivial(profile) or profile.m == 1 or profile.mu_max == 1:
        return pml_trivial(profile)
    if not force_numeric:
        if profile.m == 2:
            a, b = profile.multiplicities()
            return pml_binary(b, a)
        if len(profile) == 1:
            (r, m), = profile.prevalences
            return pml_uniform_profile(r, m)
    return _numeric(profile, cfg)


pml = pml_search

