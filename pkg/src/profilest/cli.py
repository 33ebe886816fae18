"""Command-line front end.

Exit codes: 0 success, 1 verification mismatch, 2 usage or input error,
3 result returned but not converged.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from fractions import Fraction

from .bounds import bounds_report
from .errors import InternalError, ProfilestError
from .estimators import AlphaVector, convergence_experiment, expected_new_symbols, ml_distribution
from .patterns import Pattern, Profile, canonical_pattern, is_trivial, pattern_of, profile_of
from .pml_em import EmConfig, em_pml
from .pml_exact import PmlResult, SearchConfig, _sig, pml_search
from .probability import Distribution, pattern_prob_profile

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 2
EXIT_UNCONVERGED = 3

FORMATS = ("whitespace-tokens", "line-tokens", "pattern-literal", "profile-literal")
TABLE1_KMAX = 10

# profile, expected atoms (None: any distribution)
TABLE1 = [
    ("1^1", None),
    ("2^1", (1,)),
    ("3^1", (1,)),
    ("4^1", (1,)),
    ("1^2", ()),
    ("1^3", ()),
    ("1^4", ()),
    ("2^1 1^1", (Fraction(1, 2),) * 2),
    ("3^1 1^1", (Fraction(1, 2),) * 2),
    ("2^2", (Fraction(1, 2),) * 2),
    ("2^1 1^2", (Fraction(1, 5),) * 5),
]


class UsageError(Exception):
    pass


@dataclass
class Sample:
    """What the input provides: a pattern when tokens or a pattern were given, always a profile."""

    profile: Profile
    pattern: Pattern | None
    tokens: list[str] | None


def _read(args) -> str:
    if args.text is not None:
        return args.text
    if args.source == "-":
        return sys.stdin.read()
    with open(args.source, encoding="utf-8") as fh:
        return fh.read()


def _sample(args) -> Sample:
    text = _read(args)
    fmt = args.format
    if fmt == "profile-literal":
        return Sample(Profile.parse(text), None, None)
    if fmt == "pattern-literal":
        pattern = Pattern.parse(text)
        return Sample(profile_of(pattern), pattern, None)
    tokens = text.split() if fmt == "whitespace-tokens" else [ln for ln in text.splitlines() if ln.strip()]
    if not tokens:
        raise UsageError("empty input")
    pattern = pattern_of(tokens)
    return Sample(profile_of(pattern), pattern, tokens)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2)


def _fmt(x) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _search_cfg(args) -> SearchConfig:
    return SearchConfig(kmax=args.kmax, starts=args.starts, seed=args.seed)


def _em_k(args, profile: Profile) -> int:
    if args.kmax is not None:
        return args.kmax
    upper = bounds_report(profile).support_upper
    if math.isinf(upper):
        raise UsageError(f"profile {profile} has singletons; --em needs --kmax to fix the support size")
    return int(upper)


def _pml(args, profile: Profile) -> PmlResult:
    if getattr(args, "em", False):
        if is_trivial(profile):
            return pml_search(profile)
        kwargs = {"k": _em_k(args, profile), "seed": args.seed}
        if args.iterations is not None:
            kwargs["iterations"] = args.iterations
        if args.chains is not None:
            kwargs["chains"] = args.chains
        if args.steps is not None:
            kwargs["mcmc_steps_per_estep"] = args.steps
            kwargs["burn_in"] = max(1, args.steps // 10)
        if args.estep_threshold is not None:
            kwargs["exact_estep_threshold"] = args.estep_threshold
        return em_pml(profile, EmConfig(**kwargs))
    return pml_search(profile, _search_cfg(args))


# ---------------------------------------------------------------------------
# commands


def cmd_pattern(args) -> int:
    s = _sample(args)
    pattern = s.pattern if s.pattern is not None else canonical_pattern(s.profile)
    if args.json:
        print(_dump({"pattern": list(pattern.indices), "profile": str(s.profile)}))
    else:
        print(pattern)
        print(s.profile)
    return EXIT_OK


def _distribution(args) -> Distribution:
    atoms = [float(a) for a in args.atoms.replace(",", " ").split()] if args.atoms else []
    return Distribution(atoms, args.q)


def cmd_prob(args) -> int:
    s = _sample(args)
    d = _distribution(args)
    prob = pattern_prob_profile(d, s.profile)
    out = {
        "probability": _sig(prob.value),
        "log2_probability": _sig(prob.log2_value),
        "method": prob.method.value,
    }
    if args.tsv:
        print("\t".join(_fmt(v) for v in out.values()))
    else:
        print(_dump(out))
    return EXIT_OK


def cmd_pml(args) -> int:
    s = _sample(args)
    result = _pml(args, s.profile)
    print(_dump(result.to_json()))
    return EXIT_OK if result.converged else EXIT_UNCONVERGED


def cmd_bounds(args) -> int:
    s = _sample(args)
    print(_dump(bounds_report(s.profile).to_json()))
    return EXIT_OK


def _describe(d: Distribution) -> str:
    body = ", ".join(f"{a:.6g}" for a in d.atoms)
    return f"({body})" + (f" + q={d.q:.6g}" if d.q > 1e-9 else "")


def table1_rows(kmax: int = TABLE1_KMAX, starts: int = 32, seed: int = 0) -> list[dict]:
    """Recompute every row and compare probabilities with the tabulated distributions."""
    rows = []
    for text, expected in TABLE1:
        profile = Profile.parse(text)
        pattern = canonical_pattern(profile)
        result = pml_search(profile, SearchConfig(kmax=kmax, starts=starts, seed=seed))
        if expected is None:
            target = 1.0
            shown = "any distribution"
        else:
            target = pattern_prob_profile(Distribution([float(a) for a in expected]), profile).value
            shown = "(" + ", ".join(str(a) for a in expected) + ")"
        rows.append({
            "profile": text,
            "pattern": "".join(map(str, pattern.indices)),
            "computed": _describe(result.distribution),
            "expected": shown,
            "probability": result.probability,
            "expected_probability": target,
            "match": abs(result.probability - target) <= 1e-6,
        })
    return rows


def cmd_table1(args) -> int:
    rows = table1_rows(args.kmax or TABLE1_KMAX, args.starts, args.seed)
    if args.json:
        print(_dump([{**r, "probability": _sig(r["probability"]),
                      "expected_probability": _sig(r["expected_probability"])} for r in rows]))
    else:
        print("profile\tpattern\tcomputed\texpected\tprobability\tmatch")
        for r in rows:
            print("\t".join([r["profile"], r["pattern"], r["computed"], r["expected"],
                             _fmt(r["probability"]), "match" if r["match"] else "MISMATCH"]))
    return EXIT_OK if all(r["match"] for r in rows) else EXIT_MISMATCH


def cmd_predict(args) -> int:
    s = _sample(args)
    if s.tokens is None and args.estimator == "ml":
        raise UsageError("the ml estimator needs token input")
    t = args.future if args.future is not None else s.profile.n
    if args.estimator == "ml":
        d = ml_distribution(s.tokens)
        converged = True
    else:
        result = _pml(args, s.profile)
        d, converged = result.distribution, result.converged
    value = expected_new_symbols(d, s.profile.m, t)
    print(_dump({"estimator": args.estimator, "future": t, "observed_symbols": s.profile.m,
                 "expected_new_symbols": _sig(value)}))
    return EXIT_OK if converged else EXIT_UNCONVERGED


def _numbers(text: str, kind):
    try:
        return [kind(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def cmd_converge(args) -> int:
    alpha = AlphaVector(tuple(_numbers(args.alpha, float)))
    ns = _numbers(args.n, int)
    rows = convergence_experiment(alpha, ns, _search_cfg(args))
    if args.json:
        print(_dump([{"n": r.n, "k": r.k, "q": _sig(r.q), "D_bits": _sig(r.d_bits), "l1": _sig(r.l1)}
                     for r in rows]))
    else:
        print("n\tk\tq\tD_bits\tl1")
        for r in rows:
            print(r.tsv())
    return EXIT_OK if all(r.result.converged for r in rows) else EXIT_UNCONVERGED


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="profilest", description="Pattern maximum likelihood tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input(p):
        p.add_argument("source", nargs="?", default="-", help="input file (default: stdin)")
        p.add_argument("--text", help="inline input instead of a file")
        p.add_argument("--format", choices=FORMATS, default="whitespace-tokens")

    def add_output(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--json", action="store_true")
        g.add_argument("--tsv", action="store_true")

    def add_search(p):
        p.add_argument("--kmax", type=int, help="largest support size to try (EM: the support size)")
        p.add_argument("--starts", type=int, default=32)
        p.add_argument("--seed", type=int, default=0)

    def add_em(p):
        mode = p.add_mutually_exclusive_group()
        mode.add_argument("--exact", action="store_true", help="closed forms or numerical search (default)")
        mode.add_argument("--em", action="store_true", help="expectation maximization")
        p.add_argument("--iterations", type=int)
        p.add_argument("--chains", type=int)
        p.add_argument("--steps", type=int, help="Metropolis steps per E-step and chain")
        p.add_argument("--estep-threshold", type=int,
                       help="enumerate assignments when there are at most this many")

    p = sub.add_parser("pattern", help="pattern and profile of the input")
    add_input(p)
    add_output(p)
    p.set_defaults(func=cmd_pattern)

    p = sub.add_parser("prob", help="pattern probability under a distribution")
    add_input(p)
    add_output(p)
    p.add_argument("--atoms", default="", help="comma or space separated atom probabilities")
    p.add_argument("--q", type=float, help="continuous mass (default: 1 - sum of atoms)")
    p.set_defaults(func=cmd_prob)

    p = sub.add_parser("pml", help="high-profile distribution as JSON")
    add_input(p)
    add_search(p)
    add_em(p)
    p.set_defaults(func=cmd_pml)

    p = sub.add_parser("bounds", help="analytic certificates as JSON")
    add_input(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("table1", help="recompute the high-profile table of short profiles")
    add_output(p)
    add_search(p)
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("predict", help="expected number of new symbols in future draws")
    add_input(p)
    add_search(p)
    add_em(p)
    p.add_argument("--future", type=int, help="future draws t (default: sample length)")
    p.add_argument("--estimator", choices=("ml", "pml"), default="pml")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("converge", help="PML versus the true distribution for growing n")
    add_output(p)
    add_search(p)
    p.add_argument("--alpha", required=True, help="nonincreasing probabilities, comma separated")
    p.add_argument("--n", required=True, help="sample sizes, comma separated")
    p.set_defaults(func=cmd_converge)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InternalError as exc:
        print(f"profilest: verification failed: {exc}", file=sys.stderr)
        return EXIT_MISMATCH
    except (UsageError, ProfilestError, OSError) as exc:
        print(f"profilest: {exc}", file=sys.stderr)
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())
