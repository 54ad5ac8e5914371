"""Command-line entry point: ``interior-point {solve,learn,audit,bench,selftest}``.

Exit codes: 0 on success, 1 when an algorithm gives up (too little data, no
stopping point, ...), 2 on usage, input or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import secrets
import sys
from typing import Optional, Sequence

from . import audit, datagen, selftest
from .domain import Database, OrderedDomain, PrivacyBudget, interior_score, parse_database
from .errors import (
    AuditSetupError,
    ConfigError,
    DomainError,
    InteriorPointError,
    ParamError,
    ParseError,
)
from .learner import SOLVERS, learn_threshold, parse_labeled
from .mechanisms import RandomSource, noiseless_allowed, NOISELESS_ENV

EXIT_OK, EXIT_ALGO, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not v > 0 or v == float("inf"):
        raise argparse.ArgumentTypeError(f"must be a positive real, got {text}")
    return v


def _unit_float(text: str) -> float:
    v = _positive_float(text)
    if not v < 1:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return v


def _bits(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 1 <= v <= 128:
        raise argparse.ArgumentTypeError(f"bits must lie in [1, 128], got {v}")
    return v


def _seed(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be nonnegative")
    return v


def _count(text: str) -> int:
    v = _seed(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _budget_args(p: argparse.ArgumentParser, required: bool = True):
    p.add_argument("--epsilon", type=_positive_float, required=required, help="privacy parameter epsilon")
    p.add_argument("--delta", type=_unit_float, required=required, help="privacy parameter delta in (0, 1)")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=_seed, help="master seed (drawn from system entropy if omitted)")
    p.add_argument("--noiseless", action="store_true", help=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="interior-point", description="Private interior point toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="find a private interior point of a database file")
    p.add_argument("input", help="file with one unsigned integer per line ('-' for stdin)")
    p.add_argument("--bits", type=_bits, required=True, help="domain is [0, 2**bits)")
    _budget_args(p)
    p.add_argument("--algorithm", choices=audit.ALGORITHMS, default="heavy-paths")
    p.add_argument("--lambda", dest="lam", type=_positive_float, help="override the heavy-paths constant")
    _common(p)

    p = sub.add_parser("learn", help="learn a threshold function from 'value,label' lines")
    p.add_argument("input")
    p.add_argument("--bits", type=_bits, required=True)
    _budget_args(p)
    p.add_argument("--algorithm", choices=SOLVERS, default="heavy-paths")
    _common(p)

    p = sub.add_parser("audit", help="empirical privacy audit on a tiny domain")
    p.add_argument("--algorithm", choices=sorted(audit.AUDIT_TARGETS), default="treelog")
    p.add_argument("--bits", type=_bits, default=4)
    p.add_argument("--s", dest="s_path", help="first database file (random if omitted)")
    p.add_argument("--s-prime", dest="s_prime_path", help="neighboring database file (random if omitted)")
    p.add_argument("--n", type=_count, default=24, help="size of a randomly generated pair")
    p.add_argument("--epsilon", type=_positive_float, default=0.5, help="per-call epsilon")
    p.add_argument("--delta", type=_unit_float, default=1e-3, help="delta used both per call and as the audit target")
    p.add_argument("--trim", type=_count, default=1)
    p.add_argument("--lambda", dest="lam", type=_positive_float, default=0.05)
    p.add_argument("--trials", type=_count, default=100_000, help="trials per side")
    p.add_argument("--workers", type=_count, default=1)
    p.add_argument("--output", help="write the full report JSON here")
    _common(p)

    p = sub.add_parser("bench", help="seeded utility benchmark")
    p.add_argument("--config", help="JSON experiment config (flags below override it)")
    p.add_argument("--algorithm", choices=audit.ALGORITHMS)
    p.add_argument("--bits", type=_bits)
    _budget_args(p, required=False)
    p.add_argument("--n", type=_seed, help="database size (default: the algorithm's minimum)")
    p.add_argument("--family", choices=sorted(datagen.FAMILIES))
    p.add_argument("--trials", type=_count)
    p.add_argument("--lambda", dest="lam", type=_positive_float)
    p.add_argument("--workers", type=_count)
    p.add_argument("--curve", action="store_true", help="sweep n for b in 16, 32, 64, 128")
    p.add_argument("--output", help="directory for trials.jsonl, summary.json and CSV")
    _common(p)

    p = sub.add_parser("selftest", help="oracle equivalence and invariant checks")
    p.add_argument("--scale", type=_positive_float, default=1.0, help="multiplier on instance counts")
    _common(p)
    return parser


def _read_lines(path: str) -> list[str]:
    try:
        if path == "-":
            return sys.stdin.read().splitlines()
        with open(path) as fh:
            return fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _rng(args, seed: int) -> RandomSource:
    if args.noiseless and not noiseless_allowed():
        raise UsageError(f"--noiseless is only available when {NOISELESS_ENV}=1")
    return RandomSource(seed, noiseless=args.noiseless)


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_solve(args, seed: int) -> int:
    domain = OrderedDomain(args.bits)
    db = parse_database(_read_lines(args.input), domain)
    rng = _rng(args, seed)
    budget = PrivacyBudget(args.epsilon, args.delta)
    y = audit.solve(args.algorithm, db, budget, rng, args.lam)
    success = len(db) > 0 and db.min() <= y <= db.max()
    _emit({"algorithm": args.algorithm, "n": len(db), "point": y, "score": interior_score(db, y),
           "seed": seed, "success": success})
    return EXIT_OK


def cmd_learn(args, seed: int) -> int:
    domain = OrderedDomain(args.bits)
    data = parse_labeled(_read_lines(args.input), domain)
    h = learn_threshold(data, PrivacyBudget(args.epsilon, args.delta), _rng(args, seed), args.algorithm)
    _emit({**h.to_json(), "algorithm": args.algorithm, "n": len(data), "seed": seed})
    return EXIT_OK


def cmd_audit(args, seed: int) -> int:
    if args.bits > audit.AUDIT_MAX_BITS:
        raise UsageError(f"audits need --bits <= {audit.AUDIT_MAX_BITS}")
    domain = OrderedDomain(args.bits)
    if (args.s_path is None) != (args.s_prime_path is None):
        raise UsageError("give both --s and --s-prime, or neither")
    if args.s_path:
        s = parse_database(_read_lines(args.s_path), domain)
        s_prime = parse_database(_read_lines(args.s_prime_path), domain)
    else:
        s = datagen.generate("uniform", args.n, domain, seed)
        extra = int(datagen.generate("uniform", 1, domain, seed + 1).min())
        s_prime = Database.from_values(s.to_list() + [extra], domain)
    settings = audit.AuditSettings(args.epsilon, args.delta, args.trim, lam=args.lam)
    report = audit.audit_privacy(args.algorithm, s, s_prime, args.trials, args.delta, seed,
                                 settings=settings, workers=args.workers)
    if args.output:
        with open(args.output, "w") as fh:
            json.dump({**report.to_json(), "seed": seed}, fh, indent=2, sort_keys=True)
    _emit({"algorithm": report.algorithm, "bound": report.bound, "eps_hat": report.eps_hat,
           "eps_lower": report.eps_lower, "outcomes": len(set(report.hist_s) | set(report.hist_s_prime)),
           "relation": report.relation, "seed": seed, "trials": report.trials,
           "underpowered": report.underpowered, "violation": report.violation})
    return EXIT_OK


def _bench_config(args, seed: int) -> audit.BenchConfig:
    raw: dict = {}
    if args.config:
        text = "\n".join(_read_lines(args.config))
        raw = json.loads(text) if text.strip() else {}
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    overrides = {"algo": args.algorithm, "bits": args.bits, "epsilon": args.epsilon, "delta": args.delta,
                 "n": args.n, "family": args.family, "trials": args.trials, "lam": args.lam,
                 "workers": args.workers}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if args.seed is not None or "seed" not in raw:
        raw["seed"] = seed
    return audit.BenchConfig.from_dict(raw)


def cmd_bench(args, seed: int) -> int:
    try:
        config = _bench_config(args, seed)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if args.curve:
        rows = audit.bench_curve(config, out_dir=args.output)
        _emit({"curve": rows, "seed": config.seed})
        return EXIT_OK
    summary = audit.bench_utility(config, out_dir=args.output)
    _emit({**audit.deterministic_view(summary), "seed": config.seed})
    return EXIT_OK


def cmd_selftest(args, seed: int) -> int:
    print(f"seed: {seed}")
    results = selftest.run_all(args.scale, seed)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.ok for r in results) else EXIT_ALGO


COMMANDS = {"solve": cmd_solve, "learn": cmd_learn, "audit": cmd_audit, "bench": cmd_bench,
            "selftest": cmd_selftest}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    seed = args.seed if args.seed is not None else secrets.randbits(63)
    try:
        return COMMANDS[args.command](args, seed)
    except (UsageError, ParseError, DomainError, ConfigError, AuditSetupError, ParamError) as exc:
        print(f"interior-point {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InteriorPointError as exc:
        print(f"interior-point {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ALGO


if __name__ == "__main__":
    sys.exit(main())
