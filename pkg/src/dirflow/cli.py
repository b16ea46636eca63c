"""``dirflow`` command line.

Exit codes: 0 clean, 1 a check was violated (verify/suite), 2 bad input.
``DIRFLOW_TOL`` sets the default tolerance; ``--tol`` overrides it.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .dist import DEFAULT_TOL, DistributionError
from .generators import CANNED, GeneratorConfig, random_system
from .query import QueryEvalError, QuerySyntaxError, evaluate, format as format_expr, parse
from .report import RunManifest, fmt_bits, summarize
from .specfile import dumps, load, spec_hash
from .system import SpecError, unroll, validate
from .theorems import (ALL_THEOREMS, VIOLATED, NothingToSearch, parse_theorem_key,
                       results_to_csv, search_counterexample, verify_all)


class UsageError(Exception):
    pass


def _default_tol() -> float:
    raw = os.environ.get("DIRFLOW_TOL")
    if raw is None:
        return DEFAULT_TOL
    try:
        return float(raw)
    except ValueError:
        raise UsageError(f"DIRFLOW_TOL={raw!r} is not a number") from None


def _theorem_list(text: str | None) -> list[str] | None:
    if not text:
        return None
    # split on commas outside GEN_CONSERVATION(a,b)
    keys, depth, cur = [], 0, ""
    for ch in text:
        depth += ch == "("
        depth -= ch == ")"
        if ch == "," and depth == 0:
            keys.append(cur.strip())
            cur = ""
        else:
            cur += ch
    keys.append(cur.strip())
    for key in keys:
        parse_theorem_key(key)
    return keys


def _load_system(args):
    if args.spec and args.canned:
        raise UsageError("give either --spec or --canned, not both")
    if args.spec:
        spec = load(args.spec)
    elif args.canned:
        builders = CANNED
        if args.canned not in builders:
            raise UsageError(f"unknown canned example {args.canned!r}; choose from {', '.join(builders)}")
        spec = builders[args.canned](args.k) if args.k is not None else builders[args.canned]()
    else:
        raise UsageError("a system is required: --spec FILE or --canned NAME")
    problems = validate(spec)
    if problems:
        raise UsageError("invalid system:\n  " + "\n  ".join(problems))
    return spec


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args, seed: int | None = None) -> GeneratorConfig:
    return GeneratorConfig(seed=args.seed if seed is None else seed, horizon=args.k,
                           alphabet=args.alphabet, partition=args.partition, style=args.style,
                           max_delay=args.max_delay, max_weight=args.max_weight)


def _tol(args) -> float:
    return args.tol if args.tol is not None else _default_tol()


# ------------------------------------------------------------------ commands
def cmd_verify(args, argv) -> int:
    spec = _load_system(args)
    tol = _tol(args)
    theorems = _theorem_list(args.theorems)
    report = verify_all(spec, tol, theorems)
    report.manifest = RunManifest.create(argv, tol, spec_sha256=spec_hash(spec)).to_dict()
    _write(report.to_json() + "\n", args.out)
    if args.csv:
        Path(args.csv).write_text(report.to_csv())
    for r in report.violated:
        bad = ", ".join(c.name for c in r.claims if c.status == VIOLATED)
        print(f"violated: {r.theorem} ({bad})", file=sys.stderr)
    return 1 if report.violated else 0


def cmd_measure(args, argv) -> int:
    try:
        expr = parse(args.expr)
    except QuerySyntaxError as err:
        print(f"error: {err}\n{err.caret()}", file=sys.stderr)
        return 2
    spec = _load_system(args)
    value = evaluate(expr, unroll(spec))
    print(fmt_bits(value))
    return 0


def _suite_one(job):
    cfg, tol, theorems = job
    spec = random_system(cfg)
    return cfg.seed, spec_hash(spec), verify_all(spec, tol, theorems).results


def _run_jobs(fn, jobs, n_workers: int):
    if n_workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(fn, jobs, chunksize=max(1, len(jobs) // (4 * n_workers))))


def cmd_suite(args, argv) -> int:
    tol = _tol(args)
    theorems = _theorem_list(args.theorems)
    _config(args)  # reject bad flags before fanning out
    seeds = list(range(args.seed, args.seed + args.count))
    jobs = [(_config(args, s), tol, theorems) for s in seeds]
    done = _run_jobs(_suite_one, jobs, args.jobs)
    done.sort(key=lambda item: item[0])
    per_system = [results for _, _, results in done]
    systems = [{"seed": seed, "spec_sha256": h, "results": [r.to_dict() for r in results]}
               for seed, h, results in done]
    summary = summarize(per_system)
    violations = sum(s["counts"].get(VIOLATED, 0) for s in summary.values())
    out = {"manifest": RunManifest.create(argv, tol, seeds).to_dict(),
           "config": {"k": args.k, "alphabet": args.alphabet, "partition": args.partition,
                      "style": args.style, "max_delay": args.max_delay, "max_weight": args.max_weight},
           "summary": summary, "violations": violations, "systems": systems}
    _write(json.dumps(out, indent=2) + "\n", args.out)
    if args.csv:
        flat = [(seed, r) for seed, _, results in done for r in results]
        Path(args.csv).write_text(results_to_csv([r for _, r in flat], [seed for seed, _ in flat]))
    for key, s in summary.items():
        if s["violated_claims"]:
            claims = ", ".join(f"{n} x{c}" for n, c in s["violated_claims"].items())
            print(f"violated: {key}: {claims}", file=sys.stderr)
    return 1 if violations else 0


def cmd_search(args, argv) -> int:
    parse_theorem_key(args.theorem)
    tol = _tol(args)
    cfg = _config(args)
    target = format_expr(parse(args.target)) if args.target else None
    found = search_counterexample(args.theorem, cfg, args.budget, args.threshold, target, tol)
    manifest = RunManifest.create(argv, tol, list(range(args.seed, args.seed + args.budget))).to_dict()
    if found is None:
        out = {"manifest": manifest, "theorem": args.theorem, "found": False,
               "message": "none within budget"}
        print(f"none within budget ({args.budget} seeds)", file=sys.stderr)
    else:
        seed, result = found
        out = {"manifest": manifest, "theorem": args.theorem, "found": True, "seed": seed,
               "spec_sha256": spec_hash(random_system(cfg.with_seed(seed))), "result": result.to_dict()}
        print(f"found: seed {seed}", file=sys.stderr)
    _write(json.dumps(out, indent=2) + "\n", args.out)
    return 0


def cmd_generate(args, argv) -> int:
    _write(dumps(random_system(_config(args))), args.out)
    return 0


def cmd_canned(args, argv) -> int:
    builders = CANNED
    if not args.name:
        print("\n".join(builders))
        return 0
    if args.name not in builders:
        raise UsageError(f"unknown canned example {args.name!r}; choose from {', '.join(builders)}")
    _write(dumps(builders[args.name](args.k) if args.k is not None else builders[args.name]()), args.out)
    return 0


# ------------------------------------------------------------------ parser
def _add_system(p):
    p.add_argument("--spec", help="system spec JSON file")
    p.add_argument("--canned", help="use a built-in example system instead of a file")
    p.add_argument("--k", type=int, default=None, help="horizon for --canned")


def _add_generator(p, count=False):
    p.add_argument("--seed", type=int, default=0)
    if count:
        p.add_argument("--count", type=int, default=1)
    p.add_argument("--k", type=int, default=2, help="horizon")
    p.add_argument("--alphabet", type=int, default=2)
    p.add_argument("--partition", default="s|r|p|q", help="exogenous groups, e.g. 's|r|p|q' or 'qs|r|p'")
    p.add_argument("--style", default="random-table")
    p.add_argument("--max-delay", type=int, default=1)
    p.add_argument("--max-weight", type=int, default=16)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirflow", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"dirflow {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the theorem checks on one system")
    _add_system(p)
    p.add_argument("--theorems", help=f"comma-separated subset of: {', '.join(ALL_THEOREMS[:12])}, GEN_CONSERVATION(a,b)")
    p.add_argument("--tol", type=float)
    p.add_argument("--out", help="report JSON path (default stdout)")
    p.add_argument("--csv", help="also write the wide CSV form here")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("measure", help="evaluate one expression in bits")
    _add_system(p)
    p.add_argument("--expr", required=True)
    p.add_argument("--tol", type=float)
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("suite", help="generate systems and check all of them")
    _add_generator(p, count=True)
    p.add_argument("--theorems")
    p.add_argument("--tol", type=float)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(fn=cmd_suite)

    p = sub.add_parser("search", help="scan seeds for a counterexample when hypotheses are broken")
    p.add_argument("--theorem", required=True)
    _add_generator(p)
    p.add_argument("--budget", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--target", help="term label to probe instead of the headline claim")
    p.add_argument("--tol", type=float)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("generate", help="write a random system spec")
    _add_generator(p)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("canned", help="list built-in systems or write one out")
    p.add_argument("name", nargs="?")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_canned)
    return ap


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args, ["dirflow"] + argv)
    except QuerySyntaxError as err:
        print(f"error: {err}\n{err.caret()}", file=sys.stderr)
    except (UsageError, SpecError, QueryEvalError, DistributionError, NothingToSearch,
            OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
