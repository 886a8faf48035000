"""Command-line entry point: ``equidiv <command> ...``.

Exit status: 0 success or valid, 1 invalid, 2 usage error, 3 undecided
(budget ran out before a verdict). With ``--json`` exactly one JSON document
goes to stdout; everything else goes to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

from . import presets
from .arith import FactorBudget, PartialResult, factorize
from .bounds import rule_bound
from .records import (
    INVALID,
    UNDECIDED,
    VALID,
    BoundConflict,
    Catalog,
    RunRecord,
    default_catalog,
    load_certificate,
    verify_certificate,
    verify_run,
)
from .scan import find_runs, longest_run, longest_runs
from .search import load_template, run_pipeline

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_UNDECIDED = 0, 1, 2, 3
BUDGET_ENV = "EQUIDIV_BUDGET_MS"
_DECIMAL = re.compile(r"[0-9]+")


class UsageError(Exception):
    pass


def natural(text: str) -> int:
    """Decimal string >= 1, parsed exactly (commas allowed as digit groups)."""
    digits = text.replace(",", "")
    if not _DECIMAL.fullmatch(digits) or int(digits) < 1:
        raise argparse.ArgumentTypeError(f"expected a positive decimal integer, got {text!r}")
    return int(digits)


def count(text: str) -> int:
    digits = text.replace(",", "")
    if not _DECIMAL.fullmatch(digits):
        raise argparse.ArgumentTypeError(f"expected a non-negative decimal integer, got {text!r}")
    return int(digits)


def _default_budget_ms() -> int:
    raw = os.environ.get(BUDGET_ENV)
    if raw is None:
        return 60000
    try:
        return natural(raw)
    except argparse.ArgumentTypeError:
        raise UsageError(f"{BUDGET_ENV}={raw!r} is not a positive integer") from None


def _default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(args, doc, human: str) -> None:
    if args.json:
        sys.stdout.write(json.dumps(doc, separators=(",", ":")) + "\n")
    else:
        sys.stdout.write(human + "\n")


def _budget(args) -> FactorBudget:
    return FactorBudget(
        trial_division_limit=args.trial_limit,
        wall_clock_ms=args.budget_ms,
        seed=args.seed,
    )


# ---------------------------------------------------------------------------
# commands


def cmd_tau(args) -> int:
    res = factorize(args.n, _budget(args))
    if isinstance(res, PartialResult):
        doc = {
            "n": str(args.n),
            "tau": None,
            "found": res.found.to_json(),
            "cofactor": str(res.cofactor),
        }
        _emit(args, doc, f"undecided: found {res.found}, cofactor {res.cofactor} unresolved")
        return EXIT_UNDECIDED
    _emit(args, {"n": str(args.n), "tau": res.tau, "factors": res.to_json()}, str(res.tau))
    return EXIT_OK


def cmd_factor(args) -> int:
    res = factorize(args.n, _budget(args))
    if isinstance(res, PartialResult):
        doc = {
            "n": str(args.n),
            "complete": False,
            "factors": res.found.to_json(),
            "cofactor": str(res.cofactor),
            "cofactor_status": res.cofactor_verdict.status,
        }
        _emit(args, doc, f"{res.found} * [{res.cofactor}]  (incomplete)")
        return EXIT_UNDECIDED
    _emit(args, {"n": str(args.n), "complete": True, "factors": res.to_json()}, str(res))
    return EXIT_OK


def cmd_bound(args) -> int:
    res = rule_bound(args.k)
    lines = [f"M({res.k}) <= {res.upper}"] + [f"  {rid}: {b}" for rid, b in res.fired]
    _emit(args, res.to_json(), "\n".join(lines))
    return EXIT_OK


def cmd_scan(args) -> int:
    if args.k is None:
        best = longest_runs(args.lo, args.hi, args.max_k, args.block_size)
        doc = [r.to_json() for r in best.values()]
        human = "\n".join(f"k={k}: length {r.length} at {r.start}" for k, r in best.items())
    elif args.longest:
        rec = longest_run(args.k, args.lo, args.hi, args.block_size)
        doc = rec.to_json() if rec else None
        human = f"length {rec.length} at {rec.start}" if rec else "none"
    else:
        recs = find_runs(args.k, args.lo, args.hi, args.min_length, args.block_size, args.workers)
        doc = [r.to_json() for r in recs]
        human = "\n".join(
            f"{r.start} +{r.length}" + (" (truncated)" if r.truncated else "") for r in recs
        )
    _emit(args, doc, human)
    return EXIT_OK


_VERDICT_EXIT = {VALID: EXIT_OK, INVALID: EXIT_INVALID, UNDECIDED: EXIT_UNDECIDED}


def cmd_verify(args) -> int:
    if args.cert:
        if args.k or args.start or args.length:
            raise UsageError("--cert cannot be combined with --k/--start/--length")
        cert = load_certificate(args.cert)
        report = verify_certificate(cert, deterministic=args.deterministic)
        doc = report.to_json()
        verdict = doc["verdict"]
        human = [f"{verdict}: k={cert.k}, {cert.length} members from {cert.start}"]
        human += [f"  member {m.index}: {'; '.join(m.reasons)}" for m in report.failures]
    else:
        if not (args.k and args.start and args.length):
            raise UsageError("give --cert, or all of --k, --start and --length")
        report = verify_run(args.k, args.start, args.length, _budget(args))
        doc = report.to_json()
        verdict = report.verdict
        human = [f"{verdict}: k={args.k}, {args.length} members from {args.start}"]
        human += [f"  member {m.index}: {'; '.join(m.reasons)}" for m in report.members if m.verdict != VALID]
        if args.save_cert and verdict == VALID:
            report.certificate("verify_run").save(args.save_cert)
    _emit(args, doc, "\n".join(human))
    return _VERDICT_EXIT[verdict]


def _template(spec: str):
    path = Path(spec)
    if path.exists():
        return load_template(path)
    if spec in presets.TEMPLATES:
        return presets.template(spec)
    raise UsageError(f"--template: no file or preset named {spec!r} (presets: {', '.join(presets.TEMPLATES)})")


def cmd_search(args) -> int:
    tpl = _template(args.template)
    if args.j_to < args.j_from:
        raise UsageError("--j-to must not be below --j-from")
    records, stats = run_pipeline(
        tpl, args.j_from, args.j_to, _budget(args), args.seed, args.park, args.workers
    )
    print(
        f"examined {stats.examined}, hits {stats.hits}, undecided {stats.undecided}",
        file=sys.stderr,
    )
    doc = {
        "stats": stats.to_json(),
        "records": [r.to_json() for r in records],
    }
    human = "\n".join(f"k={r.k} length {r.length} at {r.start}" for r in records) or "no hits"
    _emit(args, doc, human)
    return EXIT_UNDECIDED if stats.undecided and not records else EXIT_OK


def _catalog(args) -> Catalog:
    return Catalog.load(args.catalog) if args.catalog else default_catalog()


def cmd_catalog(args) -> int:
    cat = _catalog(args)
    if args.action == "query":
        if args.k is None:
            raise UsageError("catalog query needs --k")
        e = cat.query(args.k)
        human = f"k={e.k}: {e.lower} <= M(k) <= {e.upper}" + (f", run at {e.witness_start}" if e.witness_start else "")
        _emit(args, e.to_json(), human)
        return EXIT_OK
    if args.action == "sweep":
        problems = cat.sweep()
        _emit(args, {"entries": len(cat), "problems": problems}, "\n".join(problems) or f"{len(cat)} entries, clean")
        return EXIT_INVALID if problems else EXIT_OK
    if args.action == "export":
        if not args.out:
            raise UsageError("catalog export needs --out")
        cat.save(args.out)
        _emit(args, {"entries": len(cat), "path": str(args.out)}, f"wrote {len(cat)} entries to {args.out}")
        return EXIT_OK
    # upsert from a certificate: only verified runs may move the catalog
    if not args.cert:
        raise UsageError("catalog upsert needs --cert")
    report = verify_certificate(load_certificate(args.cert))
    if not report.valid:
        _emit(args, report.to_json(), "certificate is invalid; catalog unchanged")
        return EXIT_INVALID
    c = report.certificate
    try:
        entry = cat.upsert(RunRecord(c.k, c.start, c.length, "imported", False, c))
    except BoundConflict as exc:
        print(f"bound conflict: {exc}", file=sys.stderr)
        _emit(args, {"error": "bound-conflict", "message": str(exc)}, f"bound conflict: {exc}")
        return EXIT_INVALID
    if args.catalog:
        cat.save(args.catalog)
    _emit(args, entry.to_json(), f"k={entry.k}: {entry.lower} <= M(k) <= {entry.upper}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="emit one JSON document on stdout")

    budgeted = argparse.ArgumentParser(add_help=False)
    budgeted.add_argument(
        "--budget-ms", type=natural, default=None, help=f"wall-clock budget (default ${BUDGET_ENV} or 60000)"
    )
    budgeted.add_argument("--seed", type=count, default=0, help="seed for rho restarts and primality bases")
    budgeted.add_argument("--trial-limit", type=natural, default=1000, help="trial division bound")

    parallel = argparse.ArgumentParser(add_help=False)
    parallel.add_argument("--workers", type=natural, default=None, help="worker processes (default: all CPUs)")

    p = _Parser(prog="equidiv", description="Runs of consecutive integers with equal divisor counts.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("tau", parents=[common, budgeted], help="number of divisors of N")
    s.add_argument("n", type=natural)
    s.set_defaults(func=cmd_tau)

    s = sub.add_parser("factor", parents=[common, budgeted], help="prime factorization of N")
    s.add_argument("n", type=natural)
    s.set_defaults(func=cmd_factor)

    s = sub.add_parser("bound", parents=[common], help="proven upper bound on the run length for k")
    s.add_argument("k", type=natural)
    s.set_defaults(func=cmd_bound)

    s = sub.add_parser("scan", parents=[common, parallel], help="exhaustive run search over [lo, hi]")
    s.add_argument("--k", type=natural, help="divisor count (omit for the longest run of every k)")
    s.add_argument("--from", "--lo", dest="lo", type=natural, required=True, help="window start")
    s.add_argument("--to", "--hi", dest="hi", type=natural, required=True, help="window end (inclusive)")
    s.add_argument("--min-len", "--min-length", dest="min_length", type=natural, default=2)
    s.add_argument("--longest", action="store_true", help="report only the longest run for --k")
    s.add_argument("--max-k", type=natural, help="with no --k, ignore divisor counts above this")
    s.add_argument("--block-size", type=natural, default=1 << 22)
    s.set_defaults(func=cmd_scan)

    s = sub.add_parser("verify", parents=[common, budgeted], help="check a certificate or a claimed run")
    s.add_argument("--cert", type=Path, help="certificate JSON with member factorizations")
    s.add_argument("--deterministic", action="store_true", help="demand primality proofs")
    s.add_argument("--k", type=natural)
    s.add_argument("--start", type=natural)
    s.add_argument("--length", type=natural)
    s.add_argument("--save-cert", type=Path, help="write a certificate when the run verifies")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("search", parents=[common, budgeted, parallel], help="staged search along a template")
    s.add_argument("--template", required=True, help="template JSON file or preset name")
    s.add_argument("--j-from", type=count, required=True)
    s.add_argument("--j-to", type=count, required=True)
    s.add_argument("--park", type=Path, help="append undecided candidates here (JSON lines)")
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("catalog", parents=[common], help="query or update the table of known values")
    s.add_argument("action", choices=["query", "sweep", "export", "upsert"])
    s.add_argument("--catalog", type=Path, help="catalog JSON (default: bundled table)")
    s.add_argument("--k", type=natural)
    s.add_argument("--cert", type=Path, help="verified run to upsert")
    s.add_argument("--out", type=Path)
    s.set_defaults(func=cmd_catalog)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "budget_ms") and args.budget_ms is None:
            args.budget_ms = _default_budget_ms()
        if hasattr(args, "workers") and args.workers is None:
            args.workers = _default_workers()
        return args.func(args)
    # malformed certificates, schema violations and bad windows are ValueErrors
    except (UsageError, ValueError, OSError) as exc:
        print(f"equidiv {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
