"""Command-line interface: ``ldve query``, ``ldve odds`` and ``ldve check``.

Exit status is 0 on success, 1 for usage and input-file errors, 2 when the
query cannot be answered (zero-probability evidence, unbounded mass) or
when ``check`` finds a mismatch against the oracle.
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings

from ldve.engine import posterior
from ldve.errors import InferenceError, SpecError, TreeError
from ldve.io import SpecWarning, dumps, load_network, posterior_to_dict
from ldve.labels import is_zero
from ldve.linkage import RecordDesc, load_config, odds_details
from ldve.oracle import oracle_posterior, random_network, tv_distance

EXIT_OK, EXIT_USAGE, EXIT_INFERENCE = 0, 1, 2
TV_TOLERANCE = 1e-9


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_evidence(items: list[str]) -> dict[str, str]:
    evidence = {}
    for item in items:
        name, sep, value = item.partition("=")
        if not sep or not name or not value:
            raise UsageError(f"evidence must look like VAR=VALUE, got {item!r}")
        if name in evidence:
            raise UsageError(f"variable {name} is observed twice")
        evidence[name] = value
    return evidence


def _print_posterior(p, out) -> None:
    rows = [(v, f"{pr:.6g}") for v, pr in p.explicit.items()]
    c = p.complement
    if c is not None:
        rows.append((f"<{c.count} other values>", f"{c.total_mass:.6g}"))
    width = max([len(p.variable)] + [len(v) for v, _ in rows])
    print(f"{p.variable:<{width}}  probability", file=out)
    for v, pr in rows:
        print(f"{v:<{width}}  {pr}", file=out)
    if c is not None:
        print(f"each other value: {c.per_value:.6g} (values with {c.constraints})", file=out)


def cmd_query(args, out) -> int:
    evidence = _parse_evidence(args.evidence)
    with warnings.catch_warnings():
        warnings.simplefilter("always", SpecWarning)
        net = load_network(args.net, strict=args.strict)
    p = posterior(net, evidence, args.query, order=args.order)
    if args.json:
        print(dumps(posterior_to_dict(p)), file=out)
    else:
        _print_posterior(p, out)
    return EXIT_OK


def cmd_odds(args, out) -> int:
    cfg = load_config(args.config)
    x = RecordDesc(args.x_fname, args.x_phone)
    y = RecordDesc(args.y_fname, args.y_phone)
    result = odds_details(x, y, cfg)
    leaves = [l for l in result.trace if l.variable == "Afname" and not is_zero(l.mass)]
    if args.json:
        doc = {
            "odds": result.odds,
            "likelihood_same": result.likelihood_same,
            "likelihood_diff": result.likelihood_diff,
            "prior_odds": result.prior_odds,
        }
        if args.verbose:
            doc["afname_leaf_masses"] = [
                {
                    "path": list(l.path),
                    "label": str(l.label),
                    "count": "unbounded" if l.count == float("inf") else l.count,
                    "mass": l.mass.value,
                }
                for l in leaves
            ]
        print(dumps(doc), file=out)
        return EXIT_OK
    print(f"odds            {result.odds:.10g}", file=out)
    print(f"P(records|same) {result.likelihood_same:.10g}", file=out)
    print(f"P(records|diff) {result.likelihood_diff:.10g}", file=out)
    print(f"prior odds      {result.prior_odds:.10g}", file=out)
    if args.verbose:
        print("nonzero leaf masses after summing out Afname:", file=out)
        for leaf in leaves:
            print(f"  {leaf}", file=out)
    return EXIT_OK


def cmd_check(args, out) -> int:
    start = time.perf_counter()
    worst, failures, queries = 0.0, 0, 0
    for seed in range(args.start, args.start + args.seeds):
        case = random_network(seed, max_vars=args.max_vars)
        for q in case.queries:
            d = tv_distance(posterior(case.net, case.evidence, q), oracle_posterior(case.net, case.evidence, q))
            queries += 1
            worst = max(worst, d)
            if d > TV_TOLERANCE:
                failures += 1
                print(f"seed {seed} query {q}: TV distance {d:.3e}", file=out)
    elapsed = time.perf_counter() - start
    print(
        f"{args.seeds} networks, {queries} queries, max TV {worst:.3e}, "
        f"{failures} failures, {elapsed:.2f} s",
        file=out,
    )
    return EXIT_OK if failures == 0 else EXIT_INFERENCE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldve", description="Exact inference with large-domain variables.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("query", help="posterior of one variable given evidence")
    q.add_argument("--net", required=True, help="network file (JSON)")
    q.add_argument("--evidence", nargs="*", default=[], metavar="VAR=VALUE")
    q.add_argument("--query", required=True, metavar="VAR")
    q.add_argument("--order", nargs="+", metavar="VAR", help="elimination order of the hidden variables")
    q.add_argument("--json", action="store_true", help="print the posterior as JSON")
    q.add_argument("--strict", action="store_true", help="reject CPDs that do not normalize")
    q.set_defaults(func=cmd_query)

    o = sub.add_parser("odds", help="same-person odds for two records")
    o.add_argument("--config", help="linkage config (JSON); default: the shipped one")
    o.add_argument("--x-fname", required=True)
    o.add_argument("--y-fname", required=True)
    o.add_argument("--x-phone")
    o.add_argument("--y-phone")
    o.add_argument("--json", action="store_true")
    o.add_argument("--verbose", action="store_true", help="also print the Afname leaf masses")
    o.set_defaults(func=cmd_odds)

    c = sub.add_parser("check", help="compare the engine with the brute-force oracle")
    c.add_argument("--seeds", type=int, default=100)
    c.add_argument("--start", type=int, default=0, help="first seed")
    c.add_argument("--max-vars", type=int, default=6)
    c.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    if getattr(args, "seeds", 1) < 1 or getattr(args, "max_vars", 2) < 2:
        print("ldve: error: --seeds must be >= 1 and --max-vars >= 2", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, out)
    except (UsageError, SpecError) as exc:
        print(f"ldve: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InferenceError, TreeError) as exc:
        print(f"ldve: {exc}", file=sys.stderr)
        return EXIT_INFERENCE


if __name__ == "__main__":
    sys.exit(main())
