"""Command line entry point.

    crowdal run CONFIG.json [--out DIR] [--no-report]
    crowdal report STORE_DIR [--pairs baseline:uncertainty,...] [--out DIR]
    crowdal gen-synth KIND N SEED OUT.csv
    crowdal pba-solve INSTANCE.json [--method dp|brute]

Exit status is 0 on success and 2 when a config is invalid or any grid
cell failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from ..crowd.pba import PBAConfig, pba_allocate, pba_brute_force, uniform_allocation
from ..synth import SYNTHETIC_KINDS, generate, write_csv
from .config import ConfigError, load_config
from .report import emit_report, parse_pairs
from .runner import run_experiment

EXIT_OK = 0
EXIT_FAILURE = 2


def _cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    store = run_experiment(config, output_root=args.out)
    print(f"store: {store.path}")
    print(f"cells: {len(store.cells)} ok: {len(store.cells) - len(store.failures)} failed: {len(store.failures)}")
    for cell in store.failures:
        print(f"  failed {cell.ranker} budget={cell.budget} rep={cell.repetition}: {cell.error}", file=sys.stderr)
    if not args.no_report and len(store.failures) < len(store.cells):
        report = emit_report(store.path)
        print(f"report: {report.path}")
    return EXIT_OK if not store.failures else EXIT_FAILURE


def _cmd_report(args) -> int:
    try:
        report = emit_report(args.store, parse_pairs(args.pairs), args.out)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for row in report.comparisons:
        cells = [f"{k}={'undefined' if row[k] is None else format(row[k], '.4f')}"
                 for k in ("auc_ratio", "auclog_ratio", "questions_saved")]
        print(f"{row['baseline']} -> {row['method']}: " + " ".join(cells))
    print(f"report: {report.path}")
    return EXIT_OK


def _cmd_gen_synth(args) -> int:
    try:
        X, y = generate(args.kind, args.n, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    write_csv(args.out, X, y)
    print(f"wrote {args.n} rows to {args.out}")
    return EXIT_OK


def _solve(instance: dict, method: str) -> dict:
    p_hat = {int(g): float(v) for g, v in instance["p"].items()}
    f = {int(g): int(v) for g, v in instance["f"].items()}
    cfg = PBAConfig(
        num_groups=len(f),
        n0=int(instance.get("n0", 2)),
        v0=int(instance.get("v0", 9)),
        b_max=int(instance.get("b_max", 9)),
        vote_budget=int(instance["budget"]),
    )
    solver = {"dp": pba_allocate, "brute": pba_brute_force}[method]
    alloc = solver(cfg, p_hat, f)
    uni = uniform_allocation(cfg, p_hat, f)
    return {
        "method": method,
        "votes_per_group": {str(g): b for g, b in sorted(alloc.votes_per_group.items())},
        "expected_error": alloc.expected_error,
        "cost": alloc.cost,
        "uniform": {
            "votes_per_group": {str(g): b for g, b in sorted(uni.votes_per_group.items())},
            "expected_error": uni.expected_error,
            "cost": uni.cost,
        },
    }


def _cmd_pba_solve(args) -> int:
    try:
        instance = json.loads(Path(args.instance).read_text(encoding="utf-8"))
        result = _solve(instance, args.method)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crowdal", description="Crowd-assisted active labeling experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment grid")
    p.add_argument("config", type=Path)
    p.add_argument("--out", type=Path, default=None, help="override the configured output directory")
    p.add_argument("--no-report", action="store_true", help="skip the report and figures")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("report", help="rebuild comparisons, curves and figures from a store")
    p.add_argument("store", type=Path)
    p.add_argument("--pairs", default=None, help="comma-separated baseline:method pairs")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("gen-synth", help="write a synthetic dataset as CSV")
    p.add_argument("kind", choices=SYNTHETIC_KINDS)
    p.add_argument("n", type=int)
    p.add_argument("seed", type=int)
    p.add_argument("out", type=Path)
    p.set_defaults(func=_cmd_gen_synth)

    p = sub.add_parser("pba-solve", help="solve one vote-allocation instance")
    p.add_argument("instance", type=Path)
    p.add_argument("--method", choices=("dp", "brute"), default="dp")
    p.set_defaults(func=_cmd_pba_solve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
