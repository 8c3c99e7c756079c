"""Command-line entry points.

    peergraph run <spec-file> [--seed S] [--out DIR]
    peergraph validate <spec-file>
    peergraph oracle <graph> <request-file> [--out FILE] [--now T]
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import experiment, metrics
from .graph import load_edge_list
from .inference import params_from_json


def _cmd_run(args) -> int:
    spec = experiment.load_spec(args.spec_file)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    written = experiment.run(spec, args.out)
    for path in written:
        print(path)
    return 0


def _cmd_validate(args) -> int:
    try:
        spec = experiment.load_spec(args.spec_file)
    except Exception as exc:  # malformed TOML or missing keys
        print(f"error: {exc}", file=sys.stderr)
        return 2
    problems = experiment.validate(spec)
    if problems:
        for p in problems:
            print(f"problem: {p}", file=sys.stderr)
        return 1
    print("ok")
    return 0


ORACLE_HEADER = ["request_id", "kind", "ego", "value"]


def _render_value(value) -> str:
    if isinstance(value, (set, frozenset)):
        return " ".join(str(u) for u in sorted(value))
    if isinstance(value, (list, tuple)):
        return " ".join(str(u) for u in value)
    return metrics.fmt(value)


def _cmd_oracle(args) -> int:
    from .inference import evaluate_centralized

    graph = load_edge_list(args.graph)
    rows = []
    with open(args.request_file) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            req = params_from_json(line)
            res = evaluate_centralized(graph, req, args.now)
            rows.append([req.request_id, req.kind, req.ego, _render_value(res.value)])
    if args.out:
        metrics.write_csv(args.out, ORACLE_HEADER, rows)
    else:
        import csv

        writer = csv.writer(sys.stdout)
        writer.writerow(ORACLE_HEADER)
        for row in rows:
            writer.writerow([metrics.fmt(x) for x in row])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="peergraph", description="Distributed social graph simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment spec")
    run.add_argument("spec_file")
    run.add_argument("--seed", type=int, default=None, help="override the spec seed")
    run.add_argument("--out", default="out", help="output directory")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a spec without running it")
    val.add_argument("spec_file")
    val.set_defaults(func=_cmd_validate)

    oracle = sub.add_parser(
        "oracle", help="evaluate requests against a graph file, no overlay"
    )
    oracle.add_argument("graph")
    oracle.add_argument("request_file")
    oracle.add_argument("--out", default=None, help="write CSV here instead of stdout")
    oracle.add_argument("--now", type=float, default=0.0, help="evaluation timestamp")
    oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
