"""Command line entry point: ``rbffd-lm {solve,converge,heatmap,timing,nodes}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict

from .exceptions import ConfigError, RBFFDError
from .geometry import write_nodeset_csv
from .harness import (
    RunConfig,
    build_nodes,
    format_table,
    run_convergence,
    run_heatmap,
    run_single,
    run_timing,
)


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    common.add_argument("--problem", choices=["tp1", "tp2", "tp3", "tp4"])
    common.add_argument("--method", choices=["c", "lm1", "lm2"])
    common.add_argument("--nodeset", choices=["fitted", "fitted-interior", "unfitted"])
    common.add_argument("--m", type=int)
    common.add_argument("--ratio", type=float)
    common.add_argument("--k", type=int)
    common.add_argument("--h", type=float)
    common.add_argument("--n-interior", type=int, dest="n_interior")
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rbffd-lm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="one solve, optional solution CSV")
    conv = sub.add_parser("converge", parents=[common], help="h-refinement sweep")
    conv.add_argument("--levels", type=_floats, help="comma-separated spacings h")
    conv.add_argument("--counts", type=_ints, help="comma-separated target interior node counts")
    conv.add_argument("--ms", type=_ints)
    conv.add_argument("--methods", type=lambda s: s.split(","))
    conv.add_argument("--seeds", type=_ints)
    heat = sub.add_parser("heatmap", parents=[common], help="(m, n/l) error grid")
    heat.add_argument("--ms", type=_ints)
    heat.add_argument("--ratios", type=_floats)
    heat.add_argument("--methods", type=lambda s: s.split(","))
    timing = sub.add_parser("timing", parents=[common], help="error against assembly+solve time")
    timing.add_argument("--levels", type=_floats)
    timing.add_argument("--methods", type=lambda s: s.split(","))
    sub.add_parser("nodes", parents=[common], help="dump the node set as CSV")
    return parser


def _config(args) -> RunConfig:
    base = RunConfig.load(args.config) if args.config else RunConfig()
    overrides = {k: getattr(args, k) for k in asdict(base) if getattr(args, k, None) is not None}
    if "n_interior" in overrides and "h" not in overrides:
        overrides["h"] = None
    return RunConfig(**{**asdict(base), **overrides}).validate()


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = _config(args)
        if args.command == "solve":
            report = run_single(config)
            print(json.dumps({
                "problem": config.problem, "method": report.method, **report.sizes,
                "rel_l2_error": report.rel_l2_error, "linear_residual": report.linear_residual,
                "constraint_residual": report.constraint_residual, "wall_times": report.wall_times,
            }, indent=2))
        elif args.command == "converge":
            levels = args.levels
            if args.counts:
                from .harness import levels_for_counts
                levels = levels_for_counts(config.problem, args.counts)
            print(format_table(run_convergence(config, levels, args.ms, args.methods, args.seeds)))
        elif args.command == "heatmap":
            print(format_table(run_heatmap(config, args.ms, args.ratios, args.methods)))
        elif args.command == "timing":
            result = run_timing(config, args.methods, args.levels)
            print(format_table(result))
            for r in result.rows:
                print(f"time {r.method} N_I={r.N_I}: assembly+solve {r.assembly_time + r.solve_time:.3f}s")
        elif args.command == "nodes":
            nodes = build_nodes(config)
            if config.out:
                write_nodeset_csv(nodes, config.out)
            print(json.dumps({"h": nodes.h, **nodes.counts}))
    except RBFFDError as exc:
        print("error " + json.dumps({"code": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
