"""Command line front end.

    replan-bench run --scenario <file|name> --algo <name> ... --runs N
                     --seed S --workers K --out <dir> [--trace]
    replan-bench replay --raw <csv> --trial I --svg <file> [--scenario <file>]
    replan-bench validate --scenario <file|name>

Exit codes: 0 success, 1 usage error, 2 scenario validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    ALGORITHMS,
    DEFAULT_ITERS_PER_SECOND,
    emit_csv,
    emit_trace_svg,
    parse_raw_csv,
    run_batch,
    run_trial_traced,
)
from .world import Scenario, ScenarioError, bundled_scenario_path, load_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SCENARIO = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise _UsageError(message)


def _resolve_scenario(spec: str) -> Scenario:
    p = Path(spec)
    if p.exists():
        return load_scenario(p)
    bundled = bundled_scenario_path(spec)
    if bundled.exists():
        return load_scenario(bundled)
    raise ScenarioError(f"no scenario file or bundled scenario named {spec!r}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="replan-bench", description="2D dynamic replanning benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run seeded trial batches")
    run_p.add_argument("--scenario", required=True, help="scenario file or bundled name")
    run_p.add_argument(
        "--algo",
        action="append",
        choices=sorted(ALGORITHMS),
        help="algorithm to run (repeatable; default: all)",
    )
    run_p.add_argument("--runs", type=int, default=100)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--workers", type=int, default=1)
    run_p.add_argument("--out", required=True, help="output directory")
    run_p.add_argument("--trace", action="store_true", help="render one SVG trace per trial")
    run_p.add_argument("--iters-per-sec", type=float, default=DEFAULT_ITERS_PER_SECOND)

    rep_p = sub.add_parser("replay", help="re-run one recorded trial and render it")
    rep_p.add_argument("--raw", required=True, help="raw trial CSV from a run")
    rep_p.add_argument("--trial", type=int, required=True, help="row index into the raw CSV")
    rep_p.add_argument("--svg", required=True, help="output SVG file")
    rep_p.add_argument("--scenario", help="scenario file override (default: bundled by name)")
    rep_p.add_argument("--iters-per-sec", type=float, default=DEFAULT_ITERS_PER_SECOND)

    val_p = sub.add_parser("validate", help="parse and validate a scenario document")
    val_p.add_argument("--scenario", required=True)
    return p


def _cmd_run(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    algorithms = args.algo or sorted(ALGORITHMS)
    if args.runs < 1:
        raise _UsageError("--runs must be >= 1")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trials, summaries = run_batch(
        scenario,
        algorithms,
        args.runs,
        base_seed=args.seed,
        workers=max(1, args.workers),
        iters_per_second=args.iters_per_sec,
    )
    emit_csv(trials, out_dir / "raw.csv")
    emit_csv(summaries, out_dir / "summary.csv")
    if args.trace:
        trace_dir = out_dir / "traces"
        trace_dir.mkdir(exist_ok=True)
        for t in trials:
            _, trace = run_trial_traced(scenario, t.algorithm, t.seed, args.iters_per_sec)
            emit_trace_svg(trace, trace_dir / f"{t.algorithm}_{t.seed}.svg")
    print(f"{'algorithm':<12} {'success %':>9} {'coll checks':>12} {'nn lookups':>11} {'time [s]':>9}")
    for s in summaries:
        print(
            f"{s.algorithm:<12} {s.success_pct:>9.1f} {s.mean_collision_checks:>12.0f} "
            f"{s.mean_nn_lookups:>11.0f} {s.mean_time_s:>9.2f}"
        )
    print(f"wrote {out_dir / 'raw.csv'} and {out_dir / 'summary.csv'}")
    return EXIT_OK


def _cmd_replay(args) -> int:
    rows = parse_raw_csv(args.raw)
    if not (0 <= args.trial < len(rows)):
        raise _UsageError(f"--trial must be in [0, {len(rows) - 1}]")
    row = rows[args.trial]
    scenario = _resolve_scenario(args.scenario if args.scenario else row.scenario)
    metrics, trace = run_trial_traced(scenario, row.algorithm, row.seed, args.iters_per_sec)
    emit_trace_svg(trace, args.svg)
    if (metrics.success, metrics.collision_checks) != (row.success, row.collision_checks):
        print("warning: replay metrics differ from the recorded row", file=sys.stderr)
    print(f"replayed {row.algorithm} seed {row.seed}: wrote {args.svg}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    kinds = {}
    for o in scenario.obstacles:
        kinds[o.kind] = kinds.get(o.kind, 0) + 1
    desc = ", ".join(f"{v} {k}" for k, v in sorted(kinds.items())) or "no obstacles"
    print(f"{scenario.name}: valid ({len(scenario.walls)} walls, {desc})")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_validate(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ScenarioError as exc:
        print(f"scenario error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
