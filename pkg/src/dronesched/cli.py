"""Command-line entry point.

Exit codes: 0 success, 1 usage or input error, 2 invalid schedule,
3 exact solver capacity or timeout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import ConfigError, load_config, rows_to_csv, run_experiment
from .exact import DEFAULT_MAX_MASKS, DEFAULT_TIMEOUT, SolverLimitError, exact_solve
from .greedy import DEFAULT_THRESHOLD, greedy_solve
from .ilp import DEFAULT_MU, MODES, REPAIRED, ModelError, build_ilp, mapping_text, write_lp
from .instance import InstanceError, generate_instance, parse_instance, serialize_instance
from .render import render_schedule_grid
from .schedule import ScheduleError, parse_schedule, serialize_schedule, validate_schedule

EXIT_OK, EXIT_USAGE, EXIT_INVALID, EXIT_LIMIT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _travel_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN:MAX, got {text!r}") from None
    return lo, hi


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _summary(res) -> str:
    return json.dumps({"covered": res.covered, "total": res.total, "trips": res.trips,
                       "restarts": res.restarts_used, "elapsed_s": round(res.elapsed, 6)})


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="dronesched", description="Multi-drone monitoring scheduler")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a random instance")
    g.add_argument("--nodes", type=int, required=True)
    g.add_argument("--horizon", type=int, required=True)
    g.add_argument("--agents", type=int, required=True)
    g.add_argument("--demand", type=float, default=0.15)
    g.add_argument("--travel", type=_travel_range, default=(1, 3), metavar="MIN:MAX")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--independent-fin", action="store_true",
                   help="draw final nodes independently of initial nodes")
    g.add_argument("-o", "--output")

    gr = sub.add_parser("greedy", help="solve with the greedy restart heuristic")
    gr.add_argument("instance")
    gr.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD)
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("-o", "--output")

    ex = sub.add_parser("exact", help="solve to optimality (small instances only)")
    ex.add_argument("instance")
    ex.add_argument("--max-masks", type=int, default=DEFAULT_MAX_MASKS)
    ex.add_argument("--timeout", type=float, default=DEFAULT_TIMEOUT)
    ex.add_argument("-o", "--output")

    v = sub.add_parser("validate", help="check a schedule against an instance")
    v.add_argument("instance")
    v.add_argument("schedule")

    lp = sub.add_parser("export-lp", help="write the ILP in CPLEX LP format")
    lp.add_argument("instance")
    lp.add_argument("--mu", default=str(DEFAULT_MU))
    lp.add_argument("--mode", choices=MODES, default=REPAIRED)
    lp.add_argument("-o", "--output", required=True)
    lp.add_argument("--map", help="mapping file path (default: OUTPUT.map)")

    sh = sub.add_parser("show", help="print a schedule as a time x location grid")
    sh.add_argument("instance")
    sh.add_argument("schedule")

    b = sub.add_parser("bench", help="run an experiment config and write CSV")
    b.add_argument("config")
    b.add_argument("-o", "--output")
    return p


def _run(args) -> int:
    if args.command == "gen":
        inst = generate_instance(args.nodes, args.horizon, args.agents, args.demand,
                                 args.travel[0], args.travel[1], args.seed,
                                 independent_fin=args.independent_fin)
        _emit(serialize_instance(inst), args.output)
        return EXIT_OK

    if args.command == "bench":
        cfg = load_config(_read(args.config))
        _emit(rows_to_csv(run_experiment(cfg)), args.output)
        return EXIT_OK

    inst = parse_instance(_read(args.instance))

    if args.command in ("greedy", "exact"):
        if args.command == "greedy":
            if args.threshold < 1:
                raise UsageError("--threshold must be >= 1")
            res = greedy_solve(inst, args.threshold, args.seed)
        else:
            res = exact_solve(inst, max_masks=args.max_masks, timeout=args.timeout)
        _emit(serialize_schedule(inst, res.schedule), args.output)
        print(_summary(res), file=sys.stderr if args.output in (None, "-") else sys.stdout)
        return EXIT_OK

    if args.command == "export-lp":
        model = build_ilp(inst, args.mu, args.mode)
        _emit(write_lp(model), args.output)
        Path(args.map or f"{args.output}.map").write_text(mapping_text(model), encoding="utf-8")
        return EXIT_OK

    schedule = parse_schedule(_read(args.schedule), inst)
    if args.command == "validate":
        r = validate_schedule(inst, schedule)
        print(json.dumps({"valid": True, "covered": r.covered, "total": r.total, "trips": r.trips}))
    else:
        sys.stdout.write(render_schedule_grid(inst, schedule))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _run(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ScheduleError as exc:
        print(f"invalid schedule: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SolverLimitError as exc:
        print(f"exact solver limit: {exc}", file=sys.stderr)
        return EXIT_LIMIT
    except (InstanceError, ConfigError, ModelError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
