"""Command line interface.

Subcommands: ``generate`` builds a random instance file, ``solve`` runs
the adaptive search, ``bench`` runs the constructive reference heuristics,
``experiment`` runs a study grid, ``verify`` re-checks a solution file and
``oracle`` solves tiny instances exactly.

Every subcommand is deterministic given its inputs and seed; output files
carry no timestamps, so reruns are byte-identical.  Exit codes: 0 on
success, 1 when the solve failed or the solution is infeasible, 2 on bad
input.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import fields
from pathlib import Path

from .alns import AlnsConfig, run
from .bench import (
    EXPERIMENT_KINDS, BenchError, Report, best_of_repeats, bm1, bm2,
    experiment, fmt, format_report, write_report,
)
from .instance import (
    GenSpec, ParseError, ValidationError, generate, load, save,
)
from .mip import OracleSizeError, brute_force_oracle
from .solution import (
    check_feasibility, evaluate, load_solution, save_solution,
)

_HEURISTICS = {"bm1": bm1, "bm2": bm2}


def _resolve_seed(flag_value, file_value=None):
    """Flag beats config file beats the PICKOPT_SEED variable beats 0."""
    if flag_value is not None:
        return flag_value
    if file_value is not None:
        return file_value
    env = os.environ.get("PICKOPT_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ParseError(f"PICKOPT_SEED is not an integer: {env!r}")
    return 0


def _print_breakdown(bd) -> None:
    print(f"travel {fmt(bd.travel)}")
    print(f"tardiness {fmt(bd.tardiness)}")
    print(f"splitup {fmt(bd.splitup)}")
    print(f"capacity_penalty {fmt(bd.capacity_penalty)}")
    print(f"total {fmt(bd.total)}")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON: {exc}")


# ---------------------------------------------------------------------------
# generate

_GEN_FLAGS = [
    # (flag, GenSpec field, type)
    ("--return-fraction", "return_fraction", float),
    ("--num-aisles", "num_aisles", int),
    ("--aisle-length", "aisle_length", float),
    ("--aisle-width", "aisle_width", float),
    ("--deadline-hours", "deadline_hours", int),
    ("--num-pickers", "num_pickers", int),
    ("--max-batches-per-picker", "max_batches_per_picker", int),
    ("--capacity", "capacity", float),
    ("--pick-time", "pick_time", float),
    ("--break-time", "break_time", float),
    ("--travel-cost-rate", "travel_cost_rate", float),
    ("--tardiness-rate", "tardiness_rate", float),
    ("--splitup-cost", "splitup_cost", float),
    ("--horizon", "horizon", float),
    ("--travel-speed", "travel_speed", float),
    ("--max-lines-per-order", "max_lines_per_order", int),
]


def _add_generate_parser(sub):
    p = sub.add_parser("generate", help="write a random instance file")
    p.add_argument("--order-lines", dest="num_orderlines", type=int,
                   required=True, help="number of order lines")
    for flag, dest, typ in _GEN_FLAGS:
        p.add_argument(flag, dest=dest, type=typ, default=None)
    p.add_argument("--tardiness-per-product", dest="tardiness_per_product",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default="instance.json",
                   help="instance file to write (default instance.json)")


def _cmd_generate(args) -> int:
    kwargs = {"num_orderlines": args.num_orderlines,
              "seed": _resolve_seed(args.seed)}
    for _, dest, _ in _GEN_FLAGS:
        value = getattr(args, dest)
        if value is not None:
            kwargs[dest] = value
    if args.tardiness_per_product is not None:
        kwargs["tardiness_per_product"] = args.tardiness_per_product
    instance = generate(GenSpec(**kwargs))
    save(instance, args.out)
    print(f"wrote {args.out} ({instance.num_lines} lines, "
          f"{len(instance.customers)} customers, "
          f"{instance.params.num_pickers} pickers)")
    return 0


# ---------------------------------------------------------------------------
# solve

def _add_config_flags(p) -> None:
    for f in fields(AlnsConfig):
        flag = "--" + f.name.replace("_", "-")
        if isinstance(f.default, bool):
            p.add_argument(flag, dest=f.name,
                           action=argparse.BooleanOptionalAction,
                           default=None)
        elif isinstance(f.default, int):
            if f.name == "num_contexts":
                p.add_argument("--contexts", "--num-contexts",
                               dest=f.name, type=int, default=None)
            else:
                p.add_argument(flag, dest=f.name, type=int, default=None)
        else:
            p.add_argument(flag, dest=f.name, type=float, default=None)


def _add_solve_parser(sub):
    p = sub.add_parser("solve", help="run the adaptive search")
    p.add_argument("instance", nargs="?", default="instance.json")
    p.add_argument("--config", default=None,
                   help="JSON file with config fields; flags override it")
    _add_config_flags(p)
    p.add_argument("--out", default="solution.json")
    p.add_argument("--log", default=None,
                   help="search log CSV (default: <out>.log.csv)")
    p.add_argument("--plot", default=None,
                   help="write a route figure to this PNG path")
    p.add_argument("--pool-dump", default=None,
                   help="write collected batch/schedule pools to this file")


def _build_config(args) -> AlnsConfig:
    file_kwargs = {}
    if args.config is not None:
        data = _load_json(args.config)
        if not isinstance(data, dict):
            raise ParseError(f"{args.config}: config must be a JSON object")
        file_kwargs = dict(data)
    flag_kwargs = {}
    for f in fields(AlnsConfig):
        value = getattr(args, f.name)
        if value is not None:
            flag_kwargs[f.name] = value
    seed = _resolve_seed(flag_kwargs.pop("seed", None),
                         file_kwargs.pop("seed", None))
    merged = {**file_kwargs, **flag_kwargs, "seed": seed}
    try:
        return AlnsConfig(**merged)
    except TypeError as exc:
        raise ParseError(f"bad config field: {exc}")


def _write_search_log(log, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "context", "round", "operator",
                         "delta", "accepted", "best_violation",
                         "best_cost"])
        for row in log:
            writer.writerow([row.iteration, row.context, row.round,
                             row.operator, fmt(row.delta),
                             int(row.accepted), fmt(row.best_violation),
                             fmt(row.best_cost)])


def _cmd_solve(args) -> int:
    instance = load(args.instance)
    cfg = _build_config(args)
    result = run(instance, cfg)
    save_solution(result.solution, instance, args.out)
    log_path = args.log if args.log is not None else args.out + ".log.csv"
    _write_search_log(result.log, log_path)
    if args.pool_dump is not None:
        dump = {"batch_pool": result.batch_pool.dump(),
                "schedule_pool": result.schedule_pool.dump()}
        Path(args.pool_dump).write_text(json.dumps(dump, indent=2) + "\n")
    if args.plot is not None:
        from .plotting import plot_solution
        plot_solution(result.solution, instance, args.plot)
    _print_breakdown(result.cost)
    print(f"feasible {'yes' if result.feasible else 'no'}")
    for violation in result.violations:
        print(f"violation {violation.kind}: {violation.message}")
    return 0 if result.feasible else 1


# ---------------------------------------------------------------------------
# bench

def _add_bench_parser(sub):
    p = sub.add_parser("bench", help="run a constructive reference heuristic")
    p.add_argument("instance", nargs="?", default="instance.json")
    p.add_argument("--heuristic", choices=sorted(_HEURISTICS),
                   default="bm2")
    p.add_argument("--repeats", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="per-repeat cost CSV")
    p.add_argument("--solution-out", default=None,
                   help="write the best solution to this file")


def _cmd_bench(args) -> int:
    instance = load(args.instance)
    seed = _resolve_seed(args.seed)
    result = best_of_repeats(_HEURISTICS[args.heuristic], instance,
                             repeats=args.repeats, base_seed=seed)
    if args.out is not None:
        report = Report("bench", ["heuristic", "repeat", "cost"])
        report.rows = [[args.heuristic, i, c]
                       for i, c in enumerate(result.costs)]
        write_report(report, args.out)
    if args.solution_out is not None:
        save_solution(result.solution, instance, args.solution_out)
    print(f"heuristic {args.heuristic}")
    print(f"repeats {args.repeats}")
    print(f"best {fmt(result.breakdown.total)}")
    print(f"mean {fmt(sum(result.costs) / len(result.costs))}")
    print(f"worst {fmt(max(result.costs))}")
    return 0


# ---------------------------------------------------------------------------
# experiment

def _add_experiment_parser(sub):
    p = sub.add_parser("experiment", help="run a study over instance grids")
    p.add_argument("--spec", required=True,
                   help="JSON study description (see README)")
    p.add_argument("--kind", choices=EXPERIMENT_KINDS, default=None,
                   help="override the kind named in the spec file")
    p.add_argument("--seed", type=int, default=None,
                   help="override the solver seed from the spec")
    p.add_argument("--out", default=None, help="report CSV path")
    p.add_argument("--plot-dir", default=None,
                   help="write one figure per plot group into this directory")


def _cmd_experiment(args) -> int:
    spec = _load_json(args.spec)
    if not isinstance(spec, dict):
        raise ParseError(f"{args.spec}: study spec must be a JSON object")
    kind = args.kind or spec.get("kind")
    if not kind:
        raise ParseError("study kind missing: use --kind or a 'kind' entry")
    instances = []
    labels = list(spec.get("labels", []))
    for path in spec.get("instance_files", []):
        instances.append(load(path))
        if len(labels) < len(instances):
            labels.append(Path(path).stem)
    for gen_entry in spec.get("instances", []):
        try:
            instances.append(generate(GenSpec(**gen_entry)))
        except TypeError as exc:
            raise ParseError(f"bad generator entry: {exc}")
        if len(labels) < len(instances):
            labels.append(str(len(instances)))
    if not instances:
        raise ParseError("study spec names no instances")
    alns_kwargs = dict(spec.get("alns", {}))
    alns_kwargs["seed"] = _resolve_seed(args.seed,
                                        alns_kwargs.pop("seed", None))
    try:
        cfg = AlnsConfig(**alns_kwargs)
    except TypeError as exc:
        raise ParseError(f"bad config field: {exc}")
    report = experiment(kind, instances, cfg,
                        repeats=int(spec.get("repeats", 1)),
                        betas=spec.get("betas"),
                        capacities=spec.get("capacities"),
                        labels=labels)
    text = format_report(report)
    if args.out is not None:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.plot_dir is not None:
        from .plotting import plot_report
        for path in plot_report(report, args.plot_dir, prefix=f"{kind}-"):
            print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# verify / oracle

def _add_verify_parser(sub):
    p = sub.add_parser("verify", help="re-check a solution file")
    p.add_argument("instance", nargs="?", default="instance.json")
    p.add_argument("solution", nargs="?", default="solution.json")


def _cmd_verify(args) -> int:
    instance = load(args.instance)
    solution = load_solution(args.solution, instance)
    violations = check_feasibility(solution, instance)
    if not any(v.kind == "coverage" for v in violations):
        _print_breakdown(evaluate(solution, instance))
    print(f"feasible {'yes' if not violations else 'no'}")
    for violation in violations:
        print(f"violation {violation.kind}: {violation.message}")
    return 0 if not violations else 1


def _add_oracle_parser(sub):
    p = sub.add_parser("oracle", help="solve a tiny instance exactly")
    p.add_argument("instance", nargs="?", default="instance.json")
    p.add_argument("--out", default=None,
                   help="write the optimal solution to this file")


def _cmd_oracle(args) -> int:
    instance = load(args.instance)
    try:
        solution, breakdown = brute_force_oracle(instance)
    except OracleSizeError:
        raise
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.out is not None:
        save_solution(solution, instance, args.out)
    _print_breakdown(breakdown)
    print("feasible yes")
    return 0


# ---------------------------------------------------------------------------

_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "bench": _cmd_bench,
    "experiment": _cmd_experiment,
    "verify": _cmd_verify,
    "oracle": _cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pickopt",
        description="Batch, route and schedule warehouse order picking.")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate_parser(sub)
    _add_solve_parser(sub)
    _add_bench_parser(sub)
    _add_experiment_parser(sub)
    _add_verify_parser(sub)
    _add_oracle_parser(sub)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except BenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError, OracleSizeError, ValueError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
