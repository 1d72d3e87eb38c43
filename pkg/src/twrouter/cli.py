"""Command-line entry point: ``twrouter {solve,sequence,model,bench,validate,scaling}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .assignment import (
    InfeasibleInstanceError,
    Solution,
    TabuParams,
    make_solution,
    verify_solution,
)
from .cqm_model import ModelError, build_tsptw_model, export_lp
from .instance import InstanceError, load_instance
from .schedule import RouteError, check_route, evaluate, route_demand, simulate_route
from .sequencer import EXACT_LIMIT, RouteCache, SequenceStats, SequencerError, fix_route, make_backend

log = logging.getLogger("twrouter")

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# solution JSON


def solution_to_dict(solution: Solution, instance, seed) -> dict:
    routes = []
    for r in solution.routes:
        sched = simulate_route(r, instance)
        routes.append({
            "customers": list(r),
            "distance": sched.total_distance,
            "demand": route_demand(r, instance),
            "schedule": [
                {"node": s.node, "arrival": s.arrival, "wait": s.wait, "departure": s.departure}
                for s in sched.stops
            ],
        })
    return {
        "instance": instance.name,
        "seed": seed,
        "total_distance": solution.total_distance,
        "routes": routes,
        "feasible": solution.feasible,
    }


def solution_from_dict(data: dict) -> Solution:
    routes = tuple(tuple(int(v) for v in r["customers"]) for r in data["routes"])
    feasible = bool(data.get("feasible", True))
    return Solution(routes, float(data["total_distance"]), feasible, feasible)


# --------------------------------------------------------------------------
# helpers


def _anneal_overrides(args) -> dict:
    keys = ("initial_temperature", "cooling_rate", "sweeps", "moves_per_sweep", "violation_penalty")
    return {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}


def _tabu_params(args) -> TabuParams:
    return TabuParams(
        tenure=args.tenure,
        max_iterations=args.max_iterations,
        no_improve_limit=args.no_improve_limit,
        sequence_period=args.sequence_period,
    )


def _config(args) -> bench.SolverConfig:
    return bench.SolverConfig(
        backend=args.backend,
        tabu=_tabu_params(args),
        anneal_overrides=_anneal_overrides(args),
        cache_key=args.cache_key,
        customers=getattr(args, "customers", None),
    )


def _load(ref, customers=None):
    try:
        return load_instance(ref, customers)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from None
    except InstanceError as exc:
        raise UsageError(f"{ref}: {exc}") from None


def _parse_ids(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise UsageError(f"expected a comma-separated id list, got {text!r}") from None


def _write_json(data, path: str | None) -> None:
    text = json.dumps(data, indent=2) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# --------------------------------------------------------------------------
# commands


def cmd_solve(args) -> int:
    inst = _load(args.instance, args.customers)
    config = _config(args)
    trace_fh = open(args.trace, "w") if args.trace else None
    try:
        sol = bench.solve_instance(inst, config, args.seed, trace=trace_fh)
    except InfeasibleInstanceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SequencerError as exc:
        raise UsageError(str(exc)) from None
    finally:
        if trace_fh:
            trace_fh.close()

    report = verify_solution(sol, inst)
    bks = bench.load_bks().get(inst.name.upper()) if args.customers is None else None
    for k, r in enumerate(sol.routes):
        sched = simulate_route(r, inst)
        print(f"route {k + 1:2d}: {' '.join(map(str, r))}")
        print(f"          distance {sched.total_distance:.1f}  demand {route_demand(r, inst):g}  "
              f"return {sched.return_arrival:.1f}  violations {sched.violations}")
    line = f"{inst.name}: {len(sol.routes)} routes, distance {sol.total_distance:.1f}"
    if bks:
        line += f", gap {bench.format_gap(bench.optimality_gap(sol.total_distance, bks))}% (BKS {bks:.1f})"
    print(line)
    for v in report:
        print(f"violation [{v.kind}] {v.detail}", file=sys.stderr)
    _write_json(solution_to_dict(sol, inst, args.seed), args.out or f"{inst.name}_seed{args.seed}.json")
    if args.plot:
        from .plotting import route_map

        route_map(inst, sol.routes, args.plot, title=f"{inst.name} ({sol.total_distance:.1f})")
    return EXIT_OK if sol.feasible and not report else EXIT_VIOLATION


def cmd_sequence(args) -> int:
    inst = _load(args.instance)
    try:
        route = check_route(_parse_ids(args.route), inst)
    except RouteError as exc:
        raise UsageError(str(exc)) from None
    if args.backend == "exact" and len(route) > EXACT_LIMIT:
        raise UsageError(f"exact backend rejects routes with more than {EXACT_LIMIT} customers")
    pre_viol, pre_cost = evaluate(route, inst)
    backend = make_backend(args.backend, seed=bench.component_seeds(args.seed)["anneal"], **_anneal_overrides(args))
    raw = backend.solve(inst, route, route) if route else route
    raw_viol, raw_cost = evaluate(raw, inst)
    final, outcome = raw, "disabled"
    if args.repair:
        fixed, result = fix_route(raw, inst)
        outcome = result.value
        final = route if result.value == "unfixable" else fixed
    fin_viol, fin_cost = evaluate(final, inst)
    cols = ("pre_cost", "optimized_cost", "time_violated", "improved_cost", "repair", "final_cost", "final_violated")
    vals = (f"{pre_cost:.1f}", f"{raw_cost:.1f}", "yes" if raw_viol else "no",
            "yes" if raw_cost < pre_cost - 1e-9 else "no", outcome, f"{fin_cost:.1f}", "yes" if fin_viol else "no")
    print("\t".join(cols))
    print("\t".join(vals))
    print("route: " + ",".join(map(str, final)))
    return EXIT_OK


def cmd_model(args) -> int:
    inst = _load(args.instance)
    try:
        model = build_tsptw_model(inst, _parse_ids(args.customers))
    except ModelError as exc:
        raise UsageError(str(exc)) from None
    text = export_lp(model)
    if args.out and args.out != "-":
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    instances = args.instances or list(bench.REFERENCE_INSTANCES)
    for ref in instances:
        _load(ref, args.customers)  # fail fast on bad paths
    config = _config(args)
    bks = bench.load_bks(args.bks) if args.bks else None
    rows = bench.run_benchmark(instances, config, args.seeds, bks=bks, jobs=args.jobs)
    written = bench.emit_report(rows, args.out, plot_dir=args.plot, timing=args.timing)
    written.append(bench.write_comparison(rows, Path(args.out).with_name(Path(args.out).stem + "_comparison.csv")))
    for row in rows:
        if row.seed == "avg":
            print(f"{row.instance:6s} mean distance {row.distance:.1f}  gap {bench.format_gap(row.gap_percent) or '-'}")
    for p in written:
        print(f"wrote {p}")
    return EXIT_OK if all(r.feasible for r in rows) else EXIT_VIOLATION


def cmd_validate(args) -> int:
    inst = _load(args.instance)
    try:
        data = json.loads(Path(args.solution).read_text())
        sol = solution_from_dict(data)
    except FileNotFoundError:
        raise UsageError(f"solution file not found: {args.solution}") from None
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"{args.solution}: malformed solution JSON ({exc})") from None
    report = verify_solution(sol, inst)
    if data.get("instance") not in (None, inst.name):
        print(f"warning: solution is for {data['instance']}, checking against {inst.name}", file=sys.stderr)
    if not report:
        print(f"valid: {len(sol.routes)} routes, distance {sol.total_distance:.1f}")
        return EXIT_OK
    for v in report:
        print(f"violation [{v.kind}] {v.detail}")
    return EXIT_VIOLATION


def cmd_scaling(args) -> int:
    inst = _load(args.instance)
    stops = _parse_ids(args.stops)
    if any(s > inst.size - 1 or s < 1 for s in stops):
        raise UsageError(f"stop counts must lie in 1..{inst.size - 1}")
    runs, points = bench.scaling_study(inst, stops, args.seeds, backend=args.backend, **_anneal_overrides(args))
    print("stops\trepair\truns\tviolated_fraction\tmean_violation_proportion")
    for p in points:
        if p.repair and not args.repair:
            continue
        print(f"{p.stops}\t{'on' if p.repair else 'off'}\t{p.runs}\t{p.violated_fraction:.3f}\t{p.mean_violation_proportion:.4f}")
    if args.out:
        bench.write_scaling_csv([r for r in runs if args.repair or not r.repair], args.out)
    if args.plot:
        from .plotting import scaling_chart

        scaling_chart([p for p in points if args.repair or not p.repair], args.plot, inst.name)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _add_backend(p, default="anneal"):
    p.add_argument("--backend", choices=("exact", "anneal"), default=default)
    p.add_argument("--seed", type=int, default=0)
    g = p.add_argument_group("annealing overrides")
    g.add_argument("--initial-temperature", type=float)
    g.add_argument("--cooling-rate", type=float)
    g.add_argument("--sweeps", type=int)
    g.add_argument("--moves-per-sweep", type=int)
    g.add_argument("--violation-penalty", type=float)


def _add_tabu(p):
    d = TabuParams()
    g = p.add_argument_group("tabu search")
    g.add_argument("--tenure", type=int, default=d.tenure)
    g.add_argument("--max-iterations", type=int, default=d.max_iterations)
    g.add_argument("--no-improve-limit", type=int, default=d.no_improve_limit)
    g.add_argument("--sequence-period", type=int, default=d.sequence_period)
    g.add_argument("--cache-key", choices=("sorted", "ordered"), default="sorted")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="twrouter", description=__doc__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="Clarke-Wright + tabu search on one instance")
    p.add_argument("instance")
    p.add_argument("--customers", type=int, help="keep only the first N customers")
    p.add_argument("--out", help="solution JSON path (default <instance>_seed<seed>.json, '-' for stdout)")
    p.add_argument("--trace", help="write one JSON record per tabu iteration")
    p.add_argument("--plot", help="route map SVG path")
    _add_backend(p)
    _add_tabu(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sequence", help="sequence and repair a single route")
    p.add_argument("instance")
    p.add_argument("route", help="comma-separated customer ids")
    p.add_argument("--no-repair", dest="repair", action="store_false")
    _add_backend(p)
    p.set_defaults(func=cmd_sequence)

    p = sub.add_parser("model", help="export the TSPTW model of a customer subset as LP")
    p.add_argument("instance")
    p.add_argument("--customers", required=True, help="comma-separated customer ids")
    p.add_argument("--out", help="LP path (default stdout)")
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("bench", help="run seeds over instances and write the gap CSV")
    p.add_argument("instances", nargs="*", help=f"default: {' '.join(bench.REFERENCE_INSTANCES)}")
    p.add_argument("--seeds", type=int, nargs="+", default=[1, 2, 3])
    p.add_argument("--customers", type=int)
    p.add_argument("--out", default="bench.csv")
    p.add_argument("--plot", metavar="DIR", help="write SVG charts into DIR")
    p.add_argument("--bks", help="CSV with instance,bks columns")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-timing", dest="timing", action="store_false",
                   help="leave runtime_s empty so reruns are byte-identical")
    _add_backend(p)
    _add_tabu(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="check a solution JSON against an instance")
    p.add_argument("instance")
    p.add_argument("solution")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("scaling", help="violation proportion against route length")
    p.add_argument("instance")
    p.add_argument("--stops", default="10,13,35")
    p.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    p.add_argument("--no-repair", dest="repair", action="store_false", help="report the raw series only")
    p.add_argument("--out", help="per-run CSV")
    p.add_argument("--plot", help="SVG path")
    _add_backend(p)
    p.set_defaults(func=cmd_scaling)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
