"""Benchmark protocol: gap tables, averaged runs and the stop-count scaling study."""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .assignment import Solution, TabuParams, clarke_wright, tabu_search, verify_solution
from .instance import Instance, load_instance
from .schedule import evaluate
from .sequencer import RouteCache, SequenceStats, fix_route, make_backend

log = logging.getLogger(__name__)

CSV_HEADER = ("instance", "solver", "seed", "distance", "gap_percent", "feasible", "runtime_s")
REFERENCE_INSTANCES = ("R101", "R102", "R103", "RC101", "RC102", "RC103")


def optimality_gap(distance: float, bks: float) -> float:
    """Percent above the best known solution, unrounded."""
    if not bks > 0:
        raise ValueError(f"best known solution must be positive, got {bks}")
    return 100.0 * (distance - bks) / bks


def format_gap(gap: float | None) -> str:
    return "" if gap is None or math.isnan(gap) else f"{gap:.2f}"


def load_bks(path: str | Path | None = None) -> dict[str, float]:
    if path is None:
        text = (resources.files("twrouter") / "data" / "bks.csv").read_text()
    else:
        text = Path(path).read_text()
    return {row["instance"].upper(): float(row["bks"]) for row in csv.DictReader(io.StringIO(text))}


def load_published_reference() -> dict[str, dict[str, float]]:
    """Published distances per solver tag ('ortools', 'hqts') and instance."""
    text = (resources.files("twrouter") / "data" / "published_reference.csv").read_text()
    out: dict[str, dict[str, float]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        out.setdefault(row["solver"], {})[row["instance"]] = float(row["distance"])
    return out


def load_published_gaps() -> dict[str, dict[str, float]]:
    text = (resources.files("twrouter") / "data" / "published_reference.csv").read_text()
    out: dict[str, dict[str, float]] = {}
    for row in csv.DictReader(io.StringIO(text)):
        out.setdefault(row["solver"], {})[row["instance"]] = float(row["gap_percent"])
    return out


@dataclass(frozen=True)
class SolverConfig:
    backend: str = "anneal"
    tabu: TabuParams = TabuParams()
    anneal_overrides: Mapping[str, float] = field(default_factory=dict)
    cache_key: str = "sorted"
    customers: int | None = None

    @property
    def tag(self) -> str:
        return f"hqts-{self.backend}"


def component_seeds(root: int) -> dict[str, int]:
    """Split one root seed into independent per-component seeds."""
    tabu, anneal, sample = np.random.SeedSequence(root).spawn(3)
    return {
        "tabu": int(tabu.generate_state(1)[0]),
        "anneal": int(anneal.generate_state(1)[0]),
        "sample": int(sample.generate_state(1)[0]),
    }


def solve_instance(instance: Instance, config: SolverConfig, seed: int, trace=None,
                   stats: SequenceStats | None = None) -> Solution:
    seeds = component_seeds(seed)
    backend = make_backend(config.backend, seed=seeds["anneal"], **dict(config.anneal_overrides))
    params = TabuParams(**{**config.tabu.__dict__, "seed": seeds["tabu"]})
    start = clarke_wright(instance)
    cache = RouteCache(config.cache_key)
    return tabu_search(start, instance, backend, params, cache=cache, trace=trace, stats=stats)


@dataclass(frozen=True)
class BenchRow:
    instance: str
    solver: str
    seed: int | str
    distance: float
    gap_percent: float | None
    runtime_seconds: float
    feasible: bool

    def csv_fields(self, timing: bool = True) -> list[str]:
        dist = "" if math.isnan(self.distance) else f"{self.distance:.4f}"
        runtime = f"{self.runtime_seconds:.3f}" if timing else ""
        return [self.instance, self.solver, str(self.seed), dist, format_gap(self.gap_percent),
                "true" if self.feasible else "false", runtime]


def _run_one(args) -> BenchRow:
    ref, config, seed, bks = args
    inst = ref if isinstance(ref, Instance) else load_instance(ref, config.customers)
    t0 = time.perf_counter()
    try:
        sol = solve_instance(inst, config, seed)
        ok = sol.feasible and not verify_solution(sol, inst)
        distance = sol.total_distance
    except Exception as exc:  # recorded, the run continues
        log.warning("%s seed %s failed: %s", inst.name, seed, exc)
        ok = False
        distance = math.nan
    runtime = time.perf_counter() - t0
    gap = optimality_gap(distance, bks) if bks and not math.isnan(distance) else None
    return BenchRow(inst.name, config.tag, seed, distance, gap, runtime, ok)


def run_benchmark(instances: Sequence[str | Instance], config: SolverConfig, seeds: Sequence[int],
                  bks: Mapping[str, float] | None = None, jobs: int = 1) -> list[BenchRow]:
    """One row per (instance, seed), each instance followed by its mean row (seed 'avg')."""
    bks = load_bks() if bks is None else {k.upper(): v for k, v in bks.items()}
    tasks = []
    for ref in instances:
        name = ref.name if isinstance(ref, Instance) else Path(str(ref)).stem
        for seed in seeds:
            tasks.append((ref, config, seed, bks.get(name.upper())))
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            detail = list(pool.map(_run_one, tasks))
    else:
        detail = [_run_one(t) for t in tasks]

    rows: list[BenchRow] = []
    for k in range(len(instances)):
        group = detail[k * len(seeds):(k + 1) * len(seeds)]
        if not group:
            continue
        rows += group
        dists = [r.distance for r in group]
        mean = math.nan if any(math.isnan(d) for d in dists) else sum(dists) / len(dists)
        ref_bks = bks.get(group[0].instance.upper())
        gap = optimality_gap(mean, ref_bks) if ref_bks and not math.isnan(mean) else None
        rows.append(BenchRow(group[0].instance, config.tag, "avg", mean, gap,
                             sum(r.runtime_seconds for r in group) / len(group),
                             all(r.feasible for r in group)))
    return rows


def write_csv(rows: Iterable[BenchRow], path: str | Path, timing: bool = True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow(row.csv_fields(timing))
    return path


def emit_report(rows: Sequence[BenchRow], path: str | Path, plot_dir: str | Path | None = None,
                timing: bool = True, with_published: bool = True) -> list[Path]:
    """CSV report plus, with ``plot_dir``, a gap chart next to it.

    The chart shows the mean-row gaps against the published reference
    series for the same instances.
    """
    out = [write_csv(rows, path, timing)]
    if plot_dir is not None:
        series: dict[str, dict[str, float]] = {}
        averaged = {r.instance: r.gap_percent for r in rows if r.seed == "avg" and r.gap_percent is not None}
        if with_published:
            for solver, gaps in load_published_gaps().items():
                series[f"published-{solver}"] = {k: v for k, v in gaps.items() if not averaged or k in averaged}
        if averaged:
            series[rows[0].solver] = averaged
        from .plotting import gap_chart

        out.append(gap_chart(series, Path(plot_dir) / f"{Path(path).stem}_gaps.svg"))
    return out


def comparison_rows(rows: Sequence[BenchRow], bks: Mapping[str, float] | None = None) -> list[dict[str, str]]:
    """Achieved best-of-seeds and mean gaps beside the published values."""
    bks = load_bks() if bks is None else bks
    published = load_published_gaps()
    out = []
    for name in dict.fromkeys(r.instance for r in rows):
        detail = [r for r in rows if r.instance == name and r.seed != "avg" and r.feasible]
        avg = next((r for r in rows if r.instance == name and r.seed == "avg"), None)
        best = min((r.distance for r in detail), default=math.nan)
        b = bks.get(name.upper())
        out.append({
            "instance": name,
            "bks": "" if b is None else f"{b:.1f}",
            "published_ortools_gap": format_gap(published.get("ortools", {}).get(name)),
            "published_hqts_gap": format_gap(published.get("hqts", {}).get(name)),
            "best_distance": "" if math.isnan(best) else f"{best:.4f}",
            "best_gap": format_gap(optimality_gap(best, b) if b and not math.isnan(best) else None),
            "mean_gap": format_gap(avg.gap_percent if avg else None),
        })
    return out


def write_comparison(rows: Sequence[BenchRow], path: str | Path) -> Path:
    table = comparison_rows(rows)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fields = ["instance", "bks", "published_ortools_gap", "published_hqts_gap", "best_distance", "best_gap", "mean_gap"]
        writer = csv.DictWriter(fh, fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(table)
    return path


# --------------------------------------------------------------------------
# scaling study


@dataclass(frozen=True)
class ScalingRun:
    stops: int
    seed: int
    repair: bool
    pre_cost: float
    cost: float
    violations: int
    outcome: str

    @property
    def violation_proportion(self) -> float:
        return self.violations / (self.stops + 1)


@dataclass(frozen=True)
class ScalingPoint:
    stops: int
    repair: bool
    runs: int
    violated_fraction: float
    mean_violation_proportion: float


def sample_route(instance: Instance, stops: int, seed: int, base: Solution | None = None) -> tuple[int, ...]:
    """Concatenate Clarke-Wright routes in a seeded order and keep the first ``stops`` customers."""
    if not 1 <= stops <= instance.size - 1:
        raise ValueError(f"stop count {stops} outside 1..{instance.size - 1}")
    base = clarke_wright(instance) if base is None else base
    rng = np.random.default_rng(np.random.SeedSequence([seed, stops]))
    order = rng.permutation(len(base.routes))
    flat = [v for k in order for v in base.routes[k]]
    return tuple(flat[:stops])


def scaling_study(instance: Instance, stop_counts: Sequence[int], seeds: Sequence[int],
                  backend: str = "anneal", **overrides) -> tuple[list[ScalingRun], list[ScalingPoint]]:
    """Raw backend output versus the same output after repair, per stop count.

    Both series come from one backend call per (stops, seed), so they are
    paired exactly.
    """
    base = clarke_wright(instance)
    runs: list[ScalingRun] = []
    for stops in stop_counts:
        for seed in seeds:
            start = sample_route(instance, stops, seed, base)
            pre = evaluate(start, instance)[1]
            solver = make_backend(backend, seed=component_seeds(seed)["anneal"] + stops, **overrides)
            raw = solver.solve(instance, start, start)
            viol, cost = evaluate(raw, instance)
            runs.append(ScalingRun(stops, seed, False, pre, cost, viol, "raw"))
            fixed, outcome = fix_route(raw, instance)
            fviol, fcost = evaluate(fixed, instance)
            runs.append(ScalingRun(stops, seed, True, pre, fcost, fviol, outcome.value))
    points = []
    for stops in stop_counts:
        for repair in (False, True):
            group = [r for r in runs if r.stops == stops and r.repair == repair]
            points.append(ScalingPoint(
                stops, repair, len(group),
                sum(r.violations > 0 for r in group) / len(group),
                sum(r.violation_proportion for r in group) / len(group),
            ))
    return runs, points


def write_scaling_csv(runs: Sequence[ScalingRun], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["stops", "seed", "repair", "pre_cost", "cost", "violations",
                         "violation_proportion", "time_violated", "outcome"])
        for r in runs:
            writer.writerow([r.stops, r.seed, "true" if r.repair else "false", f"{r.pre_cost:.1f}",
                             f"{r.cost:.1f}", r.violations, f"{r.violation_proportion:.4f}",
                             "yes" if r.violations else "no", r.outcome])
    return path
