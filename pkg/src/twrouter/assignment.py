"""Assignment phase: Clarke-Wright start, tabu search over customer-to-route moves."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence, TextIO

import numpy as np

from . import _kernels
from .instance import Instance
from .schedule import Route, evaluate, route_cost, route_demand
from .sequencer import RouteCache, SequenceStats, SequencerBackend, sequence_route

log = logging.getLogger(__name__)


class InfeasibleInstanceError(ValueError):
    pass


@dataclass(frozen=True)
class Solution:
    routes: tuple[Route, ...]
    total_distance: float
    capacity_feasible: bool
    time_feasible: bool

    @property
    def feasible(self) -> bool:
        return self.capacity_feasible and self.time_feasible


def make_solution(routes: Sequence[Sequence[int]], instance: Instance) -> Solution:
    routes = tuple(tuple(r) for r in routes if len(r))
    total = 0.0
    cap_ok = True
    time_ok = True
    for r in routes:
        viol, cost = evaluate(r, instance)
        total += cost
        cap_ok &= route_demand(r, instance) <= instance.capacity
        time_ok &= viol == 0
    return Solution(routes, total, cap_ok, time_ok)


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


def verify_solution(solution: Solution, instance: Instance) -> list[Violation]:
    report = []
    seen: dict[int, int] = {}
    for k, r in enumerate(solution.routes):
        for v in r:
            if not 0 < v < instance.size:
                report.append(Violation("coverage", f"route {k} visits unknown node {v}"))
            elif v in seen:
                report.append(Violation("coverage", f"customer {v} in routes {seen[v]} and {k}"))
            else:
                seen[v] = k
    missing = sorted(set(instance.customers) - set(seen))
    if missing:
        report.append(Violation("coverage", f"customers never visited: {missing}"))
    total = 0.0
    for k, r in enumerate(solution.routes):
        r = [v for v in r if 0 < v < instance.size]
        load = route_demand(r, instance)
        if load > instance.capacity:
            report.append(Violation("capacity", f"route {k} carries {load:g} > {instance.capacity:g}"))
        viol, cost = evaluate(r, instance)
        if viol:
            report.append(Violation("time", f"route {k} misses {viol} time windows"))
        total += cost
    if abs(total - solution.total_distance) > 1e-6 * max(1.0, total):
        report.append(Violation("distance", f"stated {solution.total_distance} != recomputed {total}"))
    flags = make_solution(solution.routes, instance) if not missing else None
    if flags is not None and (
        flags.capacity_feasible != solution.capacity_feasible or flags.time_feasible != solution.time_feasible
    ):
        report.append(Violation("flags", "feasibility flags disagree with the routes"))
    return report


# --------------------------------------------------------------------------
# construction


def clarke_wright(instance: Instance) -> Solution:
    """Parallel savings, merging only when capacity and time windows still hold.

    Savings are scanned once in descending order, ties by customer ids. Both
    endpoints must sit at route ends; a route may be reversed to make them
    adjacent, and the first orientation that stays on time is taken.
    """
    dist = instance.lists[0]
    demand = instance.lists[4]
    cap = instance.capacity
    routes: dict[int, list[int]] = {}
    route_of: dict[int, int] = {}
    loads: dict[int, float] = {}
    for v in instance.customers:
        if demand[v] > cap or evaluate((v,), instance)[0]:
            raise InfeasibleInstanceError(f"customer {v} cannot be served even on its own route")
        routes[v] = [v]
        route_of[v] = v
        loads[v] = demand[v]

    cust = list(instance.customers)
    savings = []
    for a, i in enumerate(cust):
        for j in cust[a + 1:]:
            savings.append((-(dist[0][i] + dist[0][j] - dist[i][j]), i, j))
    savings.sort()

    for s, i, j in savings:
        ri, rj = route_of[i], route_of[j]
        if ri == rj or loads[ri] + loads[rj] > cap:
            continue
        a, b = routes[ri], routes[rj]
        options = []
        if a[-1] == i and b[0] == j:
            options.append(a + b)
        if a[0] == i and b[-1] == j:
            options.append(b + a)
        if a[-1] == i and b[-1] == j:
            options += [a + b[::-1], b + a[::-1]]
        if a[0] == i and b[0] == j:
            options += [a[::-1] + b, b[::-1] + a]
        merged = next((r for r in options if not evaluate(r, instance)[0]), None)
        if merged is None:
            continue
        routes[ri] = merged
        loads[ri] += loads[rj]
        for v in b:
            route_of[v] = ri
        del routes[rj], loads[rj]

    ordered = sorted(routes.values(), key=lambda r: min(r))
    return make_solution(ordered, instance)


# --------------------------------------------------------------------------
# moves


@dataclass(frozen=True)
class Move:
    """A relocate or exchange on route slots, reversible bit for bit.

    relocate: ``u`` leaves slot ``a`` at index ``pa`` and enters slot ``b``
    at index ``qb``. exchange: ``u`` (slot a, index pa) and ``v`` (slot b,
    index pb) swap routes; ``v`` lands at ``qa`` in a, ``u`` at ``qb`` in b.
    """

    kind: str
    u: int
    a: int
    pa: int
    b: int
    qb: int
    v: int = -1
    pb: int = -1
    qa: int = -1

    def apply(self, routes: list[list[int]]) -> None:
        A, B = routes[self.a], routes[self.b]
        if self.kind == "relocate":
            assert A[self.pa] == self.u
            A.pop(self.pa)
            B.insert(self.qb, self.u)
        else:
            assert A[self.pa] == self.u and B[self.pb] == self.v
            A.pop(self.pa)
            B.pop(self.pb)
            A.insert(self.qa, self.v)
            B.insert(self.qb, self.u)

    def undo(self, routes: list[list[int]]) -> None:
        A, B = routes[self.a], routes[self.b]
        if self.kind == "relocate":
            B.pop(self.qb)
            A.insert(self.pa, self.u)
        else:
            A.pop(self.qa)
            B.pop(self.qb)
            A.insert(self.pa, self.u)
            B.insert(self.pb, self.v)


# --------------------------------------------------------------------------
# tabu search


@dataclass(frozen=True)
class TabuParams:
    tenure: int = 15
    max_iterations: int = 2000
    no_improve_limit: int = 400
    seed: int = 0
    sequence_period: int = 50

    def __post_init__(self):
        if self.tenure < 1 or self.no_improve_limit < 1 or self.sequence_period < 1:
            raise ValueError("tenure, no_improve_limit and sequence_period must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be non-negative")
        if self.max_iterations and self.tenure >= self.max_iterations:
            raise ValueError("tenure must be smaller than max_iterations")


@dataclass
class TraceRecord:
    iteration: int
    incumbent: float
    move: str
    adopted: bool

    def to_json(self) -> str:
        return json.dumps(
            {"iteration": self.iteration, "incumbent": self.incumbent, "move": self.move, "adopted": self.adopted}
        )


class _State:
    """Slot-indexed routes with the arrays the neighborhood kernel reads."""

    def __init__(self, routes: Sequence[Route], instance: Instance):
        self.inst = instance
        self.routes = [list(r) for r in routes]
        n = instance.size
        self.R = len(self.routes)
        self.width = n  # a route can hold every customer
        self.arr = np.zeros((self.R, self.width), np.int64)
        self.lens = np.zeros(self.R, np.int64)
        self.dep = np.zeros((self.R, self.width + 2))
        self.lat = np.zeros((self.R, self.width + 2))
        self.load = np.zeros(self.R)
        self.route_of = np.full(n, -1, np.int64)
        self.pos_of = np.full(n, -1, np.int64)
        for k in range(self.R):
            self.refresh(k)

    def refresh(self, k: int) -> None:
        r = self.routes[k]
        m = len(r)
        inst = self.inst
        self.arr[k, :m] = r
        self.lens[k] = m
        self.load[k] = sum(inst.lists[4][v] for v in r)
        ok = _kernels.profile(self.arr[k], m, inst.cost_matrix, inst.ready, inst.due, inst.service,
                              self.dep[k], self.lat[k])
        if not ok:
            raise AssertionError(f"route slot {k} became time-infeasible: {r}")
        for p, v in enumerate(r):
            self.route_of[v] = k
            self.pos_of[v] = p

    def total(self) -> float:
        return sum(route_cost(r, self.inst) for r in self.routes)

    def snapshot(self) -> list[list[int]]:
        return [list(r) for r in self.routes]


def tabu_search(
    initial: Solution,
    instance: Instance,
    backend: SequencerBackend | None,
    params: TabuParams = TabuParams(),
    cache: RouteCache | None = None,
    trace: TextIO | Callable[[TraceRecord], None] | None = None,
    stats: SequenceStats | None = None,
) -> Solution:
    """Best-admissible tabu search over relocate and exchange moves.

    Only moves that keep every touched route within capacity and on time are
    considered. Moving u out of route A forbids moving it back into A for
    ``tenure`` iterations; exchanging u and v forbids that pair, and an
    exchange that sends either customer back into a route it recently left
    counts as tabu too. A tabu move is allowed when it produces a new best
    distance. Every ``sequence_period`` iterations the best solution's routes
    go through :func:`sequence_route`, and so do the current routes;
    cheaper sequences replace the originals. The seed only drives the tabu
    tenure, which is drawn per move around ``tenure``.
    """
    if not initial.feasible:
        raise ValueError("tabu search needs a capacity- and time-feasible start")
    if params.max_iterations == 0:
        return initial
    cache = cache if cache is not None else RouteCache()
    emit = _trace_sink(trace)

    state = _State(initial.routes, instance)
    n = instance.size
    tabu_reloc = np.zeros((n, state.R), np.int64)
    tabu_pair = np.zeros((n, n), np.int64)
    cur_total = state.total()
    best_routes = state.snapshot()
    best_total = cur_total
    since_best = 0
    inst = instance
    # tenure is drawn per move from [tenure/2, 3*tenure/2] so seeds explore differently
    rng = np.random.default_rng(params.seed)
    lo, hi = max(1, params.tenure // 2), params.tenure + params.tenure // 2

    for it in range(1, params.max_iterations + 1):
        kind, u, b, qa, v, qb, delta = _kernels.neighborhood(
            state.arr, state.lens, state.dep, state.lat, state.load,
            inst.cost_matrix, inst.ready, inst.due, inst.service, inst.demand,
            float(inst.capacity), state.route_of, state.pos_of,
            tabu_reloc, tabu_pair, it, cur_total, best_total,
        )
        if kind == 0:
            log.debug("iteration %d: no admissible move", it)
            break
        a = int(state.route_of[u])
        pa = int(state.pos_of[u])
        if kind == 1:
            move = Move("relocate", int(u), a, pa, int(b), int(qa))
            tabu_reloc[u, a] = it + rng.integers(lo, hi + 1)
        else:
            b = int(state.route_of[v])
            move = Move("exchange", int(u), a, pa, b, int(qb), int(v), int(state.pos_of[v]), int(qa))
            tenure = it + rng.integers(lo, hi + 1)
            tabu_pair[u, v] = tabu_pair[v, u] = tenure
            tabu_reloc[u, a] = tenure
            tabu_reloc[v, b] = tenure
        move.apply(state.routes)
        state.refresh(move.a)
        state.refresh(move.b)
        cur_total = state.total()

        adopted = False
        if cur_total < best_total - 1e-9:
            best_total = cur_total
            best_routes = state.snapshot()
            since_best = 0
        else:
            since_best += 1

        if backend is not None and it % params.sequence_period == 0:
            current = _sequence_pass(state.routes, instance, backend, cache, stats)
            if current is not None:
                for k, r in enumerate(current):
                    if r != state.routes[k]:
                        state.routes[k] = r
                        state.refresh(k)
                cur_total = state.total()
                if cur_total < best_total - 1e-9:
                    best_total = cur_total
                    best_routes = state.snapshot()
                    since_best = 0
                    adopted = True
            improved = _sequence_pass(best_routes, instance, backend, cache, stats)
            if improved is not None:
                _carry_over(state, best_routes, improved)
                cur_total = state.total()
                best_routes = improved
                best_total = sum(route_cost(r, instance) for r in best_routes)
                since_best = 0
                adopted = True

        emit(TraceRecord(it, best_total, move.kind, adopted))
        if since_best >= params.no_improve_limit:
            break

    if backend is not None:
        improved = _sequence_pass(best_routes, instance, backend, cache, stats)
        if improved is not None:
            best_routes = improved
    result = make_solution(best_routes, instance)
    if not result.feasible or result.total_distance > initial.total_distance + 1e-9:
        return initial
    return result


def _sequence_pass(routes, instance, backend, cache, stats) -> list[list[int]] | None:
    out = [list(r) for r in routes]
    changed = False
    for k, r in enumerate(routes):
        if not r:
            continue
        seq = sequence_route(r, instance, backend, cache, stats=stats)
        viol, cost = evaluate(seq, instance)
        if viol == 0 and cost < route_cost(r, instance) - 1e-9:
            out[k] = list(seq)
            changed = True
    return out if changed else None


def _carry_over(state: _State, old: list[list[int]], new: list[list[int]]) -> None:
    """Resequence current routes that hold exactly a customer set the best solution just improved."""
    better = {frozenset(o): n for o, n in zip(old, new) if o != n}
    for k, r in enumerate(state.routes):
        seq = better.get(frozenset(r))
        if seq is not None and route_cost(seq, state.inst) < route_cost(r, state.inst):
            state.routes[k] = list(seq)
            state.refresh(k)


def _trace_sink(trace) -> Callable[[TraceRecord], None]:
    if trace is None:
        return lambda rec: None
    if callable(trace):
        return trace
    return lambda rec: trace.write(rec.to_json() + "\n")


def solve(
    instance: Instance,
    backend: SequencerBackend | None,
    params: TabuParams = TabuParams(),
    cache: RouteCache | None = None,
    trace=None,
    stats: SequenceStats | None = None,
) -> Solution:
    start = clarke_wright(instance)
    return tabu_search(start, instance, backend, params, cache=cache, trace=trace, stats=stats)
