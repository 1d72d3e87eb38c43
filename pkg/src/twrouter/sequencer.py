"""Per-route sequencing: backends, feasibility repair and the route cache."""

from __future__ import annotations

import enum
import logging
import threading
from dataclasses import dataclass, replace
from typing import Iterator, Protocol, Sequence

import numpy as np

from . import _kernels
from .instance import Instance
from .schedule import Route, check_route, evaluate, route_cost

log = logging.getLogger(__name__)

EXACT_LIMIT = 16


class SequencerError(ValueError):
    pass


# --------------------------------------------------------------------------
# exact oracle


def held_karp_tsptw(
    instance: Instance, customers: Sequence[int], time_windows: bool = True
) -> tuple[Route, float] | None:
    """Minimum-distance tour over ``customers``, or None when no order is on time.

    Label-correcting DP over (visited set, last node). Each state keeps the
    labels (cost, departure time) that no other label beats in both, since a
    cheaper and earlier partial tour extends at least as well. With
    ``time_windows=False`` this is plain Held-Karp on distance.
    """
    customers = list(check_route(customers, instance))
    m = len(customers)
    if m > EXACT_LIMIT:
        raise SequencerError(f"exact sequencing is limited to {EXACT_LIMIT} customers, got {m}")
    if m == 0:
        return (), 0.0
    dist, ready, due, service, _ = instance.lists
    inf = float("inf")

    # labels[mask][k] -> list of (cost, time, parent_label_ref)
    labels: dict[int, dict[int, list[tuple[float, float, tuple | None]]]] = {}
    for k, v in enumerate(customers):
        arr = dist[0][v]
        if time_windows and arr > due[v]:
            continue
        t = max(arr, ready[v]) + service[v]
        labels.setdefault(1 << k, {})[k] = [(arr, t if time_windows else 0.0, (k, None))]

    for size in range(1, m):
        for mask in [mk for mk in labels if bin(mk).count("1") == size]:
            for k, labs in labels[mask].items():
                u = customers[k]
                for nk in range(m):
                    bit = 1 << nk
                    if mask & bit:
                        continue
                    v = customers[nk]
                    bucket = labels.setdefault(mask | bit, {}).setdefault(nk, [])
                    for cost, t, trail in labs:
                        arr = t + dist[u][v]
                        if time_windows and arr > due[v]:
                            continue
                        nt = (max(arr, ready[v]) + service[v]) if time_windows else 0.0
                        _insert_label(bucket, cost + dist[u][v], nt, (nk, trail))
        for mask in [mk for mk in labels if bin(mk).count("1") == size]:
            del labels[mask]

    best_cost = inf
    best_trail = None
    for k, labs in labels.get((1 << m) - 1, {}).items():
        back = dist[customers[k]][0]
        for cost, t, trail in labs:
            if time_windows and t + back > due[0]:
                continue
            if cost + back < best_cost:
                best_cost = cost + back
                best_trail = trail
    if best_trail is None:
        return None
    order = []
    while best_trail is not None:
        k, best_trail = best_trail
        order.append(customers[k])
    route = tuple(reversed(order))
    return route, route_cost(route, instance)


def _insert_label(bucket: list, cost: float, t: float, trail) -> None:
    for c, tt, _ in bucket:
        if c <= cost and tt <= t:
            return
    bucket[:] = [lab for lab in bucket if not (cost <= lab[0] and t <= lab[1])]
    bucket.append((cost, t, trail))


# --------------------------------------------------------------------------
# annealing


@dataclass(frozen=True)
class AnnealParams:
    initial_temperature: float
    cooling_rate: float = 0.995
    sweeps: int = 2000
    moves_per_sweep: int = 1
    violation_penalty: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.cooling_rate < 1.0:
            raise ValueError("cooling_rate must lie in (0, 1)")
        if self.sweeps < 1 or self.moves_per_sweep < 1:
            raise ValueError("sweeps and moves_per_sweep must be positive")
        if self.violation_penalty < 0 or self.initial_temperature < 0:
            raise ValueError("temperature and violation penalty must be non-negative")

    @classmethod
    def defaults(cls, instance: Instance, customers: Sequence[int], seed: int = 0, **overrides) -> AnnealParams:
        """Scale-aware defaults: temperature and penalty both mean arc length times n."""
        n = len(customers)
        nodes = [0, *customers]
        sub = instance.cost_matrix[np.ix_(nodes, nodes)]
        k = len(nodes)
        mean = float(sub.sum() / (k * (k - 1))) if k > 1 else 0.0
        params = cls(
            initial_temperature=mean * n,
            cooling_rate=0.995,
            sweeps=2000,
            moves_per_sweep=max(1, n * n),
            violation_penalty=mean * n,
            seed=seed,
        )
        return replace(params, **{k: v for k, v in overrides.items() if v is not None})


def anneal_sequence(
    instance: Instance, customers: Sequence[int], initial: Sequence[int], params: AnnealParams
) -> Route:
    initial = check_route(initial, instance)
    if sorted(initial) != sorted(customers):
        raise SequencerError("initial route is not a permutation of the customers")
    best = _kernels.anneal(
        np.array(initial, dtype=np.int64),
        instance.cost_matrix,
        instance.ready,
        instance.due,
        instance.service,
        float(params.initial_temperature),
        float(params.cooling_rate),
        int(params.sweeps),
        int(params.moves_per_sweep),
        float(params.violation_penalty),
        int(params.seed) % (2**32),
    )
    return tuple(int(v) for v in best)


# --------------------------------------------------------------------------
# backends


class SequencerBackend(Protocol):
    def solve(
        self, instance: Instance, customers: Sequence[int], initial: Route, budget: int | None = None
    ) -> Route: ...


class ExactBackend:
    """Held-Karp oracle. Falls back to the distance-only optimum when no order is on time."""

    name = "exact"

    def __init__(self):
        self.calls = 0

    def solve(self, instance, customers, initial, budget=None):
        self.calls += 1
        if len(customers) > EXACT_LIMIT:
            raise SequencerError(
                f"exact backend rejects routes with more than {EXACT_LIMIT} customers ({len(customers)})"
            )
        found = held_karp_tsptw(instance, customers)
        if found is None:
            found = held_karp_tsptw(instance, customers, time_windows=False)
        return found[0]


class AnnealBackend:
    """Simulated annealing warm-started from the incoming route.

    ``seed`` is mixed with a per-call counter so repeated calls explore
    differently while a fresh backend with the same seed replays exactly.
    ``budget`` overrides the sweep count.
    """

    name = "anneal"

    def __init__(self, seed: int = 0, **overrides):
        self.seed = seed
        self.overrides = overrides
        self.calls = 0

    def solve(self, instance, customers, initial, budget=None):
        seq = np.random.SeedSequence([self.seed, self.calls])
        self.calls += 1
        call_seed = int(seq.generate_state(1)[0])
        overrides = dict(self.overrides)
        if budget is not None:
            overrides["sweeps"] = budget
        params = AnnealParams.defaults(instance, customers, seed=call_seed, **overrides)
        return anneal_sequence(instance, customers, initial, params)


def make_backend(kind: str, seed: int = 0, **overrides) -> SequencerBackend:
    if kind == "exact":
        return ExactBackend()
    if kind == "anneal":
        return AnnealBackend(seed=seed, **overrides)
    raise ValueError(f"unknown backend {kind!r}")


# --------------------------------------------------------------------------
# repair


class RepairOutcome(str, enum.Enum):
    ALREADY_FEASIBLE = "already_feasible"
    FIXED_BY_SIMPLE = "fixed_by_simple"
    FIXED_BY_2OPT = "fixed_by_2opt"
    FIXED_BY_3OPT = "fixed_by_3opt"
    UNFIXABLE = "unfixable"


def swap_moves(route: Route) -> Iterator[Route]:
    r = list(route)
    for i in range(len(r) - 1):
        for j in range(i + 1, len(r)):
            r[i], r[j] = r[j], r[i]
            yield tuple(r)
            r[i], r[j] = r[j], r[i]


def two_opt_moves(route: Route) -> Iterator[Route]:
    for i in range(len(route) - 1):
        for j in range(i + 1, len(route)):
            yield route[:i] + route[i:j + 1][::-1] + route[j + 1:]


def three_opt_moves(route: Route) -> Iterator[Route]:
    """All reconnections after cutting three edges of 0 -> route -> 0.

    Cutting edges i < j < k of the closed path splits the customers into
    A | B | C | D with B and C non-empty; every non-identity arrangement of
    B and C (order and orientation) is produced, in a fixed order.
    """
    m = len(route)
    for i in range(m + 1):
        for j in range(i + 1, m + 1):
            for k in range(j + 1, m + 1):
                a, b, c, d = route[:i], route[i:j], route[j:k], route[k:]
                rb, rc = b[::-1], c[::-1]
                for mid in (rb + c, b + rc, rb + rc, c + b, c + rb, rc + b, rc + rb):
                    if mid != b + c:
                        yield a + mid + d


def _descend(route: Route, instance: Instance, moves) -> tuple[Route, list[int]]:
    """Best-improvement on (violations, cost); a move must cut violations."""
    cur = route
    cur_key = evaluate(cur, instance)
    trace = [cur_key[0]]
    while cur_key[0] > 0:
        best = None
        best_key = None
        for cand in moves(cur):
            key = evaluate(cand, instance)
            if best_key is None or key < best_key:
                best, best_key = cand, key
        if best is None or best_key[0] >= cur_key[0]:
            break
        cur, cur_key = best, best_key
        trace.append(cur_key[0])
    return cur, trace


_STAGES = (
    (swap_moves, RepairOutcome.FIXED_BY_SIMPLE),
    (two_opt_moves, RepairOutcome.FIXED_BY_2OPT),
    (three_opt_moves, RepairOutcome.FIXED_BY_3OPT),
)


def fix_route(route: Sequence[int], instance: Instance) -> tuple[Route, RepairOutcome]:
    """Swap, then 2-opt, then 3-opt; first stage to reach zero violations wins.

    Every stage starts from the given route. If none succeeds the given route
    comes back unchanged.
    """
    route = check_route(route, instance)
    if evaluate(route, instance)[0] == 0:
        return route, RepairOutcome.ALREADY_FEASIBLE
    for moves, outcome in _STAGES:
        fixed, trace = _descend(route, instance, moves)
        if trace[-1] == 0:
            return fixed, outcome
    return route, RepairOutcome.UNFIXABLE


# --------------------------------------------------------------------------
# cache


@dataclass(frozen=True)
class CacheEntry:
    route: Route
    cost: float
    feasible: bool


class RouteCache:
    """Best known sequence per customer set.

    ``key_mode='sorted'`` ignores visiting order; ``'ordered'`` keys on the
    incoming sequence as given. Reads are lock-free dict lookups; offers
    take a lock and keep the (feasible, cheaper) entry.
    """

    def __init__(self, key_mode: str = "sorted"):
        if key_mode not in ("sorted", "ordered"):
            raise ValueError(f"unknown cache key mode {key_mode!r}")
        self.key_mode = key_mode
        self._entries: dict[tuple[int, ...], CacheEntry] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def key(self, route: Sequence[int]) -> tuple[int, ...]:
        return tuple(sorted(route)) if self.key_mode == "sorted" else tuple(route)

    def get(self, route: Sequence[int]) -> CacheEntry | None:
        return self._entries.get(self.key(route))

    def offer(self, key_route: Sequence[int], route: Route, instance: Instance) -> CacheEntry:
        if sorted(key_route) != sorted(route):
            raise SequencerError("cached route must be a permutation of its key")
        viol, cost = evaluate(route, instance)
        entry = CacheEntry(tuple(route), cost, viol == 0)
        k = self.key(key_route)
        with self._lock:
            old = self._entries.get(k)
            if old is None or (not entry.feasible, entry.cost) < (not old.feasible, old.cost):
                self._entries[k] = entry
            return self._entries[k]

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, route) -> bool:
        return self.key(route) in self._entries


@dataclass
class SequenceStats:
    outcomes: dict[str, int]

    @classmethod
    def empty(cls) -> SequenceStats:
        return cls({o.value: 0 for o in RepairOutcome})


def sequence_route(
    route: Sequence[int],
    instance: Instance,
    backend: SequencerBackend,
    cache: RouteCache,
    repair: bool = True,
    stats: SequenceStats | None = None,
) -> Route:
    """Sequence one route through the cache, backend and repair heuristic."""
    start = check_route(route, instance)
    hit = cache.get(start)
    if hit is not None:
        cache.hits += 1
        return hit.route
    cache.misses += 1
    candidate = backend.solve(instance, start, start)
    if sorted(candidate) != sorted(start):
        raise SequencerError("backend returned a route that is not a permutation of its input")
    if repair:
        fixed, outcome = fix_route(candidate, instance)
    else:
        fixed = candidate
        outcome = RepairOutcome.ALREADY_FEASIBLE if evaluate(candidate, instance)[0] == 0 else RepairOutcome.UNFIXABLE
    if stats is not None:
        stats.outcomes[outcome.value] += 1
    keep = start if outcome is RepairOutcome.UNFIXABLE else fixed
    log.debug(
        "sequenced %d stops: start %.1f -> %s %.1f",
        len(start), route_cost(start, instance), outcome.value, route_cost(keep, instance),
    )
    return cache.offer(start, keep, instance).route
