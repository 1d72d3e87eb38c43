"""Forward simulation of a single route under Solomon time-window semantics.

A route is a sequence of customer ids; the depot is implicit at both ends.
The vehicle leaves the depot at time 0, waits for free when it arrives
before a ready time, and a stop counts as violated when the vehicle arrives
after its due time. The depot return is checked against the depot due time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .instance import Instance

Route = tuple[int, ...]


class RouteError(ValueError):
    pass


@dataclass(frozen=True)
class Stop:
    node: int
    arrival: float
    wait: float
    departure: float


@dataclass(frozen=True)
class Schedule:
    stops: tuple[Stop, ...]
    total_distance: float
    time_feasible: bool
    violations: int
    return_arrival: float

    @property
    def stop_count(self) -> int:
        """Customers plus the depot return, the denominator of violation proportions."""
        return len(self.stops) + 1


def check_route(route: Sequence[int], instance: Instance) -> Route:
    route = tuple(int(v) for v in route)
    n = instance.size
    for v in route:
        if v == 0:
            raise RouteError("route must not contain the depot")
        if not 0 < v < n:
            raise RouteError(f"unknown node id {v}")
    if len(set(route)) != len(route):
        raise RouteError(f"duplicate customer in route {route}")
    return route


def simulate_route(route: Sequence[int], instance: Instance) -> Schedule:
    route = check_route(route, instance)
    dist, ready, due, service, _ = instance.lists
    stops = []
    t = 0.0
    prev = 0
    total = 0.0
    violations = 0
    for v in route:
        leg = dist[prev][v]
        total += leg
        arrival = t + leg
        start = arrival if arrival > ready[v] else ready[v]
        if arrival > due[v]:
            violations += 1
        t = start + service[v]
        stops.append(Stop(v, arrival, start - arrival, t))
        prev = v
    leg = dist[prev][0]
    total += leg
    back = t + leg
    if back > due[0]:
        violations += 1
    return Schedule(tuple(stops), total, violations == 0, violations, back)


def route_cost(route: Sequence[int], instance: Instance) -> float:
    dist = instance.lists[0]
    total = 0.0
    prev = 0
    for v in route:
        total += dist[prev][v]
        prev = v
    if prev == 0:
        return 0.0
    return total + dist[prev][0]


def route_demand(route: Sequence[int], instance: Instance) -> float:
    demand = instance.lists[4]
    return sum(demand[v] for v in route)


def evaluate(route: Sequence[int], instance: Instance) -> tuple[int, float]:
    """(violations, cost) without building stop records."""
    dist, ready, due, service, _ = instance.lists
    t = 0.0
    prev = 0
    total = 0.0
    violations = 0
    for v in route:
        leg = dist[prev][v]
        total += leg
        t += leg
        if t > due[v]:
            violations += 1
        if t < ready[v]:
            t = ready[v]
        t += service[v]
        prev = v
    leg = dist[prev][0]
    if t + leg > due[0]:
        violations += 1
    return violations, (total + leg if route else 0.0)


def is_time_feasible(route: Sequence[int], instance: Instance) -> bool:
    return evaluate(route, instance)[0] == 0
