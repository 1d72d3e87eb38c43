"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's own simulation code: the
brute-force enumerator is vectorised numpy over all permutations, and the
reference simulator is a straight transcription of the time-window rules.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
import pytest

from twrouter.instance import Instance, Node, load_instance


@lru_cache(maxsize=None)
def solomon(name: str) -> Instance:
    return load_instance(name)


@pytest.fixture(scope="session")
def c101() -> Instance:
    return solomon("C101")


@pytest.fixture(scope="session")
def r101() -> Instance:
    return solomon("R101")


def make_instance(rows, capacity=100.0, name="tiny") -> Instance:
    """Rows of (x, y, demand, ready, due, service); row 0 is the depot."""
    nodes = tuple(Node(k, *map(float, row)) for k, row in enumerate(rows))
    return Instance(name=name, vehicle_count=len(rows), capacity=float(capacity), nodes=nodes)


def reference_simulate(route, inst: Instance):
    """(violations, distance, arrivals) following the rules literally."""
    xy = [(n.x, n.y) for n in inst.nodes]
    t = 0.0
    dist = 0.0
    viol = 0
    arrivals = []
    prev = 0
    for v in list(route) + [0]:
        leg = math.hypot(xy[prev][0] - xy[v][0], xy[prev][1] - xy[v][1])
        dist += leg
        t += leg
        arrivals.append(t)
        node = inst.nodes[v]
        if t > node.due_time:
            viol += 1
        t = max(t, node.ready_time) + node.service_time
        prev = v
    return viol, (dist if route else 0.0), arrivals


def _perm_array(m: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m))), dtype=np.int64)


_PERMS: dict[int, np.ndarray] = {}


def all_orders(customers) -> np.ndarray:
    m = len(customers)
    if m not in _PERMS:
        _PERMS[m] = _perm_array(m)
    return np.asarray(customers, dtype=np.int64)[_PERMS[m]]


def brute_force_orders(inst: Instance, customers):
    """Cost and violation count of every visiting order, vectorised.

    Returns (orders, costs, violations) with one row per permutation.
    """
    orders = all_orders(customers)
    d = inst.cost_matrix
    rows = orders.shape[0]
    t = np.zeros(rows)
    cost = np.zeros(rows)
    viol = np.zeros(rows, dtype=np.int64)
    prev = np.zeros(rows, dtype=np.int64)
    for k in range(orders.shape[1]):
        v = orders[:, k]
        leg = d[prev, v]
        cost += leg
        t += leg
        viol += t > inst.due[v]
        t = np.maximum(t, inst.ready[v]) + inst.service[v]
        prev = v
    leg = d[prev, 0]
    cost += leg
    viol += (t + leg) > inst.due[0]
    return orders, cost, viol


def brute_force_tsptw(inst: Instance, customers):
    """(best cost, any feasible order exists) by full enumeration."""
    _, cost, viol = brute_force_orders(inst, customers)
    ok = viol == 0
    if not ok.any():
        return math.inf, False
    return float(cost[ok].min()), True


def set_partitions(items):
    if not items:
        yield []
        return
    head, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for k in range(len(part)):
            yield part[:k] + [[head] + part[k]] + part[k + 1:]
        yield [[head]] + part


def partition_optimum(inst: Instance) -> float:
    """Cheapest capacity- and time-feasible routing, over every partition of the customers."""
    best = math.inf
    for part in set_partitions(list(inst.customers)):
        if any(sum(inst.demand[v] for v in g) > inst.capacity for g in part):
            continue
        total = 0.0
        for g in part:
            cost, ok = brute_force_tsptw(inst, g)
            if not ok:
                break
            total += cost
        else:
            best = min(best, total)
    return best


def pytest_terminal_summary(terminalreporter):
    """Print one verdict line per acceptance criterion."""
    lines = {}
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if rep.when != "call":
                continue
            for name, value in rep.user_properties:
                if name == "acceptance":
                    number, detail = value.split("|", 1)
                    lines[int(number)] = f"criterion {number}: {'PASS' if rep.passed else 'FAIL'}  {detail}"
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])
