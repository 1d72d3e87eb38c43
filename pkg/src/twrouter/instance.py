"""Solomon benchmark instances and the Euclidean cost matrix."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

DATA_ENV = "TWROUTER_DATA"


class InstanceError(ValueError):
    """Instance data violates a structural invariant."""


class ParseError(InstanceError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    demand: float
    ready_time: float
    due_time: float
    service_time: float

    def __post_init__(self):
        if self.ready_time > self.due_time:
            raise InstanceError(
                f"node {self.id}: ready_time {self.ready_time} > due_time {self.due_time}"
            )
        if self.demand < 0 or self.service_time < 0 or self.ready_time < 0:
            raise InstanceError(f"node {self.id}: negative demand, ready or service time")
        if self.id == 0 and (self.demand != 0 or self.service_time != 0):
            raise InstanceError("depot must have zero demand and zero service time")


def euclidean_cost(a: Node, b: Node) -> float:
    dx = a.x - b.x
    dy = a.y - b.y
    return math.sqrt(dx * dx + dy * dy)


def build_cost_matrix(nodes: Sequence[Node]) -> np.ndarray:
    if not nodes:
        raise InstanceError("cost matrix needs at least one node")
    xy = np.array([(n.x, n.y) for n in nodes], dtype=np.float64)
    dx = xy[:, 0, None] - xy[None, :, 0]
    dy = xy[:, 1, None] - xy[None, :, 1]
    return np.sqrt(dx * dx + dy * dy)


@dataclass(frozen=True, eq=False)
class Instance:
    """Immutable CVRPTW data: depot (node 0) plus customers.

    The numpy views (``cost_matrix``, ``ready``, ``due``, ``service``,
    ``demand``) are read-only so one instance can be shared between runs.
    """

    name: str
    vehicle_count: int
    capacity: float
    nodes: tuple[Node, ...]
    cost_matrix: np.ndarray = field(default=None, repr=False)
    ready: np.ndarray = field(init=False, repr=False)
    due: np.ndarray = field(init=False, repr=False)
    service: np.ndarray = field(init=False, repr=False)
    demand: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = tuple(self.nodes)
        object.__setattr__(self, "nodes", nodes)
        if not nodes or nodes[0].id != 0:
            raise InstanceError("missing depot (node 0)")
        for k, node in enumerate(nodes):
            if node.id != k:
                raise InstanceError(f"node ids must be contiguous from 0, found {node.id} at {k}")
        if self.vehicle_count <= 0 or self.capacity <= 0:
            raise InstanceError("vehicle_count and capacity must be positive")
        matrix = self.cost_matrix
        if matrix is None:
            matrix = build_cost_matrix(nodes)
        matrix = np.array(matrix, dtype=np.float64)
        if matrix.shape != (len(nodes), len(nodes)):
            raise InstanceError(f"cost matrix shape {matrix.shape} does not match {len(nodes)} nodes")
        for attr, values in (
            ("cost_matrix", matrix),
            ("ready", [n.ready_time for n in nodes]),
            ("due", [n.due_time for n in nodes]),
            ("service", [n.service_time for n in nodes]),
            ("demand", [n.demand for n in nodes]),
        ):
            arr = np.array(values, dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, attr, arr)

    @property
    def size(self) -> int:
        return len(self.nodes)

    @property
    def customers(self) -> range:
        return range(1, len(self.nodes))

    @property
    def depot(self) -> Node:
        return self.nodes[0]

    def cost(self, i: int, j: int) -> float:
        return float(self.cost_matrix[i, j])

    @cached_property
    def lists(self) -> tuple[list[list[float]], list[float], list[float], list[float], list[float]]:
        """(dist, ready, due, service, demand) as plain lists for scalar loops."""
        return (
            self.cost_matrix.tolist(),
            self.ready.tolist(),
            self.due.tolist(),
            self.service.tolist(),
            self.demand.tolist(),
        )

    def truncated(self, n_customers: int) -> Instance:
        """Depot plus the first ``n_customers`` customers."""
        if not 1 <= n_customers <= len(self.nodes) - 1:
            raise InstanceError(f"cannot truncate to {n_customers} customers")
        keep = n_customers + 1
        return Instance(
            name=self.name,
            vehicle_count=self.vehicle_count,
            capacity=self.capacity,
            nodes=self.nodes[:keep],
            cost_matrix=self.cost_matrix[:keep, :keep],
        )


def _numbers(tokens: list[str], lineno: int) -> list[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        bad = next(t for t in tokens if not _is_number(t))
        raise ParseError(f"non-numeric field {bad!r}", lineno) from None


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_solomon(text: str) -> Instance:
    """Parse the whitespace-separated Solomon layout.

    Blank lines are skipped anywhere; column alignment is ignored. Errors
    carry the 1-based line number of the offending row.
    """
    lines = [(k + 1, line.split()) for k, line in enumerate(text.splitlines())]
    lines = [(k, toks) for k, toks in lines if toks]
    it = iter(lines)

    def expect(keyword: str) -> tuple[int, list[str]]:
        try:
            lineno, toks = next(it)
        except StopIteration:
            raise ParseError(f"unexpected end of file, expected {keyword!r}") from None
        if toks[0].upper() != keyword:
            raise ParseError(f"malformed header: expected {keyword!r}, got {' '.join(toks)!r}", lineno)
        return lineno, toks

    try:
        _, name_toks = next(it)
    except StopIteration:
        raise ParseError("empty input") from None
    name = " ".join(name_toks)

    expect("VEHICLE")
    expect("NUMBER")
    try:
        lineno, toks = next(it)
    except StopIteration:
        raise ParseError("missing vehicle data row") from None
    if len(toks) != 2:
        raise ParseError(f"vehicle row needs 2 fields, got {len(toks)}", lineno)
    count, capacity = _numbers(toks, lineno)
    if count != int(count) or count <= 0 or capacity <= 0:
        raise ParseError("vehicle number and capacity must be positive", lineno)

    expect("CUSTOMER")
    expect("CUST")

    nodes: list[Node] = []
    seen: dict[int, int] = {}
    for lineno, toks in it:
        if len(toks) != 7:
            raise ParseError(f"customer row needs 7 fields, got {len(toks)}", lineno)
        vals = _numbers(toks, lineno)
        if vals[0] != int(vals[0]):
            raise ParseError(f"customer id {toks[0]!r} is not an integer", lineno)
        cid = int(vals[0])
        if cid in seen:
            raise ParseError(f"duplicate customer id {cid} (first on line {seen[cid]})", lineno)
        if not nodes and cid != 0:
            raise ParseError("missing depot row: first customer row must have id 0", lineno)
        if cid != len(nodes):
            raise ParseError(f"customer id {cid} out of sequence, expected {len(nodes)}", lineno)
        seen[cid] = lineno
        try:
            nodes.append(Node(cid, *vals[1:]))
        except InstanceError as exc:
            raise ParseError(str(exc), lineno) from None

    if not nodes:
        raise ParseError("missing depot row")
    if len(nodes) == 1:
        raise ParseError("no customers")
    return Instance(name=name, vehicle_count=int(count), capacity=capacity, nodes=tuple(nodes))


def bundled_instance_names() -> list[str]:
    root = resources.files("twrouter") / "data" / "solomon"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".txt"))


def resolve_instance_path(ref: str | os.PathLike) -> Path:
    """Map an instance reference to a file.

    Tries the literal path, then ``$TWROUTER_DATA``, then the bundled Solomon
    set; bare names like ``R101`` work in the last two.
    """
    path = Path(ref)
    if path.is_file():
        return path
    candidates = []
    env = os.environ.get(DATA_ENV)
    if env:
        candidates += [Path(env) / path.name, Path(env) / f"{path.name}.txt"]
    bundled = resources.files("twrouter") / "data" / "solomon"
    candidates += [Path(str(bundled / path.name)), Path(str(bundled / f"{path.name.upper()}.txt"))]
    for cand in candidates:
        if cand.is_file():
            return cand
    raise FileNotFoundError(f"instance file not found: {ref}")


def load_instance(ref: str | os.PathLike, customers: int | None = None) -> Instance:
    path = resolve_instance_path(ref)
    inst = parse_solomon(path.read_text())
    if customers is not None:
        inst = inst.truncated(customers)
    return inst
