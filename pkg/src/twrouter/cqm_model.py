"""Constrained model of one route's TSPTW subproblem.

Variables are ``x_i_j`` (binary arc use) and ``z_i_j`` (continuous flow that
orders the visits), one of each per ordered node pair. Constraint rows:

* ``eq2_j{j}``: every node has exactly one incoming arc
* ``eq3_i{i}``: every node has exactly one outgoing arc
* ``eq4_i{i}``: flow out of a customer minus flow in from other customers is 1
* ``eq5_i{i}_j{j}``: flow only on used arcs, ``z_i_j <= (n-1) x_i_j``
* ``eq6_i{i}_j{j}``: ``z_i_j - z_j_i >= 0`` for pairs where leaving i at its
  ready time still reaches j at or after j's due time

The precedence rows do not encode arrival times, so a model-feasible tour
can still miss a time window; ``sequencer.fix_route`` handles that case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .instance import Instance
from .schedule import Route

TOL = 1e-9


class ModelError(ValueError):
    pass


class DecodeError(ModelError):
    def __init__(self, message: str, stranded: frozenset[int] = frozenset()):
        self.stranded = stranded
        super().__init__(message)


@dataclass(frozen=True)
class Variable:
    name: str
    kind: str  # "binary" | "continuous"
    lower: float
    upper: float


@dataclass(frozen=True)
class LinearConstraint:
    label: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # "<=" | "=" | ">="
    rhs: float

    def activity(self, values: Mapping[str, float]) -> float:
        return sum(coef * values[name] for name, coef in self.terms)

    def violation(self, values: Mapping[str, float]) -> float:
        """Amount by which the row is violated; 0 when satisfied."""
        lhs = self.activity(values)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass(frozen=True)
class CqmModel:
    name: str
    node_ids: tuple[int, ...]
    variables: tuple[Variable, ...]
    objective: tuple[tuple[str, float], ...]
    constraints: tuple[LinearConstraint, ...]
    # Always empty here; kept so the model type matches what it claims to be.
    quadratic: tuple[tuple[str, str, float], ...] = ()
    _index: dict = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v.name: v for v in self.variables})

    def variable(self, name: str) -> Variable:
        return self._index[name]

    def rows(self, prefix: str) -> list[LinearConstraint]:
        return [c for c in self.constraints if c.label.startswith(prefix + "_")]


@dataclass(frozen=True)
class Violation:
    label: str
    amount: float


def xname(i: int, j: int) -> str:
    return f"x_{i}_{j}"


def zname(i: int, j: int) -> str:
    return f"z_{i}_{j}"


def precedence_triggered(instance: Instance, i: int, j: int) -> bool:
    return instance.ready[i] + instance.service[i] + instance.cost_matrix[i, j] >= instance.due[j]


def build_tsptw_model(instance: Instance, customers: Sequence[int]) -> CqmModel:
    customers = [int(c) for c in customers]
    if not customers:
        raise ModelError("model needs at least one customer")
    if len(set(customers)) != len(customers):
        raise ModelError(f"duplicate customer ids in {customers}")
    if any(c == 0 for c in customers):
        raise ModelError("customer list must not contain the depot")
    if any(not 0 < c < instance.size for c in customers):
        raise ModelError(f"unknown customer id in {customers}")

    nodes = (0, *customers)
    n = len(nodes)
    pairs = [(i, j) for i in nodes for j in nodes if i != j]

    variables = [Variable(xname(i, j), "binary", 0.0, 1.0) for i, j in pairs]
    variables += [Variable(zname(i, j), "continuous", 0.0, float(n - 1)) for i, j in pairs]
    objective = tuple((xname(i, j), float(instance.cost_matrix[i, j])) for i, j in pairs)

    rows = []
    for j in nodes:
        rows.append(LinearConstraint(
            f"eq2_j{j}", tuple((xname(i, j), 1.0) for i in nodes if i != j), "=", 1.0))
    for i in nodes:
        rows.append(LinearConstraint(
            f"eq3_i{i}", tuple((xname(i, j), 1.0) for j in nodes if j != i), "=", 1.0))
    for i in nodes[1:]:
        terms = [(zname(i, j), 1.0) for j in nodes if j != i]
        terms += [(zname(j, i), -1.0) for j in nodes[1:] if j != i]
        rows.append(LinearConstraint(f"eq4_i{i}", tuple(terms), "=", 1.0))
    for i in nodes[1:]:
        for j in nodes:
            if j != i:
                rows.append(LinearConstraint(
                    f"eq5_i{i}_j{j}",
                    ((zname(i, j), 1.0), (xname(i, j), -float(n - 1))), "<=", 0.0))
    for i, j in pairs:
        if precedence_triggered(instance, i, j):
            rows.append(LinearConstraint(
                f"eq6_i{i}_j{j}", ((zname(i, j), 1.0), (zname(j, i), -1.0)), ">=", 0.0))

    return CqmModel(
        name=f"{instance.name} tsptw {','.join(map(str, customers))}",
        node_ids=nodes,
        variables=tuple(variables),
        objective=objective,
        constraints=tuple(rows),
    )


def expected_row_counts(n: int) -> dict[str, int]:
    """Closed-form row counts for a model over ``n`` nodes (eq6 is data dependent)."""
    return {"eq2": n, "eq3": n, "eq4": n - 1, "eq5": (n - 1) ** 2}


def check_assignment(model: CqmModel, values: Mapping[str, float]) -> list[Violation]:
    missing = [v.name for v in model.variables if v.name not in values]
    if missing:
        raise ModelError(f"assignment missing {len(missing)} variables, e.g. {missing[0]}")
    report = []
    for var in model.variables:
        val = values[var.name]
        if val < var.lower - TOL or val > var.upper + TOL:
            report.append(Violation(f"bound_{var.name}", max(var.lower - val, val - var.upper)))
        elif var.kind == "binary" and min(abs(val), abs(val - 1.0)) > TOL:
            report.append(Violation(f"integrality_{var.name}", min(abs(val), abs(val - 1.0))))
    for row in model.constraints:
        amount = row.violation(values)
        if amount > TOL:
            report.append(Violation(row.label, amount))
    return report


def encode_route(model: CqmModel, route: Sequence[int]) -> dict[str, float]:
    """Canonical assignment of a tour: x on its arcs, z_i_j = position of i.

    Positions count customers visited up to and including i (the depot is
    position 0), which is the unique flow satisfying the eq4 rows.
    """
    route = tuple(route)
    if sorted(route) != sorted(model.node_ids[1:]):
        raise ModelError("route does not cover the model's customers")
    values = {v.name: 0.0 for v in model.variables}
    tour = (0, *route, 0)
    for pos, (i, j) in enumerate(zip(tour, tour[1:])):
        values[xname(i, j)] = 1.0
        values[zname(i, j)] = float(pos)
    return values


def decode_route(model: CqmModel, values: Mapping[str, float]) -> Route:
    nodes = model.node_ids
    succ: dict[int, int] = {}
    for i in nodes:
        outs = [j for j in nodes if j != i and values[xname(i, j)] > 0.5]
        if len(outs) != 1:
            raise DecodeError(f"node {i} has {len(outs)} outgoing arcs", frozenset([i]))
        succ[i] = outs[0]
    order = []
    cur = succ[0]
    seen = {0}
    while cur != 0:
        if cur in seen:
            break
        seen.add(cur)
        order.append(cur)
        cur = succ[cur]
    stranded = frozenset(nodes) - seen
    if cur != 0 or stranded:
        raise DecodeError(f"subtour: nodes {sorted(stranded)} not reachable from the depot", stranded)
    return tuple(order)


def _fmt(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _linear(terms, first_sign: bool = False) -> list[str]:
    out = []
    for k, (name, coef) in enumerate(terms):
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = name if mag == 1.0 else f"{_fmt(mag)} {name}"
        if k == 0 and sign == "+" and not first_sign:
            out.append(body)
        else:
            out.append(f"{sign} {body}")
    return out


def _wrap(head: str, tokens: list[str], width: int = 200) -> list[str]:
    lines = []
    cur = head
    for tok in tokens:
        if len(cur) + 1 + len(tok) > width:
            lines.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}"
    lines.append(cur)
    return lines


def export_lp(model: CqmModel) -> str:
    """Render the model in CPLEX LP format. Same model, same bytes."""
    out = [f"\\ {model.name}", "Minimize"]
    out += _wrap(" obj:", _linear(model.objective))
    out.append("Subject To")
    senses = {"<=": "<=", ">=": ">=", "=": "="}
    for row in model.constraints:
        toks = _linear(row.terms) + [senses[row.sense], _fmt(row.rhs)]
        out += _wrap(f" {row.label}:", toks)
    out.append("Bounds")
    for var in model.variables:
        if var.kind == "continuous":
            out.append(f" {_fmt(var.lower)} <= {var.name} <= {_fmt(var.upper)}")
    out.append("Binary")
    binaries = [v.name for v in model.variables if v.kind == "binary"]
    out += _wrap("", binaries)
    out.append("End")
    return "\n".join(line.rstrip() for line in out) + "\n"


def objective_value(model: CqmModel, values: Mapping[str, float]) -> float:
    return math.fsum(coef * values[name] for name, coef in model.objective)
