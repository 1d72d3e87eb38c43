"""Phased CVRPTW solver: tabu-search assignment, per-route sequencing with repair."""

from .assignment import Solution, TabuParams, clarke_wright, tabu_search, verify_solution
from .cqm_model import build_tsptw_model, check_assignment, decode_route, export_lp
from .instance import Instance, Node, build_cost_matrix, euclidean_cost, load_instance, parse_solomon
from .schedule import Schedule, route_cost, route_demand, simulate_route
from .sequencer import (
    AnnealBackend,
    AnnealParams,
    ExactBackend,
    RepairOutcome,
    RouteCache,
    anneal_sequence,
    fix_route,
    held_karp_tsptw,
    sequence_route,
)

__version__ = "0.1.0"
