import math
import os

import numpy as np
import pytest

from twrouter.instance import (
    InstanceError,
    Node,
    ParseError,
    build_cost_matrix,
    bundled_instance_names,
    euclidean_cost,
    load_instance,
    parse_solomon,
)

from conftest import make_instance

HEADER = """TINY

VEHICLE
NUMBER     CAPACITY
  2         50

CUSTOMER
CUST NO.  XCOORD.   YCOORD.    DEMAND   READY TIME  DUE DATE   SERVICE   TIME

"""


def _text(*rows):
    return HEADER + "\n".join(" ".join(str(x) for x in r) for r in rows) + "\n"


GOOD = [(0, 0, 0, 0, 0, 100, 0), (1, 3, 4, 5, 0, 50, 2), (2, 6, 8, 5, 10, 60, 2)]


def test_bundled_set_is_complete():
    names = bundled_instance_names()
    assert len(names) == 56
    assert {"C101", "C208", "R112", "RC208"} <= set(names)


def test_c101_shape(c101):
    assert c101.size == 101
    assert c101.capacity == 200
    assert c101.vehicle_count == 25
    assert sum(n.demand for n in c101.nodes) == 1810
    assert c101.depot.due_time == 1236


def test_cost_matrix_is_unrounded_euclidean(c101):
    a, b = c101.nodes[0], c101.nodes[1]
    assert euclidean_cost(a, b) == math.sqrt(5**2 + 18**2)
    assert c101.cost_matrix[0, 1] == pytest.approx(math.sqrt(349), abs=1e-12)
    assert np.allclose(c101.cost_matrix, c101.cost_matrix.T)
    assert np.all(np.diag(c101.cost_matrix) == 0)


def test_three_four_five():
    m = build_cost_matrix([Node(0, 0, 0, 0, 0, 10, 0), Node(1, 3, 4, 1, 0, 10, 0)])
    assert m[0, 1] == 5.0


def test_arrays_are_read_only(c101):
    with pytest.raises(ValueError):
        c101.ready[0] = 5.0
    with pytest.raises(ValueError):
        c101.cost_matrix[0, 1] = 0.0


def test_parse_round_trip():
    inst = parse_solomon(_text(*GOOD))
    assert inst.name == "TINY"
    assert inst.size == 3
    assert inst.capacity == 50
    assert inst.nodes[2].ready_time == 10
    assert inst.cost(0, 1) == 5.0


def test_parse_tolerates_blank_lines_and_spacing():
    text = _text(*GOOD).replace("\n", "\n\n").replace(" ", "   ")
    assert parse_solomon(text).size == 3


@pytest.mark.parametrize(
    "rows, message",
    [
        ([(0, 0, 0, 0, 0, 100, 0), (1, 3, 4, "x", 0, 50, 2)], "non-numeric"),
        ([(1, 3, 4, 5, 0, 50, 2)], "missing depot"),
        ([(0, 0, 0, 0, 0, 100, 0), (1, 3, 4, 5, 0, 50, 2), (1, 3, 4, 5, 0, 50, 2)], "duplicate"),
        ([(0, 0, 0, 0, 0, 100, 0), (2, 3, 4, 5, 0, 50, 2)], "out of sequence"),
        ([(0, 0, 0, 0, 0, 100, 0), (1, 3, 4, 5, 60, 50, 2)], "ready_time"),
        ([(0, 0, 0, 0, 0, 100, 0), (1, 3, 4, 5, 0, 50)], "7 fields"),
        ([(0, 0, 0, 0, 0, 100, 0)], "no customers"),
    ],
)
def test_parse_errors_name_the_problem(rows, message):
    with pytest.raises(ParseError, match=message) as info:
        parse_solomon(_text(*rows))
    if message != "no customers":
        assert info.value.line is not None


def test_parse_error_line_number_points_at_row():
    rows = [(0, 0, 0, 0, 0, 100, 0), (1, 3, 4, 5, 0, 50, 2), (2, 3, 4, "bad", 0, 50, 2)]
    text = _text(*rows)
    with pytest.raises(ParseError) as info:
        parse_solomon(text)
    assert "bad" in text.splitlines()[info.value.line - 1]


def test_malformed_header():
    with pytest.raises(ParseError, match="malformed header"):
        parse_solomon("X\nVEHICLES\nNUMBER CAPACITY\n2 50\n")


def test_depot_invariants():
    with pytest.raises(InstanceError):
        Node(0, 0, 0, 5, 0, 10, 0)
    with pytest.raises(InstanceError):
        make_instance([(0, 0, 0, 0, 100, 0), (1, 1, 1, 0, 10, 0)], capacity=0)


def test_truncated_keeps_prefix(r101):
    small = r101.truncated(5)
    assert small.size == 6
    assert small.nodes == r101.nodes[:6]
    assert np.array_equal(small.cost_matrix, r101.cost_matrix[:6, :6])
    with pytest.raises(InstanceError):
        r101.truncated(0)


def test_load_by_name_path_and_env(tmp_path, monkeypatch):
    assert load_instance("r101").name == "R101"
    p = tmp_path / "mine.txt"
    p.write_text(_text(*GOOD))
    assert load_instance(str(p)).size == 3
    monkeypatch.setenv("TWROUTER_DATA", str(tmp_path))
    assert load_instance("mine").size == 3
    with pytest.raises(FileNotFoundError):
        load_instance(os.path.join(str(tmp_path), "nope.txt"))
