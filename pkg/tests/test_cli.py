import json
import subprocess
import sys
from pathlib import Path

import pytest

from twrouter.assignment import verify_solution
from twrouter.cli import main, solution_from_dict
from twrouter.instance import load_instance

from conftest import partition_optimum

GOLDEN = Path(__file__).parent / "golden"
FAST = ["--max-iterations", "60", "--no-improve-limit", "30", "--sequence-period", "20", "--sweeps", "100"]


def test_solve_writes_valid_json(tmp_path, capsys):
    out = tmp_path / "sol.json"
    code = main(["solve", "R101", "--seed", "1", "--customers", "25", "--out", str(out), *FAST])
    assert code == 0
    data = json.loads(out.read_text())
    assert list(data) == ["instance", "seed", "total_distance", "routes", "feasible"]
    assert list(data["routes"][0]) == ["customers", "distance", "demand", "schedule"]
    assert list(data["routes"][0]["schedule"][0]) == ["node", "arrival", "wait", "departure"]
    inst = load_instance("R101", 25)
    assert verify_solution(solution_from_dict(data), inst) == []
    assert "distance" in capsys.readouterr().out
    assert main(["validate", str(tmp_path / "x.txt"), str(out)]) == 2
    # the full R101 has more customers than the truncated solution covers
    assert main(["validate", "R101", str(out)]) == 1


def test_solve_full_instance_then_validate(tmp_path, capsys):
    out = tmp_path / "r101.json"
    assert main(["solve", "R101", "--seed", "2", "--out", str(out), "--trace", str(tmp_path / "t.jsonl"),
                 "--plot", str(tmp_path / "map.svg"), *FAST]) == 0
    assert "gap" in capsys.readouterr().out
    assert main(["validate", "R101", str(out)]) == 0
    lines = (tmp_path / "t.jsonl").read_text().splitlines()
    assert lines and json.loads(lines[0])["iteration"] == 1
    assert (tmp_path / "map.svg").read_text().startswith("<?xml")


@pytest.mark.parametrize("name", ["C101", "R101", "RC101"])
def test_exact_tiny_solve_is_optimal(tmp_path, name):
    out = tmp_path / "c.json"
    assert main(["solve", name, "--customers", "5", "--backend", "exact", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["feasible"] is True
    assert data["total_distance"] == pytest.approx(partition_optimum(load_instance(name, 5)), abs=1e-9)


def test_missing_instance_exits_2(capsys):
    assert main(["solve", "does/not/exist.txt"]) == 2
    assert "not found" in capsys.readouterr().err


def test_unparsable_instance_exits_2(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("BAD\nVEHICLE\nNUMBER CAPACITY\n2 x\n")
    assert main(["solve", str(bad)]) == 2


def test_infeasible_instance_exits_3(tmp_path):
    text = ("T\n\nVEHICLE\nNUMBER CAPACITY\n 2 50\n\nCUSTOMER\nCUST NO. X Y D R DUE S\n"
            "0 0 0 0 0 100 0\n1 90 0 1 0 10 0\n")
    path = tmp_path / "t.txt"
    path.write_text(text)
    assert main(["solve", str(path), "--out", str(tmp_path / "o.json")]) == 3


def test_validate_flags_violations(tmp_path, capsys):
    data = {"instance": "C101", "seed": 0, "total_distance": 10.0,
            "routes": [{"customers": [1, 2]}], "feasible": True}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    assert main(["validate", "C101", str(path)]) == 1
    assert "coverage" in capsys.readouterr().out
    path.write_text("{not json")
    assert main(["validate", "C101", str(path)]) == 2


def test_sequence_columns(capsys):
    assert main(["sequence", "R101", "2,21,73,41", "--backend", "exact"]) == 0
    header, values, route = capsys.readouterr().out.splitlines()
    cols = dict(zip(header.split("\t"), values.split("\t")))
    assert set(cols) == {"pre_cost", "optimized_cost", "time_violated", "improved_cost",
                         "repair", "final_cost", "final_violated"}
    # the input route is on time, so the exact optimum cannot cost more
    assert float(cols["final_cost"]) <= float(cols["pre_cost"])
    assert cols["final_violated"] == "no" and cols["time_violated"] == "no"
    assert route.startswith("route: ")


def test_sequence_single_customer_unchanged(capsys):
    assert main(["sequence", "C101", "7"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[-1] == "route: 7"


def test_sequence_raw_long_route_may_violate(capsys):
    ids = ",".join(str(v) for v in range(1, 14))
    assert main(["sequence", "C102", ids, "--no-repair", "--sweeps", "50"]) == 0
    cols = capsys.readouterr().out.splitlines()[0].split("\t")
    assert "time_violated" in cols


@pytest.mark.parametrize("route", ["1,1,2", "0,3", "1,x", "999"])
def test_sequence_bad_ids_exit_2(route):
    assert main(["sequence", "C101", route]) == 2


def test_sequence_exact_rejects_long_routes():
    ids = ",".join(str(v) for v in range(1, 18))
    assert main(["sequence", "C101", ids, "--backend", "exact"]) == 2


def test_model_matches_golden(tmp_path, capsys):
    out = tmp_path / "m.lp"
    assert main(["model", "C101", "--customers", "1,2,3", "--out", str(out)]) == 0
    assert out.read_text() == (GOLDEN / "C101_1_2_3.lp").read_text()
    assert main(["model", "C101", "--customers", "1,2,3"]) == 0
    assert capsys.readouterr().out == out.read_text()
    assert main(["model", "C101", "--customers", "0,1"]) == 2


def test_bench_rows_and_outputs(tmp_path):
    out = tmp_path / "bench.csv"
    code = main(["bench", "R101", "RC101", "--customers", "20", "--seeds", "1", "2",
                 "--out", str(out), "--plot", str(tmp_path), "--no-timing", *FAST])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "instance,solver,seed,distance,gap_percent,feasible,runtime_s"
    assert len(lines) == 1 + 2 * 2 + 2
    assert (tmp_path / "bench_gaps.svg").exists()
    assert (tmp_path / "bench_comparison.csv").read_text().startswith("instance,bks,")


def test_scaling_command(tmp_path, capsys):
    code = main(["scaling", "C207", "--stops", "1,5", "--seeds", "0", "1", "--sweeps", "50",
                 "--out", str(tmp_path / "s.csv"), "--plot", str(tmp_path / "s.svg")])
    assert code == 0
    assert capsys.readouterr().out.startswith("stops\trepair")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 1 + 2 * 2 * 2
    assert main(["scaling", "C207", "--stops", "500"]) == 2


def test_console_entry_point_runs():
    res = subprocess.run([sys.executable, "-m", "twrouter.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("solve", "sequence", "model", "bench", "validate", "scaling"):
        assert cmd in res.stdout
