import csv
import math
import re

import pytest

from twrouter.assignment import TabuParams
from twrouter.bench import (
    CSV_HEADER,
    REFERENCE_INSTANCES,
    BenchRow,
    SolverConfig,
    comparison_rows,
    component_seeds,
    emit_report,
    format_gap,
    load_bks,
    load_published_gaps,
    load_published_reference,
    optimality_gap,
    run_benchmark,
    sample_route,
    scaling_study,
    write_csv,
    write_scaling_csv,
)
from twrouter.plotting import gap_chart, route_map, scaling_chart

from conftest import solomon

QUICK = SolverConfig(tabu=TabuParams(max_iterations=30, no_improve_limit=20, sequence_period=10),
                     anneal_overrides={"sweeps": 50}, customers=15)


def test_gap_examples():
    assert format_gap(optimality_gap(1675.9, 1637.7)) == "2.33"
    assert format_gap(optimality_gap(1247.6, 1208.7)) == "3.22"
    assert optimality_gap(1637.7, 1637.7) == 0.0
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            optimality_gap(100.0, bad)


def test_reference_tables_cover_the_six_instances():
    bks = load_bks()
    ref = load_published_reference()
    assert set(REFERENCE_INSTANCES) <= set(bks)
    assert set(ref) == {"ortools", "hqts"}
    assert all(set(REFERENCE_INSTANCES) == set(series) for series in ref.values())
    assert load_published_gaps()["hqts"]["RC103"] == 7.46


def test_component_seeds_are_stable_and_distinct():
    a = component_seeds(1)
    assert a == component_seeds(1)
    assert len(set(a.values())) == 3
    assert a != component_seeds(2)


def test_row_counts_and_average_row():
    rows = run_benchmark(["R101", "C101"], QUICK, [1, 2])
    assert len(rows) == 2 * 2 + 2
    assert [r.seed for r in rows] == [1, 2, "avg", 1, 2, "avg"]
    avg = rows[2]
    assert avg.distance == pytest.approx((rows[0].distance + rows[1].distance) / 2)
    # truncated instances keep their name, so the BKS gap is still attached
    assert avg.gap_percent == pytest.approx(optimality_gap(avg.distance, load_bks()["R101"]))
    assert rows[5].gap_percent is None  # no BKS for C101 in the shipped table


def test_empty_benchmark():
    assert run_benchmark([], QUICK, [1, 2, 3]) == []


def test_failures_become_infeasible_rows(monkeypatch):
    import twrouter.bench as bench

    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(bench, "solve_instance", boom)
    rows = run_benchmark(["R101"], QUICK, [1])
    assert [r.feasible for r in rows] == [False, False]
    assert math.isnan(rows[0].distance)
    assert rows[0].csv_fields()[3] == ""


def test_csv_header_only_and_seven_lines(tmp_path):
    path = write_csv([], tmp_path / "empty.csv")
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"
    rows = [BenchRow(n, "hqts-anneal", "avg", 1000.0 + k, 1.5, 2.0, True) for k, n in enumerate(REFERENCE_INSTANCES)]
    text = write_csv(rows, tmp_path / "six.csv").read_text()
    assert len(text.splitlines()) == 7
    assert text.splitlines()[1] == "R101,hqts-anneal,avg,1000.0000,1.50,true,2.000"


def test_csv_is_byte_deterministic_without_timing(tmp_path):
    rows = run_benchmark(["R101"], QUICK, [3])
    a = write_csv(rows, tmp_path / "a.csv", timing=False).read_bytes()
    b = write_csv(run_benchmark(["R101"], QUICK, [3]), tmp_path / "b.csv", timing=False).read_bytes()
    assert a == b
    assert a.decode().splitlines()[1].endswith(",")


def _bar_ids(svg_text):
    return re.findall(r'id="(bar-[^"]+)"', svg_text)


def test_gap_chart_has_six_paired_bars(tmp_path):
    path = gap_chart(load_published_gaps(), tmp_path / "gaps.svg")
    ids = _bar_ids(path.read_text())
    assert len(ids) == 12
    for name in REFERENCE_INSTANCES:
        assert f"bar-ortools-{name}" in ids and f"bar-hqts-{name}" in ids


def test_charts_are_byte_deterministic(tmp_path):
    a = gap_chart(load_published_gaps(), tmp_path / "a.svg").read_bytes()
    b = gap_chart(load_published_gaps(), tmp_path / "b.svg").read_bytes()
    assert a == b


def test_emit_report_writes_csv_and_chart(tmp_path):
    rows = [BenchRow(n, "hqts-anneal", "avg", 1.0, 10.0 + k, 0.0, True) for k, n in enumerate(REFERENCE_INSTANCES)]
    written = emit_report(rows, tmp_path / "out" / "bench.csv", plot_dir=tmp_path / "out", timing=False)
    assert [p.name for p in written] == ["bench.csv", "bench_gaps.svg"]
    ids = _bar_ids(written[1].read_text())
    assert len(ids) == 18  # two published series plus ours


def test_comparison_rows(tmp_path):
    rows = [BenchRow("R101", "hqts-anneal", s, d, optimality_gap(d, 1637.7), 0.0, True)
            for s, d in ((1, 1700.0), (2, 1650.0))]
    rows.append(BenchRow("R101", "hqts-anneal", "avg", 1675.0, optimality_gap(1675.0, 1637.7), 0.0, True))
    (row,) = comparison_rows(rows)
    assert row["best_distance"] == "1650.0000"
    assert row["published_hqts_gap"] == "2.33" and row["published_ortools_gap"] == "0.82"
    assert row["best_gap"] == format_gap(optimality_gap(1650.0, 1637.7))


def test_sample_route_is_seeded_prefix():
    inst = solomon("C207")
    a = sample_route(inst, 13, seed=4)
    assert a == sample_route(inst, 13, seed=4)
    assert len(a) == len(set(a)) == 13
    with pytest.raises(ValueError):
        sample_route(inst, 0, seed=1)


def test_scaling_study_pairs_and_single_stop(tmp_path):
    inst = solomon("C207")
    runs, points = scaling_study(inst, [1, 6], [0, 1], sweeps=100)
    assert len(runs) == 8 and len(points) == 4
    one = [p for p in points if p.stops == 1]
    assert all(p.mean_violation_proportion == 0 for p in one)
    raw = {(r.stops, r.seed): r for r in runs if not r.repair}
    for r in runs:
        if r.repair:
            assert r.violations <= raw[r.stops, r.seed].violations
    text = write_scaling_csv(runs, tmp_path / "s.csv").read_text()
    assert list(csv.reader(text.splitlines()))[0][0] == "stops"
    svg = scaling_chart(points, tmp_path / "s.svg", inst.name).read_text()
    assert 'id="line-raw"' in svg and 'id="line-repaired"' in svg


def test_route_map_renders(tmp_path):
    inst = solomon("C101").truncated(10)
    svg = route_map(inst, [(1, 2, 3), (4, 5)], tmp_path / "m.svg").read_text()
    assert 'id="route-0"' in svg and 'id="route-1"' in svg
