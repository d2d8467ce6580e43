from dataclasses import replace

import pytest

from railshare import engine
from railshare.config import parse_scenario
from railshare.engine import (
    CSV_SCHEMA,
    ValidationFailure,
    export_scenario_ilp,
    metrics_csv,
    read_metrics_csv,
    run_scenario,
    simulate_point,
    write_metrics,
)
from railshare.ilp import model_from_lp
from railshare.traffic import generate_arrivals
from railshare.validate import Violation

BASE = """
name: t
traffic: {{lambda_perf: {lp}, lambda_critical: {lc}, lambda_gsmr: 2, seed: 3}}
periods: {periods}
seeds: [3]
"""


def scenario(lp=50, lc=10, periods=5, **kw):
    sc = parse_scenario(BASE.format(lp=lp, lc=lc, periods=periods))
    return replace(sc, **kw) if kw else sc


def test_one_row_per_point_and_scheduler():
    rows = run_scenario(scenario(periods=3))
    assert len(rows) == 18
    assert [(r.colliding_prbs, r.scheduler) for r in rows[:2]] == [(2, "bcqi"), (2, "itsp")]
    assert sorted({r.colliding_prbs for r in rows}) == list(range(2, 11))
    for r in rows:
        assert r.perf_throughput_total >= 0 and r.critical_throughput_total >= 0
        assert 0 <= r.reuse_rate <= 1 and 0 <= r.critical_drop_rate <= 1
        assert r.periods == 3


def test_zero_traffic_gives_zero_rows():
    for r in run_scenario(scenario(lp=0, lc=0, periods=4)):
        assert r.perf_throughput_total == 0 and r.critical_throughput_total == 0
        assert r.reuse_rate == 0 and r.critical_packets == 0


def test_no_critical_traffic_means_no_reuse():
    rows = run_scenario(scenario(lc=0, periods=5))
    assert all(r.reuse_rate == 0 for r in rows)
    assert any(r.perf_throughput_total > 0 for r in rows)


def test_bcqi_never_reuses():
    assert all(r.reuse_rate == 0 for r in run_scenario(scenario(periods=5)) if r.scheduler == "bcqi")


def test_delivered_bits_never_exceed_arrivals():
    sc = scenario(lp=2, lc=0, periods=8)
    offered = sum(sum(a.perf_bits.values()) for a in generate_arrivals(
        replace(sc.traffic, seed=3), sc.grid, sc.user_ids, 8))
    for alg in ("itsp", "bcqi"):
        row, _ = simulate_point(sc, 6, alg, 3)
        assert row.perf_throughput_total * 8 * 10e-3 <= offered + 1e-6


def test_arrivals_shared_across_points_and_schedulers():
    sc = scenario(periods=6)
    counts = {simulate_point(sc, n, alg, 3)[0].critical_packets for n in (2, 10) for alg in ("itsp", "bcqi")}
    assert len(counts) == 1


def test_csv_is_deterministic_and_round_trips(tmp_path):
    a = metrics_csv(run_scenario(scenario()))
    b = metrics_csv(run_scenario(scenario()))
    assert a == b
    assert a.startswith(f"# schema: {CSV_SCHEMA}\n")
    rows = read_metrics_csv(a)
    assert metrics_csv(rows) == a
    path = write_metrics(rows, tmp_path / "out", "t")
    assert path.name == "t.csv" and path.read_bytes() == a.encode()


def test_workers_do_not_change_output():
    sc = scenario(periods=3)
    assert metrics_csv(run_scenario(sc, workers=2)) == metrics_csv(run_scenario(sc))


def test_validation_failure_aborts(monkeypatch):
    monkeypatch.setattr(engine, "check_outcome", lambda out, links: [Violation("c", (1, 2, 3), "bad")])
    with pytest.raises(ValidationFailure) as ei:
        simulate_point(scenario(), 4, "itsp", 3)
    assert ei.value.violations[0].cell == (1, 2, 3)
    assert "colliding=4" in str(ei.value)


def test_unknown_scheduler():
    with pytest.raises(ValueError):
        simulate_point(scenario(), 4, "pf", 3)


def test_export_files(tmp_path):
    sc = scenario(sweep=(2, 3, 10))
    paths = export_scenario_ilp(sc, "preempt", tmp_path)
    assert [p.name for p in paths] == ["t_2_preempt.lp", "t_3_preempt.lp", "t_10_preempt.lp"]
    m = model_from_lp(paths[0].read_text())
    assert m.count("x") == 2 * 17 * 10 and m.preemption and not m.rows_of("h")
    nopre = export_scenario_ilp(sc, "no-preempt", tmp_path)
    mn = model_from_lp(nopre[0].read_text())
    assert len(mn.rows_of("h")) == 2 * 2 * 17 * 10 * 7
    again = export_scenario_ilp(sc, "preempt", tmp_path / "again")
    assert [p.read_bytes() for p in paths] == [p.read_bytes() for p in again]
    with pytest.raises(ValueError):
        export_scenario_ilp(sc, "maybe", tmp_path)


def test_exported_model_uses_scenario_band(tmp_path):
    sc = scenario(sweep=(6,))
    (path,) = export_scenario_ilp(sc, "preempt", tmp_path)
    assert path.name == "t_6_preempt.lp"
    m = model_from_lp(path.read_text())
    blocked = {r.name.split("_")[2] for r in m.rows_of("d") if r.rhs == 0}
    assert len(blocked) == 6
