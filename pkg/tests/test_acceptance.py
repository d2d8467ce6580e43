"""Exit criteria for the build. Each test prints one PASS/FAIL line.

Run on their own with ``pytest -m acceptance -s``.
"""

import gc
import math
import random
import statistics
import time
from dataclasses import replace
from pathlib import Path

import pytest

from railshare.band_plan import BandPlan, BandState
from railshare.channel import (
    PathLossModel,
    RadioParams,
    breakpoint_distance,
    path_loss_branches,
    prb_rate,
    required_prbs,
    thermal_noise_floor,
)
from railshare.cli import main
from railshare.config import load_scenario
from railshare.grid import GridConfig, ResourceGrid
from railshare.ilp import (
    IlpScenario,
    assignment_from_grid,
    build_model,
    export_lp,
    model_from_lp,
    scenario_from_outcome,
    solve_exhaustive,
)
from railshare.schedulers import PreemptionBudget, itsp_schedule
from railshare.traffic import TrafficGenerator, select_active_carriers
from railshare.engine import run_scenario
from railshare.validate import check_outcome
from support import make_link, packet, run_frames
from test_ilp import count_formulas

pytestmark = pytest.mark.acceptance

SCENARIOS = Path(__file__).parents[1] / "scenarios"
HIGH = SCENARIOS / "high_load.yaml"
LOW = SCENARIOS / "low_load.yaml"

# pinned tolerances and limits
CONSTRAINT_SCENARIOS = 1000
CONSTRAINT_BUDGET_S = 60.0
TINY_INSTANCES = 120
TINY_MAX_BINARIES = 24
REUSE_SEED_SHARE = 0.90
TNF_TOL_DB = 0.01
CONTINUITY_TOL_DB = 1e-9
SWEEP_BUDGET_S = 10.0
FRAME_BUDGET_S = 1e-3
DETERMINISM_RUNS = 3


def verdict(capsys, tag, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'} [{tag}] {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def high_sweep():
    sc = load_scenario(HIGH)
    t0 = time.perf_counter()
    rows = run_scenario(sc)
    return sc, rows, time.perf_counter() - t0


def test_1_constraint_satisfaction(capsys):
    t0 = time.perf_counter()
    frames = failures = 0
    first = None
    for seed in range(CONSTRAINT_SCENARIOS):
        for alg in ("itsp", "bcqi"):
            for out, fr in run_frames(seed, alg, frames=2):
                frames += 1
                v = check_outcome(out, fr.links)
                if v:
                    failures += 1
                    first = first or (seed, alg, v[0])
    elapsed = time.perf_counter() - t0
    ok = failures == 0 and elapsed < CONSTRAINT_BUDGET_S
    verdict(capsys, "1 constraints", ok,
            f"{CONSTRAINT_SCENARIOS} scenarios, {frames} frames, {failures} invalid "
            f"in {elapsed:.1f} s (limit {CONSTRAINT_BUDGET_S:.0f} s){'' if first is None else f'; first {first}'}")


TINY_SHAPES = [((2, 1, 2), 1), ((3, 1, 2), 1), ((2, 2, 1), 1), ((2, 1, 3), 1), ((4, 1, 1), 1), ((2, 1, 1), 2)]


def tiny_instance(n):
    rng = random.Random(1000 + n)
    (K, T, M), users = TINY_SHAPES[n % len(TINY_SHAPES)]
    col = sorted(rng.sample(range(K), rng.randint(0, K - 1)))
    occ = [k for k in col if rng.random() < 0.5]
    grid = ResourceGrid(GridConfig(K, T, M), BandState.from_sets(K, col, occ))
    links = {u: make_link(u, rng.randint(1, 15)) for u in range(users)}
    arrivals = sorted(rng.randrange(T * M) for _ in range(rng.randint(0, 3)))
    queue = [packet(s, rng.randrange(users), a, size=rng.randint(70, 120), kind=rng.randint(0, 1),
                    window=rng.randint(1, 35)) for s, a in enumerate(arrivals)]
    backlog = {u: rng.choice([0.0, 1e3, 1e9]) for u in links}
    out = itsp_schedule(grid, links, queue, backlog, PreemptionBudget(rng.randint(0, 2)))
    return out, links


def test_2_oracle_dominance(capsys):
    bad, sizes = [], []
    for n in range(TINY_INSTANCES):
        out, links = tiny_instance(n)
        sc = scenario_from_outcome(out, links, name=f"tiny{n}")
        mp, mn = build_model(sc, True), build_model(sc, False)
        sizes.append(max(mp.num_binaries, mn.num_binaries))
        a = assignment_from_grid(out.grid, sc.perf_users, sc.crit_users)
        itsp_value = mp.objective_value(a)
        opt_p = solve_exhaustive(mp, limit=TINY_MAX_BINARIES)
        opt_n = solve_exhaustive(mn, limit=TINY_MAX_BINARIES)
        problems = []
        if mp.violated(a):
            problems.append(f"ITSP assignment breaks {[r.name for r in mp.violated(a)][:3]}")
        if not opt_p.feasible or opt_p.objective < itsp_value:
            problems.append(f"optimum {opt_p.objective} < ITSP {itsp_value}")
        if opt_n.feasible and (not opt_p.feasible or opt_p.objective < opt_n.objective):
            problems.append(f"no-preempt {opt_n.objective} > preempt {opt_p.objective}")
        if problems:
            bad.append((n, problems))
    ok = not bad and max(sizes) <= TINY_MAX_BINARIES and TINY_INSTANCES >= 100
    verdict(capsys, "2 oracle dominance", ok,
            f"{TINY_INSTANCES} instances of {min(sizes)}..{max(sizes)} binaries, {len(bad)} violations"
            f"{'' if not bad else f'; first {bad[0]}'}")


def test_3_reuse_rate(capsys, high_sweep):
    sc, rows, _ = high_sweep
    seeds = range(1, 21)
    short = replace(sc, sweep=(2, 6, 10), periods=20, seeds=tuple(seeds))
    seed_rows = run_scenario(short)
    bcqi = [r for r in rows + seed_rows if r.scheduler == "bcqi"]
    bcqi_zero = all(r.reuse_rate == 0.0 for r in bcqi)
    itsp_ok = [s for s in seeds
               if all(r.reuse_rate > 0 for r in seed_rows if r.seed == s and r.scheduler == "itsp")]
    share = len(itsp_ok) / len(seeds)
    ok = bcqi_zero and share >= REUSE_SEED_SHARE
    verdict(capsys, "3 reuse rate", ok,
            f"BCQI reuse exactly 0 in {sum(r.reuse_rate == 0 for r in bcqi)}/{len(bcqi)} runs; "
            f"ITSP reuse > 0 for {len(itsp_ok)}/{len(seeds)} high-load seeds ({share:.0%}, need {REUSE_SEED_SHARE:.0%})")


def _ordering(rows):
    by = {(r.colliding_prbs, r.scheduler): r.perf_throughput_total for r in rows}
    points = sorted({r.colliding_prbs for r in rows})
    above = all(by[(n, "itsp")] >= by[(n, "bcqi")] for n in points)
    bcqi = [by[(n, "bcqi")] for n in points]
    monotone = all(b <= a for a, b in zip(bcqi, bcqi[1:]))
    return above, monotone, points, by


def test_4_throughput_ordering(capsys, high_sweep):
    sc, rows, _ = high_sweep
    results = {"high_load": _ordering(rows), "low_load": _ordering(run_scenario(load_scenario(LOW)))}
    assert sc.scheduler.gsmr_strict_subset
    ok = all(a and m for a, m, _, _ in results.values())
    parts = []
    for name, (above, mono, points, by) in results.items():
        itsp = "/".join(f"{by[(n, 'itsp')] / 1e6:.1f}" for n in points)
        bcqi = "/".join(f"{by[(n, 'bcqi')] / 1e6:.1f}" for n in points)
        parts.append(f"{name}: ITSP>=BCQI {above}, BCQI non-increasing {mono} "
                     f"(ITSP {itsp} Mbps; BCQI {bcqi} Mbps)")
    verdict(capsys, "4 throughput ordering", ok, "; ".join(parts))


def test_5_link_budget(capsys):
    p = RadioParams()
    tnf = thermal_noise_floor(180e3)
    rate0 = prb_rate(p, 0.0)
    rb = required_prbs(10e6, 5.5547)
    gaps = {m.value: abs(operator_diff(*path_loss_branches(m, p, breakpoint_distance(p, m))))
            for m in PathLossModel}
    ok = (abs(tnf - (-121.45)) <= TNF_TOL_DB and rate0 == 180_000.0 and rb == 11
          and all(g <= CONTINUITY_TOL_DB for g in gaps.values()))
    verdict(capsys, "5 link budget", ok,
            f"TNF {tnf:.4f} dBm, rate at 0 dB {rate0:.1f} bit/s, required PRBs {rb}, "
            f"breakpoint gaps {', '.join(f'{k} {v:.1e} dB' for k, v in gaps.items())}")


def operator_diff(a, b):
    return a - b


AUDIT = [
    IlpScenario.uniform([1], [1], (2, 1, 2), name="audit_tiny"),
    IlpScenario.uniform([0, 1], [0, 1], (17, 10, 7), colliding=range(5, 11), occupied=[5, 6],
                        gamma=180.0, th_perf=1e4, th_crit=800.0, name="audit_table"),
    IlpScenario.uniform([0], [0, 1, 2], (5, 3, 4), colliding=[1, 2], occupied=[2], name="audit_crit"),
    IlpScenario.uniform([0, 1, 2], [], (4, 2, 3), name="audit_perf"),
    IlpScenario.uniform([0, 1], [1], (6, 2, 7), colliding=[5], gamma={0: 1.5, 1: 0.25},
                        th_perf={0: 3.0, 1: 7.0}, th_crit=2.0, deadline_minislots=5, name="audit_mixed"),
]


def test_6_ilp_structure(capsys):
    problems = []
    for sc in AUDIT:
        for pre in (True, False):
            m = build_model(sc, pre)
            v, r = count_formulas(len(sc.perf_users), len(sc.crit_users), sc.num_prbs,
                                  sc.num_slots, sc.minislots, pre)
            if any(m.count(f) != n for f, n in v.items()) or m.num_binaries != sum(v.values()):
                problems.append(f"{sc.name}/{pre}: variable counts")
            if any(len(m.rows_of(rule)) != n for rule, n in r.items()):
                problems.append(f"{sc.name}/{pre}: row counts")
            text = export_lp(m)
            back = model_from_lp(text)
            if back.num_binaries != m.num_binaries or len(back.rows) != len(m.rows):
                problems.append(f"{sc.name}/{pre}: round trip")
            if export_lp(build_model(sc, pre)) != text or export_lp(back) != text:
                problems.append(f"{sc.name}/{pre}: re-export differs")
    verdict(capsys, "6 ILP structure", not problems,
            f"{len(AUDIT)} scenarios x 2 variants: counts, round trip and byte-identical re-export; "
            f"{len(problems)} problems{'' if not problems else f' {problems[:3]}'}")


def test_7_determinism(capsys, tmp_path):
    csvs, lps = [], []
    for i in range(DETERMINISM_RUNS):
        out = tmp_path / f"run{i}"
        assert main(["run", str(HIGH), "--periods", "20", "--out", str(out), "-q"]) == 0
        assert main(["export-ilp", str(HIGH), "--variant", "preempt", "--out", str(out)]) == 0
        csvs.append((out / "high_load.csv").read_bytes())
        lps.append({p.name: p.read_bytes() for p in sorted(out.glob("*.lp"))})
    ok = len(set(csvs)) == 1 and all(lp == lps[0] for lp in lps) and len(lps[0]) == 9
    verdict(capsys, "7 determinism", ok,
            f"{DETERMINISM_RUNS} runs: CSV identical {len(set(csvs)) == 1}, "
            f"{len(lps[0])} LP files identical {all(lp == lps[0] for lp in lps)}")


def _itsp_frame_times(frames=300):
    sc = load_scenario(HIGH)
    g = sc.grid
    links = {u: make_link(u, 15) for u in sc.user_ids}
    times = []
    for n in (2, 6, 10):
        plan = BandPlan.synthesize(n)
        gen = TrafficGenerator(sc.traffic, g, sc.user_ids)
        backlog = {u: 0.0 for u in links}
        carried = []
        for f in range(frames // 3):
            arr = gen.next_period()
            band = plan.state(select_active_carriers(gen.gsmr_rng, arr.gsmr_events, len(plan.carriers),
                                                     strict_subset=True))
            for u, b in arr.perf_bits.items():
                backlog[u] += b
            grid = ResourceGrid(g, band)
            queue = carried + arr.critical
            t0 = time.perf_counter()
            out = itsp_schedule(grid, links, queue, backlog, PreemptionBudget(2), frame_start=f * g.ticks)
            times.append(time.perf_counter() - t0)
            backlog = {u: max(v, 0.0) for u, v in out.backlog.items()}
            carried = out.deferred
    return times


def test_8_performance(capsys, high_sweep):
    sc, rows, elapsed = high_sweep
    was = gc.isenabled()
    gc.disable()
    try:
        times = _itsp_frame_times()
    finally:
        if was:
            gc.enable()
    median = statistics.median(times)
    n_frames = len(sc.sweep_points) * sc.periods * len(sc.scheduler.algorithms)
    ok = elapsed < SWEEP_BUDGET_S and median < FRAME_BUDGET_S and n_frames == 9 * 100 * 2
    verdict(capsys, "8 performance", ok,
            f"sweep of {n_frames} validated frames in {elapsed:.2f} s (limit {SWEEP_BUDGET_S:.0f} s); "
            f"ITSP frame median {median * 1e3:.3f} ms over {len(times)} frames (limit {FRAME_BUDGET_S * 1e3:.0f} ms)")
