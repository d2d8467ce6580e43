"""Scenario runner: sweeps colliding-PRB counts, schedules every period,
validates it and reports per-point averages.

For a given seed every sweep point and scheduler sees the same FRMCS
arrivals; only the GSM-R occupancy stream depends on the band plan.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import astuple, dataclass, fields, replace
from pathlib import Path
from typing import Iterable

from .channel import compute_link
from .config import Scenario
from .grid import ResourceGrid
from .ilp import build_model, ilp_scenario, write_lp
from .schedulers import PreemptionBudget, SchedulerOutcome, bcqi_schedule, itsp_schedule
from .traffic import TrafficGenerator, select_active_carriers
from .validate import ConstraintViolation, check_outcome

CSV_SCHEMA = "railshare-metrics/1"


class ValidationFailure(RuntimeError):
    """A scheduled period broke a constraint; carries the offending cells."""

    def __init__(self, scenario: str, colliding: int, algorithm: str, seed: int, period: int,
                 violation: ConstraintViolation):
        self.violations = violation.violations
        super().__init__(
            f"{scenario} colliding={colliding} {algorithm} seed={seed} period={period}: {violation}"
        )


@dataclass(frozen=True)
class MetricsRow:
    scenario: str
    colliding_prbs: int
    scheduler: str
    seed: int
    periods: int
    perf_throughput_total: float  # bit/s
    critical_throughput_total: float  # bit/s
    reuse_rate: float  # mean over periods
    critical_drop_rate: float
    critical_packets: int
    critical_dropped: int
    occupied_prbs_mean: float

    @property
    def sort_key(self):
        return (self.scenario, self.colliding_prbs, self.seed, self.scheduler)


def _links(sc: Scenario, elapsed_s: float):
    positions = sc.users.positions_at(elapsed_s)
    ch = sc.channel
    return {
        u: compute_link(u, abs(x), ch.radio, ch.model, ch.cqi_table)
        for u, x in enumerate(positions)
    }


def simulate_point(
    sc: Scenario,
    n_colliding: int | None,
    algorithm: str,
    seed: int,
    *,
    validate: bool = True,
    keep_outcomes: bool = False,
) -> tuple[MetricsRow, list[SchedulerOutcome]]:
    """Run every period of one (sweep point, scheduler, seed)."""
    plan = sc.band.plan(n_colliding)
    colliding = len(plan.state().colliding_set)
    g = sc.grid
    traffic = TrafficGenerator(replace(sc.traffic, seed=seed), g, sc.user_ids)
    period_s = g.period_ms * 1e-3
    backlog = {u: 0.0 for u in sc.user_ids}
    carried = []
    perf_bits = crit_bits = reuse = occupied = 0.0
    arrived = dropped = 0
    kept = []
    for period in range(sc.periods):
        arr = traffic.next_period()
        active = select_active_carriers(
            traffic.gsmr_rng, arr.gsmr_events, len(plan.carriers),
            strict_subset=sc.scheduler.gsmr_strict_subset,
        )
        band = plan.state(active)
        occupied += len(band.occupied_set)
        links = _links(sc, period * period_s)
        for u, b in arr.perf_bits.items():
            backlog[u] += b
        arrived += len(arr.critical)
        queue = carried + arr.critical
        grid = ResourceGrid(g, band)
        start = period * g.ticks
        if algorithm == "itsp":
            out = itsp_schedule(
                grid, links, queue, backlog, PreemptionBudget(sc.scheduler.pa_mini_slots),
                perf_target=sc.scheduler.perf_target_bps, frame_start=start,
            )
        elif algorithm == "bcqi":
            out = bcqi_schedule(
                grid, links, queue, backlog,
                perf_target=sc.scheduler.perf_target_bps, frame_start=start,
            )
        else:
            raise ValueError(f"unknown scheduler {algorithm!r}")
        if validate:
            v = check_outcome(out, links)
            if v:
                raise ValidationFailure(sc.name, colliding, algorithm, seed, period, ConstraintViolation(v))
        rep = out.report
        # a grant can exceed what is queued; punctured bits stay queued
        for u in backlog:
            sent = min(rep.performance_bits.get(u, 0.0), backlog[u])
            backlog[u] -= sent
            perf_bits += sent
        crit_bits += rep.total_critical_bits
        reuse += rep.reuse_rate
        dropped += len(out.dropped)
        carried = out.deferred
        if keep_outcomes:
            kept.append(out)
    horizon = sc.periods * period_s
    row = MetricsRow(
        scenario=sc.name,
        colliding_prbs=colliding,
        scheduler=algorithm,
        seed=seed,
        periods=sc.periods,
        perf_throughput_total=perf_bits / horizon,
        critical_throughput_total=crit_bits / horizon,
        reuse_rate=reuse / sc.periods,
        critical_drop_rate=dropped / arrived if arrived else 0.0,
        critical_packets=arrived,
        critical_dropped=dropped,
        occupied_prbs_mean=occupied / sc.periods,
    )
    return row, kept


def _task(args) -> list[MetricsRow]:
    sc, n, seed = args
    return [simulate_point(sc, n, alg, seed)[0] for alg in sc.scheduler.algorithms]


def run_scenario(sc: Scenario, *, workers: int = 1) -> list[MetricsRow]:
    """Every (seed, sweep point, scheduler) combination, sorted for output."""
    tasks = [(sc, n, seed) for seed in sc.seeds for n in sc.sweep_points]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_task, tasks))
    else:
        chunks = [_task(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=lambda r: r.sort_key)


def _fmt(v) -> str:
    if isinstance(v, float):
        return format(v, ".10g")
    return str(v)


def metrics_csv(rows: Iterable[MetricsRow]) -> str:
    buf = io.StringIO()
    buf.write(f"# schema: {CSV_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f.name for f in fields(MetricsRow)])
    for r in sorted(rows, key=lambda r: r.sort_key):
        w.writerow([_fmt(v) for v in astuple(r)])
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[MetricsRow]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    out = []
    types = {f.name: f.type for f in fields(MetricsRow)}
    for rec in csv.DictReader(lines):
        kw = {}
        for k, v in rec.items():
            t = types[k]
            kw[k] = int(v) if t == "int" else float(v) if t == "float" else v
        out.append(MetricsRow(**kw))
    return out


def write_metrics(rows: Iterable[MetricsRow], out_dir: str | Path, name: str) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.csv"
    with open(path, "w", newline="") as fh:
        fh.write(metrics_csv(rows))
    return path


VARIANTS = {"preempt": True, "no-preempt": False}


def scenario_ilp(sc: Scenario, n_colliding: int | None, seed: int | None = None):
    """ILP inputs for the first period of a sweep point.

    Occupancy and critical demand come from the same streams the simulator
    uses; TH_perf is the throughput target over one period and TH_crit the
    payload of the period's critical arrivals.
    """
    plan = sc.band.plan(n_colliding)
    g = sc.grid
    seed = sc.seeds[0] if seed is None else seed
    traffic = TrafficGenerator(replace(sc.traffic, seed=seed), g, sc.user_ids)
    arr = traffic.next_period()
    active = select_active_carriers(
        traffic.gsmr_rng, arr.gsmr_events, len(plan.carriers),
        strict_subset=sc.scheduler.gsmr_strict_subset,
    )
    band = plan.state(active)
    links = _links(sc, 0.0)
    period_s = g.period_ms * 1e-3
    th_perf = {u: sc.scheduler.perf_target_bps * period_s for u in links}
    th_crit = {u: 0.0 for u in links}
    for p in arr.critical:
        th_crit[p.user] += p.size * 8
    deadline = int(round(sc.traffic.critical_deadline_ms / g.minislot_ms))
    name = f"{sc.name}_{len(band.colliding_set)}"
    return ilp_scenario(g, band, links, th_perf, th_crit, deadline_minislots=deadline, name=name)


def export_scenario_ilp(sc: Scenario, variant: str, out_dir: str | Path) -> list[Path]:
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {', '.join(VARIANTS)}")
    paths = []
    for n in sc.sweep_points:
        isc = scenario_ilp(sc, n)
        model = build_model(isc, preemption=VARIANTS[variant])
        paths.append(write_lp(model, Path(out_dir) / f"{isc.name}_{variant}.lp"))
    return paths
