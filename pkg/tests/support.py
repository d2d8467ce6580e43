"""Shared builders for tests: links with a chosen CQI, random frames."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from railshare.band_plan import BandPlan, BandState
from railshare.channel import CQI_TABLE, LinkState, RadioParams, compute_link
from railshare.grid import GridConfig, ResourceGrid
from railshare.schedulers import PreemptionBudget, bcqi_schedule, itsp_schedule
from railshare.traffic import ArrivalConfig, CriticalKind, CriticalPacket, TrafficGenerator, select_active_carriers


def make_link(user: int, cqi: int) -> LinkState:
    """Link sitting half a dB above the CQI threshold."""
    if cqi == 0:
        return LinkState(user, 5000.0, 200.0, -20.0, 0, 0.0, 0.0)
    row = next(r for r in CQI_TABLE if r.cqi == cqi)
    s = row.threshold_db + 0.5
    return LinkState(user, 1000.0, 100.0, s, cqi, row.efficiency, 180e3 * math.log2(1 + 10 ** (s / 10)))


def default_links(n: int = 2, distance: float = 1500.0) -> dict[int, LinkState]:
    p = RadioParams()
    return {u: compute_link(u, distance, p) for u in range(n)}


def packet(seq, user, arrival, size=100, kind=CriticalKind.SIGNALING, window=35):
    return CriticalPacket(seq, user, CriticalKind(kind), size, arrival, arrival + window)


@dataclass
class Frame:
    config: GridConfig
    band: BandState
    links: dict
    queue: list
    backlog: dict
    frame_start: int
    allowance: int


def random_frames(seed: int, frames: int = 2):
    """A short run of consecutive periods with random geometry and load.

    |E_c| is drawn from 2..10, GSM-R activity is a strict subset of the
    carriers, user CQIs are drawn from 0..15 and critical load from 0..30
    packets per user per period.
    """
    rng = random.Random(seed)
    gc = GridConfig()
    plan = BandPlan.synthesize(rng.randint(2, 10))
    links = {u: make_link(u, rng.choice([0] + [rng.randint(1, 15)] * 6)) for u in range(2)}
    cfg = ArrivalConfig(
        lambda_perf=rng.uniform(0, 100),
        lambda_critical=rng.uniform(0, 30),
        lambda_gsmr=rng.uniform(0, 6),
        seed=seed,
        critical_packet_max_bytes=120,
        signaling_fraction=rng.random(),
    )
    gen = TrafficGenerator(cfg, gc, list(links))
    allowance = rng.randint(0, 3)
    for f in range(frames):
        arr = gen.next_period()
        active = select_active_carriers(gen.gsmr_rng, arr.gsmr_events, len(plan.carriers), strict_subset=True)
        yield Frame(gc, plan.state(active), links, arr.critical, arr.perf_bits, f * gc.ticks, allowance)


def run_frames(seed: int, algorithm: str, frames: int = 2):
    """Schedule consecutive random periods, carrying deferred packets and backlog."""
    carried, backlog, outs = [], None, []
    for fr in random_frames(seed, frames):
        if backlog is None:
            backlog = {u: 0.0 for u in fr.links}
        for u, b in fr.backlog.items():
            backlog[u] += b
        grid = ResourceGrid(fr.config, fr.band)
        queue = carried + fr.queue
        if algorithm == "itsp":
            out = itsp_schedule(grid, fr.links, queue, backlog, PreemptionBudget(fr.allowance),
                                frame_start=fr.frame_start)
        else:
            out = bcqi_schedule(grid, fr.links, queue, backlog, frame_start=fr.frame_start)
        backlog = {u: max(v, 0.0) for u, v in out.backlog.items()}
        carried = out.deferred
        outs.append((out, fr))
    return outs
