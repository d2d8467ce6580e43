"""Poisson arrivals for performance, critical and GSM-R traffic; critical queue.

Time inside the simulator is counted in mini-slot *ticks* from the start of
the run, so a critical packet's window survives across period boundaries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .grid import GridConfig


class CriticalKind(enum.IntEnum):
    SIGNALING = 0
    VOICE = 1


@dataclass(frozen=True)
class CriticalPacket:
    seq: int
    user: int
    kind: CriticalKind
    size: int
    arrival_tick: int
    deadline_tick: int  # exclusive: last usable tick is deadline_tick - 1

    def __post_init__(self):
        if not 70 <= self.size <= 120:
            raise ValueError(f"critical payload {self.size} B outside [70, 120]")

    def arrival(self, minislots: int) -> tuple[int, int]:
        """(absolute slot, mini-slot) of arrival."""
        return divmod(self.arrival_tick, minislots)

    def deadline_remaining(self, now_tick: int, minislot_ms: float) -> float:
        return (self.deadline_tick - now_tick) * minislot_ms


@dataclass(frozen=True)
class PerformanceDemand:
    user: int
    target_throughput: float = 10e6
    packet_size: int = 200

    def __post_init__(self):
        if self.target_throughput < 0:
            raise ValueError("performance target must be >= 0")


@dataclass(frozen=True)
class ArrivalConfig:
    """Mean arrivals per period; perf and critical rates are per user."""

    lambda_perf: float = 50.0
    lambda_critical: float = 10.0
    lambda_gsmr: float = 2.0
    seed: int = 0
    critical_deadline_ms: float = 5.0
    critical_packet_bytes: int = 100
    critical_packet_max_bytes: int | None = None
    perf_packet_bytes: int = 200
    signaling_fraction: float = 0.5

    def __post_init__(self):
        for name in ("lambda_perf", "lambda_critical", "lambda_gsmr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not 0.0 <= self.signaling_fraction <= 1.0:
            raise ValueError("signaling_fraction must be in [0, 1]")
        hi = self.critical_packet_max_bytes
        if hi is not None and hi < self.critical_packet_bytes:
            raise ValueError("critical_packet_max_bytes below critical_packet_bytes")


@dataclass
class PeriodArrivals:
    index: int
    perf_bits: dict[int, float]
    critical: list[CriticalPacket]
    gsmr_events: int


class TrafficGenerator:
    """Seeded per-period arrival stream.

    Each traffic class draws from its own child stream, so changing the band
    plan (which only touches GSM-R selection) leaves the FRMCS arrivals intact.
    """

    def __init__(self, config: ArrivalConfig, grid: GridConfig, users: Sequence[int]):
        self.config = config
        self.grid = grid
        self.users = list(users)
        ss = np.random.SeedSequence(config.seed)
        perf_ss, crit_ss, gsmr_ss = ss.spawn(3)
        self._perf = np.random.default_rng(perf_ss)
        self._crit = np.random.default_rng(crit_ss)
        self.gsmr_rng = np.random.default_rng(gsmr_ss)
        self._period = 0
        self._seq = 0
        self._deadline_ticks = int(round(config.critical_deadline_ms / grid.minislot_ms))

    def next_period(self) -> PeriodArrivals:
        c, g = self.config, self.grid
        start = self._period * g.ticks
        perf_bits = {}
        for u in self.users:
            n = int(self._perf.poisson(c.lambda_perf))
            perf_bits[u] = float(n * c.perf_packet_bytes * 8)
        packets = []
        for u in self.users:
            n = int(self._crit.poisson(c.lambda_critical))
            if n == 0:
                continue
            ticks = self._crit.integers(0, g.ticks, size=n)
            kinds = self._crit.random(n) >= c.signaling_fraction
            if c.critical_packet_max_bytes is None:
                sizes = np.full(n, c.critical_packet_bytes)
            else:
                sizes = self._crit.integers(
                    c.critical_packet_bytes, c.critical_packet_max_bytes + 1, size=n
                )
            for tick, voice, size in zip(ticks, kinds, sizes):
                packets.append((int(tick), u, bool(voice), int(size)))
        packets.sort(key=lambda p: (p[0], p[1]))
        out = []
        for tick, u, voice, size in packets:
            at = start + tick
            out.append(CriticalPacket(
                seq=self._seq,
                user=u,
                kind=CriticalKind.VOICE if voice else CriticalKind.SIGNALING,
                size=size,
                arrival_tick=at,
                deadline_tick=at + self._deadline_ticks,
            ))
            self._seq += 1
        gsmr = int(self.gsmr_rng.poisson(c.lambda_gsmr))
        arr = PeriodArrivals(self._period, perf_bits, out, gsmr)
        self._period += 1
        return arr


def generate_arrivals(
    config: ArrivalConfig, grid: GridConfig, users: Sequence[int], periods: int
) -> list[PeriodArrivals]:
    gen = TrafficGenerator(config, grid, users)
    return [gen.next_period() for _ in range(periods)]


def critical_sort_key(p: CriticalPacket) -> tuple[int, int, int]:
    # signalling before voice, then earliest deadline, then arrival order
    return (int(p.kind), p.deadline_tick, p.seq)


def sort_critical_queue(queue: Iterable[CriticalPacket]) -> list[CriticalPacket]:
    return sorted(queue, key=critical_sort_key)


def select_active_carriers(
    rng: np.random.Generator, events: int, num_carriers: int, *, strict_subset: bool = False
) -> frozenset[int]:
    """Each GSM-R arrival switches on one carrier picked uniformly at random.

    With ``strict_subset`` at least one carrier is kept idle.
    """
    if num_carriers == 0:
        # keep the stream position independent of the plan
        rng.integers(0, 1, size=events)
        return frozenset()
    picks = rng.integers(0, num_carriers, size=events)
    active: list[int] = []
    cap = num_carriers - 1 if strict_subset else num_carriers
    for p in picks:
        p = int(p)
        if p not in active and len(active) < cap:
            active.append(p)
    return frozenset(active)


@dataclass
class CriticalQueue:
    """Pending critical packets plus a monotone count of expired ones."""

    packets: list[CriticalPacket] = field(default_factory=list)
    dropped: int = 0
    dropped_packets: list[CriticalPacket] = field(default_factory=list)

    def extend(self, packets: Iterable[CriticalPacket]) -> None:
        self.packets.extend(packets)

    def expire(self, now_tick: int) -> list[CriticalPacket]:
        """Remove packets with no usable tick left at ``now_tick``."""
        keep, gone = [], []
        for p in self.packets:
            (gone if p.deadline_tick <= now_tick else keep).append(p)
        self.packets = keep
        self.drop(gone)
        return gone

    def drop(self, packets: Iterable[CriticalPacket]) -> None:
        packets = list(packets)
        self.dropped += len(packets)
        self.dropped_packets.extend(packets)

    def take(self) -> list[CriticalPacket]:
        out, self.packets = self.packets, []
        return out

    def __len__(self) -> int:
        return len(self.packets)
