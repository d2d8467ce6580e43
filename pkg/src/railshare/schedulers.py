"""ITSP and the collision-free Best-CQI baseline, one scheduling period at a time.

Both schedulers share the performance step: users by descending CQI (ties
by user id), each taking up to ``required_prbs`` whole-slot grants per slot
on the lowest-indexed eligible PRBs while it still has backlog.

ITSP plans the whole period: performance first, then the sorted critical
queue into free mini-slots of collision-free PRBs, then into performance
mini-slots within the preemption allowance (PA). Packets that would expire
inside the period and are still unplaced preempt regardless of PA, starting
from the lowest-MCS performance PRB.

BCQI never uses colliding PRBs and never punctures a grant. It works slot
by slot: packets already waiting at a slot boundary get free mini-slots of
that slot before performance grants are made; late arrivals take whatever
mini-slots are left in the current slot.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping

from .channel import LinkState, required_prbs
from .grid import AllocationReport, Owner, ResourceGrid, TraceEntry, report
from .traffic import CriticalPacket, sort_critical_queue

Cell = tuple[int, int, int]


@dataclass
class PreemptionBudget:
    allowance: int = 2
    outage: set[tuple[int, int]] = field(default_factory=set)

    def __post_init__(self):
        if self.allowance < 0:
            raise ValueError("preemption allowance must be >= 0")


@dataclass(frozen=True)
class Placement:
    packet: CriticalPacket
    cells: tuple[Cell, ...]
    emergency: bool = False


@dataclass
class SchedulerOutcome:
    algorithm: str
    grid: ResourceGrid
    frame_start: int
    served: list[Placement]
    dropped: list[CriticalPacket]
    deferred: list[CriticalPacket]
    backlog: dict[int, float]
    links: Mapping[int, LinkState]
    allowance: int | None = None

    @cached_property
    def report(self) -> AllocationReport:
        return report(self.grid, self.links)

    @property
    def trace(self) -> list[TraceEntry]:
        return self.grid.trace

    @property
    def delivered_bits(self) -> dict[int, float]:
        return self.report.performance_bits


def _tag_gsmr(grid: ResourceGrid) -> None:
    for k in sorted(grid.band.occupied_set):
        if grid.owner(k, 0, 0) != Owner.GSMR:
            grid.mark_gsmr(k)


def _user_order(links: Mapping[int, LinkState]) -> list[int]:
    return [u for u in sorted(links, key=lambda u: (-links[u].cqi, u)) if not links[u].in_outage]


class _PerfAllocator:
    def __init__(self, grid, links, backlog, perf_target, allow_colliding):
        self.grid = grid
        self.links = links
        self.backlog = backlog
        self.order = _user_order(links)
        self.rb = {u: required_prbs(perf_target, links[u].efficiency) or 0 for u in self.order}
        self.bits = {u: links[u].slot_bits(grid.config.slot_duration_ms) for u in self.order}
        band = grid.band
        self.eligible = [
            k for k in range(grid.config.num_prbs)
            if band.performance_eligible(k, allow_colliding=allow_colliding)
        ]

    def slot(self, t: int) -> None:
        grid = self.grid
        T, M = grid.config.num_slots, grid.config.minislots
        free = grid._free
        ks = [k for k in self.eligible if free[k * T + t] == M]
        j = 0
        backlog = self.backlog
        for u in self.order:
            rb, bits = self.rb[u], self.bits[u]
            left = backlog.get(u, 0.0)
            start = j
            while left > 0 and j - start < rb and j < len(ks):
                left -= bits
                j += 1
            if j > start:
                backlog[u] = left
                grid._put_performance_run(u, ks[start:j], t)
            if j == len(ks):
                return


class _CriticalPlanner:
    """Shared bookkeeping for critical placement on collision-free PRBs."""

    def __init__(self, grid: ResourceGrid, links: Mapping[int, LinkState], frame_start: int):
        self.grid = grid
        self.links = links
        c = grid.config
        self.K, self.T, self.M = c.num_prbs, c.num_slots, c.minislots
        self.lo = frame_start
        self.hi = frame_start + self.T * self.M
        self.prbs = [k for k in range(self.K) if grid.band.critical_eligible(k)]
        self.slot_free = [sum(grid.free_cells(k, t) for k in self.prbs) for t in range(self.T)]
        self.served: list[Placement] = []
        self.dropped: list[CriticalPacket] = []
        self.deferred: list[CriticalPacket] = []
        # performance grants are fixed once critical placement starts
        self._perf_prbs: list[list[int]] | None = None

    def need(self, p: CriticalPacket) -> int | None:
        link = self.links.get(p.user)
        if link is None or not self.prbs:
            return None
        return link.minislots_needed(p.size, self.M)

    def window(self, p: CriticalPacket) -> tuple[int, int]:
        return max(p.arrival_tick, self.lo) - self.lo, min(p.deadline_tick, self.hi) - self.lo

    def commit(self, p: CriticalPacket, cells: list[Cell], emergency: bool = False) -> None:
        for t in self.grid._put_critical_cells(p.user, cells, emergency):
            self.slot_free[t] -= 1
        self.served.append(Placement(p, tuple(cells), emergency))

    def perf_prbs(self) -> list[list[int]]:
        """Per slot, critical-eligible PRBs holding a performance grant."""
        if self._perf_prbs is None:
            su, T = self.grid._slot_user, self.T
            self._perf_prbs = [[k for k in self.prbs if su[k * T + t] >= 0] for t in range(T)]
        return self._perf_prbs

    def free_cells(self, lo: int, hi: int, n: int, order: str = "time") -> list[Cell]:
        """Up to ``n`` free cells with tick in [lo, hi)."""
        g, M, T = self.grid, self.M, self.T
        out: list[Cell] = []
        slot_free = self.slot_free
        if lo >= hi or not any(slot_free[lo // M:(hi - 1) // M + 1]):
            return out
        owner, FREE = g._owner, Owner.FREE
        if order == "time":
            for tick in range(lo, hi):
                t, m = divmod(tick, M)
                if not slot_free[t]:
                    continue
                for k in self.prbs:
                    if owner[(k * T + t) * M + m] == FREE:
                        out.append((k, t, m))
                        if len(out) == n:
                            return out
        else:  # pack PRB by PRB inside a single slot
            t = lo // M
            for k in self.prbs:
                for m in range(lo - t * M, hi - t * M):
                    if owner[(k * T + t) * M + m] == FREE:
                        out.append((k, t, m))
                        if len(out) == n:
                            return out
        return out


def itsp_schedule(
    grid: ResourceGrid,
    links: Mapping[int, LinkState],
    queue: Iterable[CriticalPacket],
    backlog: Mapping[int, float],
    budget: PreemptionBudget | None = None,
    *,
    perf_target: float = 10e6,
    frame_start: int = 0,
) -> SchedulerOutcome:
    """Intelligent Traffic Scheduling Preemptor over one period.

    ``grid`` must be empty apart from GSM-R tagging; ``frame_start`` is the
    absolute tick of slot 0, mini-slot 0.
    """
    budget = budget or PreemptionBudget()
    backlog = dict(backlog)

    # Step I: tagged PRBs are off limits for the whole period
    _tag_gsmr(grid)

    # Step II: performance traffic, colliding-but-idle PRBs included
    perf = _PerfAllocator(grid, links, backlog, perf_target, allow_colliding=True)
    for t in range(grid.config.num_slots):
        perf.slot(t)

    # Step III: critical traffic
    plan = _CriticalPlanner(grid, links, frame_start)
    urgent: list[CriticalPacket] = []
    for p in sort_critical_queue(queue):
        if p.deadline_tick <= plan.lo:
            plan.dropped.append(p)
            continue
        if p.arrival_tick >= plan.hi:
            plan.deferred.append(p)
            continue
        n = plan.need(p)
        if n is None:
            plan.dropped.append(p)
            continue
        lo, hi = plan.window(p)
        cells = _itsp_normal_cells(plan, budget, lo, hi, n)
        if cells is not None:
            plan.commit(p, cells)
            _update_outage(plan, budget, cells)
        elif p.deadline_tick <= plan.hi:
            urgent.append(p)
        else:
            plan.deferred.append(p)

    for p in urgent:
        n = plan.need(p)
        lo, hi = plan.window(p)
        cells = _itsp_emergency_cells(plan, lo, hi, n)
        if cells is None:
            plan.dropped.append(p)
        else:
            plan.commit(p, cells, emergency=True)
            _update_outage(plan, budget, cells)

    return SchedulerOutcome(
        algorithm="itsp",
        grid=grid,
        frame_start=frame_start,
        served=plan.served,
        dropped=plan.dropped,
        deferred=plan.deferred,
        backlog=backlog,
        links=links,
        allowance=budget.allowance,
    )


def _itsp_normal_cells(plan: _CriticalPlanner, budget: PreemptionBudget, lo: int, hi: int, n: int):
    cells = plan.free_cells(lo, hi, n)
    if len(cells) == n:
        return cells
    pa = budget.allowance
    if pa == 0:
        return None
    g, M, T = plan.grid, plan.M, plan.T
    owner, npre, outage = g._owner, g._npre, budget.outage
    PERF = Owner.PERFORMANCE
    by_slot = plan.perf_prbs()
    used: dict[int, int] = {}
    need = n - len(cells)
    for t in range(lo // M, (hi - 1) // M + 1):
        # PRBs of this slot that can still lose a mini-slot
        ks = [k for k in by_slot[t] if npre[k * T + t] < pa and not (outage and (k, t) in outage)]
        if not ks:
            continue
        for m in range(max(lo - t * M, 0), min(hi - t * M, M)):
            for k in ks:
                st = k * T + t
                c = used.get(st, 0)
                if npre[st] + c >= pa or owner[st * M + m] != PERF:
                    continue
                used[st] = c + 1
                cells.append((k, t, m))
                need -= 1
                if need == 0:
                    return cells
    return None


def _itsp_emergency_cells(plan: _CriticalPlanner, lo: int, hi: int, n: int):
    cells = plan.free_cells(lo, hi, n)
    if len(cells) == n:
        return cells
    g, M, T = plan.grid, plan.M, plan.T
    owner, slot_user, PERF = g._owner, g._slot_user, Owner.PERFORMANCE
    by_slot = plan.perf_prbs()
    cand = []
    for tick in range(lo, hi):
        t, m = divmod(tick, M)
        for k in by_slot[t]:
            st = k * T + t
            if owner[st * M + m] == PERF:
                u = slot_user[st]
                eff = plan.links[u].efficiency if u in plan.links else 0.0
                cand.append((eff, k, t, m))
    need = n - len(cells)
    if len(cand) < need:
        return None
    cand.sort()
    return cells + [(k, t, m) for _, k, t, m in cand[:need]]


def _update_outage(plan: _CriticalPlanner, budget: PreemptionBudget, cells: list[Cell]) -> None:
    g, T = plan.grid, plan.T
    for k, t, _ in cells:
        st = k * T + t
        if g._slot_user[st] >= 0 and g._npre[st] >= budget.allowance:
            budget.outage.add((k, t))


def bcqi_schedule(
    grid: ResourceGrid,
    links: Mapping[int, LinkState],
    queue: Iterable[CriticalPacket],
    backlog: Mapping[int, float],
    *,
    perf_target: float = 10e6,
    frame_start: int = 0,
) -> SchedulerOutcome:
    """Best-CQI restricted to collision-free PRBs, no preemption."""
    backlog = dict(backlog)
    _tag_gsmr(grid)
    perf = _PerfAllocator(grid, links, backlog, perf_target, allow_colliding=False)
    plan = _CriticalPlanner(grid, links, frame_start)
    M = plan.M

    waiting = []
    for p in sort_critical_queue(queue):
        if p.deadline_tick <= plan.lo:
            plan.dropped.append(p)
        elif p.arrival_tick >= plan.hi:
            plan.deferred.append(p)
        elif plan.need(p) is None:
            plan.dropped.append(p)
        else:
            waiting.append(p)

    for t in range(plan.T):
        start = plan.lo + t * M
        end = start + M
        waiting = _bcqi_place(plan, waiting, t, arrived_by=start)
        perf.slot(t)
        waiting = _bcqi_place(plan, waiting, t, arrived_by=end - 1)
        still = []
        for p in waiting:
            (plan.dropped if p.deadline_tick <= end else still).append(p)
        waiting = still
    plan.deferred.extend(waiting)

    return SchedulerOutcome(
        algorithm="bcqi",
        grid=grid,
        frame_start=frame_start,
        served=plan.served,
        dropped=plan.dropped,
        deferred=plan.deferred,
        backlog=backlog,
        links=links,
    )


def _bcqi_place(plan: _CriticalPlanner, waiting: list[CriticalPacket], t: int, arrived_by: int):
    M = plan.M
    rest = []
    for p in waiting:
        if p.arrival_tick > arrived_by:
            rest.append(p)
            continue
        lo, hi = plan.window(p)
        lo, hi = max(lo, t * M), min(hi, (t + 1) * M)
        n = plan.need(p)
        cells = plan.free_cells(lo, hi, n, order="prb")
        if len(cells) == n:
            plan.commit(p, cells)
        else:
            rest.append(p)
    return rest


SCHEDULERS = {"itsp": itsp_schedule, "bcqi": bcqi_schedule}
