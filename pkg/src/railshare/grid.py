"""K x T x M allocation grid for one scheduling period.

Performance traffic is granted per (PRB, slot), critical traffic per
(PRB, slot, mini-slot). A critical cell that displaced a performance grant
keeps the displaced user in ``preempted_from``.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .band_plan import BandState
from .channel import LinkState


class AllocationError(ValueError):
    pass


class Owner(enum.IntEnum):
    FREE = 0
    GSMR = 1
    PERFORMANCE = 2
    CRITICAL = 3


@dataclass(frozen=True)
class GridConfig:
    num_prbs: int = 17
    num_slots: int = 10
    minislots: int = 7
    slot_duration_ms: float = 1.0

    def __post_init__(self):
        if min(self.num_prbs, self.num_slots, self.minislots) < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.slot_duration_ms <= 0:
            raise ValueError("slot duration must be positive")

    @property
    def period_ms(self) -> float:
        return self.num_slots * self.slot_duration_ms

    @property
    def minislot_ms(self) -> float:
        return self.slot_duration_ms / self.minislots

    @property
    def ticks(self) -> int:
        """Mini-slots per period."""
        return self.num_slots * self.minislots


@dataclass(frozen=True)
class CellState:
    owner: Owner
    user: int | None = None
    preempted_from: int | None = None


class TraceEntry(NamedTuple):
    op: str  # "gsmr" | "perf" | "crit"
    k: int
    t: int = -1
    m: int = -1
    user: int = -1
    preempt: bool = False
    emergency: bool = False


@dataclass
class AllocationReport:
    performance_bits: dict[int, float]
    critical_bits: dict[int, float]
    performance_prb_slots: int
    critical_cells: int
    performance_minislots: int  # sum over (t, m) of z^{m,t}
    preempted_prb_slots: int
    reuse_rate: float
    objective: Fraction = field(default=Fraction(0))

    @property
    def total_performance_bits(self) -> float:
        return sum(self.performance_bits.values())

    @property
    def total_critical_bits(self) -> float:
        return sum(self.critical_bits.values())


class ResourceGrid:
    def __init__(self, config: GridConfig, band: BandState):
        if band.num_prbs != config.num_prbs:
            raise ValueError(
                f"band state has {band.num_prbs} PRBs, grid expects {config.num_prbs}"
            )
        self.config = config
        self.band = band
        K, T, M = config.num_prbs, config.num_slots, config.minislots
        n = K * T * M
        self._owner = [0] * n
        self._user = [-1] * n
        self._pre = [-1] * n
        # per (k, t): performance owner, free cells, preempted cells
        self._slot_user = [-1] * (K * T)
        self._free = [M] * (K * T)
        self._npre = [0] * (K * T)
        # raw tuples in TraceEntry field order; wrapped on read
        self._trace: list[tuple] = []

    @property
    def trace(self) -> list[TraceEntry]:
        """Every mutation in the order it was applied."""
        return [TraceEntry._make(e) for e in self._trace]

    # indexing -----------------------------------------------------------
    def _idx(self, k: int, t: int, m: int) -> int:
        return (k * self.config.num_slots + t) * self.config.minislots + m

    def _check(self, k: int, t: int = 0, m: int = 0) -> None:
        c = self.config
        if not (0 <= k < c.num_prbs and 0 <= t < c.num_slots and 0 <= m < c.minislots):
            raise AllocationError(f"cell ({k}, {t}, {m}) outside the grid")

    def cell(self, k: int, t: int, m: int) -> CellState:
        self._check(k, t, m)
        i = self._idx(k, t, m)
        u, p = self._user[i], self._pre[i]
        return CellState(Owner(self._owner[i]), None if u < 0 else u, None if p < 0 else p)

    def owner(self, k: int, t: int, m: int) -> Owner:
        return Owner(self._owner[self._idx(k, t, m)])

    def slot_user(self, k: int, t: int) -> int | None:
        u = self._slot_user[k * self.config.num_slots + t]
        return None if u < 0 else u

    def free_cells(self, k: int, t: int) -> int:
        return self._free[k * self.config.num_slots + t]

    def preempted_count(self, k: int, t: int) -> int:
        return self._npre[k * self.config.num_slots + t]

    def is_slot_free(self, k: int, t: int) -> bool:
        return self._free[k * self.config.num_slots + t] == self.config.minislots

    # mutation -----------------------------------------------------------
    def mark_gsmr(self, k: int) -> None:
        """Reserve PRB ``k`` for GSM-R over the whole period (b_k = 1)."""
        self._check(k)
        if not self.band.occupied[k]:
            raise AllocationError(f"PRB {k} is not occupied by GSM-R")
        T, M = self.config.num_slots, self.config.minislots
        for t in range(T):
            if self._free[k * T + t] != M:
                raise AllocationError(f"PRB {k} slot {t} already allocated")
        for t in range(T):
            base = self._idx(k, t, 0)
            for m in range(M):
                self._owner[base + m] = Owner.GSMR
            self._free[k * T + t] = 0
        self._trace.append(("gsmr", k, -1, -1, -1, False, False))

    def grant_performance(self, user: int, k: int, t: int) -> None:
        if not (0 <= k < self.config.num_prbs and 0 <= t < self.config.num_slots):
            raise AllocationError(f"PRB-slot ({k}, {t}) outside the grid")
        b = self.band
        if b.reserved[k]:
            raise AllocationError(f"PRB {k} is reserved for control signalling")
        if b.occupied[k]:
            raise AllocationError(f"PRB {k} is in use by GSM-R")
        T, M = self.config.num_slots, self.config.minislots
        st = k * T + t
        if self._free[st] != M:
            raise AllocationError(f"PRB {k} slot {t} is not free")
        self._put_performance(user, k, t, st, M)

    def _put_performance(self, user: int, k: int, t: int, st: int, M: int) -> None:
        # caller has already checked eligibility and that the slot is free
        base = st * M
        self._owner[base:base + M] = [Owner.PERFORMANCE] * M
        self._user[base:base + M] = [user] * M
        self._slot_user[st] = user
        self._free[st] = 0
        self._trace.append(("perf", k, t, -1, user, False, False))

    def _put_performance_run(self, user: int, ks, t: int) -> None:
        # whole-slot grants of several PRBs in one slot; same checks as above
        T, M = self.config.num_slots, self.config.minislots
        owner, users, trace = self._owner, self._user, self._trace
        cells, ids = [Owner.PERFORMANCE] * M, [user] * M
        for k in ks:
            st = k * T + t
            base = st * M
            owner[base:base + M] = cells
            users[base:base + M] = ids
            self._slot_user[st] = user
            self._free[st] = 0
            trace.append(("perf", k, t, -1, user, False, False))

    def grant_critical(
        self, user: int, k: int, t: int, m: int, preempt: bool = False, *, emergency: bool = False
    ) -> None:
        c = self.config
        if not (0 <= k < c.num_prbs and 0 <= t < c.num_slots and 0 <= m < c.minislots):
            raise AllocationError(f"cell ({k}, {t}, {m}) outside the grid")
        b = self.band
        if b.colliding[k]:
            raise AllocationError(f"PRB {k} may collide with GSM-R; critical traffic refused")
        if b.reserved[k]:
            raise AllocationError(f"PRB {k} is reserved for control signalling")
        st = k * c.num_slots + t
        i = st * c.minislots + m
        own = self._owner[i]
        if own == Owner.PERFORMANCE and not preempt:
            raise AllocationError(f"cell ({k}, {t}, {m}) holds performance traffic")
        if own not in (Owner.FREE, Owner.PERFORMANCE):
            raise AllocationError(f"cell ({k}, {t}, {m}) is owned by {Owner(own).name}")
        self._put_critical(user, k, t, m, st, i, emergency)

    def _put_critical(self, user: int, k: int, t: int, m: int, st: int, i: int, emergency: bool) -> None:
        # caller has checked the PRB is collision-free and the cell is FREE or PERFORMANCE
        own = self._owner[i]
        if own == Owner.FREE:
            self._free[st] -= 1
        else:
            self._pre[i] = self._user[i]
            self._npre[st] += 1
        self._owner[i] = Owner.CRITICAL
        self._user[i] = user
        self._trace.append(("crit", k, t, m, user, own == Owner.PERFORMANCE, emergency))

    def _put_critical_cells(self, user: int, cells, emergency: bool) -> list[int]:
        """Batch form of :meth:`_put_critical`; returns the slots of cells that were free."""
        T, M = self.config.num_slots, self.config.minislots
        owner, users, pre, npre, free, trace = (
            self._owner, self._user, self._pre, self._npre, self._free, self._trace)
        FREE, PERF, CRIT = Owner.FREE, Owner.PERFORMANCE, Owner.CRITICAL
        was_free = []
        for k, t, m in cells:
            st = k * T + t
            i = st * M + m
            own = owner[i]
            if own == FREE:
                free[st] -= 1
                was_free.append(t)
            else:
                pre[i] = users[i]
                npre[st] += 1
            owner[i] = CRIT
            users[i] = user
            trace.append(("crit", k, t, m, user, own == PERF, emergency))
        return was_free

    def apply(self, entry: TraceEntry) -> None:
        if entry.op == "gsmr":
            self.mark_gsmr(entry.k)
        elif entry.op == "perf":
            self.grant_performance(entry.user, entry.k, entry.t)
        elif entry.op == "crit":
            self.grant_critical(
                entry.user, entry.k, entry.t, entry.m, entry.preempt, emergency=entry.emergency
            )
        else:
            raise ValueError(f"unknown trace op {entry.op!r}")

    @classmethod
    def replay(cls, config: GridConfig, band: BandState, trace: Iterable[TraceEntry]) -> "ResourceGrid":
        g = cls(config, band)
        for e in trace:
            g.apply(e)
        return g

    # views ---------------------------------------------------------------
    def cells(self):
        """Yield (k, t, m, CellState) in canonical order."""
        c = self.config
        for k in range(c.num_prbs):
            for t in range(c.num_slots):
                for m in range(c.minislots):
                    yield k, t, m, self.cell(k, t, m)

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(owner, user, preempted_from) as K x T x M int arrays; -1 = none."""
        c = self.config
        shape = (c.num_prbs, c.num_slots, c.minislots)
        return (
            np.array(self._owner, dtype=np.int64).reshape(shape),
            np.array(self._user, dtype=np.int64).reshape(shape),
            np.array(self._pre, dtype=np.int64).reshape(shape),
        )

    def snapshot(self) -> tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]]:
        return tuple(self._owner), tuple(self._user), tuple(self._pre)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResourceGrid):
            return NotImplemented
        return self.config == other.config and self.snapshot() == other.snapshot()

    def performance_slots(self) -> dict[tuple[int, int], int]:
        """(k, t) -> user for every performance grant, preempted or not."""
        T = self.config.num_slots
        return {
            divmod(st, T): u for st, u in enumerate(self._slot_user) if u >= 0
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "t", "m", "owner", "user", "preempted_from"])
        for k, t, m, c in self.cells():
            w.writerow([
                k, t, m, c.owner.name.lower(),
                "" if c.user is None else c.user,
                "" if c.preempted_from is None else c.preempted_from,
            ])
        return buf.getvalue()

    def report(
        self,
        links: Mapping[int, LinkState],
        *,
        num_perf_users: int | None = None,
        num_critical_users: int | None = None,
    ) -> AllocationReport:
        return report(self, links, num_perf_users=num_perf_users,
                      num_critical_users=num_critical_users)


def report(
    grid: ResourceGrid,
    links: Mapping[int, LinkState],
    *,
    num_perf_users: int | None = None,
    num_critical_users: int | None = None,
) -> AllocationReport:
    """Delivered bits, objective terms and PRB reuse rate of a scheduled grid.

    A performance (PRB, slot) delivers ``(unpreempted / M)`` of its slot
    payload. User-set sizes default to ``len(links)`` (every user carries both
    traffic classes).
    """
    c = grid.config
    K, T, M = c.num_prbs, c.num_slots, c.minislots
    perf_bits = {u: 0.0 for u in links}
    crit_bits = {u: 0.0 for u in links}
    perf_slots = 0
    preempted_slots = 0
    crit_cells = 0
    z_slot = [False] * (T * M)
    owner, user = grid._owner, grid._user
    PERF, CRIT = Owner.PERFORMANCE, Owner.CRITICAL
    for k in range(K):
        for t in range(T):
            st = k * T + t
            pu = grid._slot_user[st]
            base = st * M
            if pu >= 0:
                perf_slots += 1
                npre = grid._npre[st]
                if npre:
                    preempted_slots += 1
                if pu in links:
                    perf_bits[pu] += (M - npre) / M * links[pu].slot_bits(c.slot_duration_ms)
            for m in range(M):
                o = owner[base + m]
                if o == PERF:
                    z_slot[t * M + m] = True
                elif o == CRIT:
                    crit_cells += 1
                    cu = user[base + m]
                    if cu in links:
                        crit_bits[cu] += links[cu].minislot_bits(M, c.slot_duration_ms)
    n_p = len(links) if num_perf_users is None else num_perf_users
    n_c = len(links) if num_critical_users is None else num_critical_users
    z_count = sum(z_slot)
    obj = Fraction(0)
    if n_p:
        obj += Fraction(perf_slots, T * K * n_p)
    if n_c:
        obj -= Fraction(crit_cells, T * M * K * n_c)
    obj -= Fraction(z_count, T * M)
    return AllocationReport(
        performance_bits=perf_bits,
        critical_bits=crit_bits,
        performance_prb_slots=perf_slots,
        critical_cells=crit_cells,
        performance_minislots=z_count,
        preempted_prb_slots=preempted_slots,
        reuse_rate=preempted_slots / perf_slots if perf_slots else 0.0,
        objective=obj,
    )


@dataclass(frozen=True)
class DumpRow:
    k: int
    t: int
    m: int
    owner: Owner
    user: int | None
    preempted_from: int | None


def read_grid_dump(text: str) -> list[DumpRow]:
    """Parse the CSV written by :meth:`ResourceGrid.to_csv`."""
    rows = []
    reader = csv.DictReader(io.StringIO(text))
    expected = ["k", "t", "m", "owner", "user", "preempted_from"]
    if reader.fieldnames != expected:
        raise ValueError(f"grid dump header must be {','.join(expected)}")
    for lineno, r in enumerate(reader, start=2):
        try:
            rows.append(DumpRow(
                int(r["k"]), int(r["t"]), int(r["m"]), Owner[r["owner"].upper()],
                int(r["user"]) if r["user"] else None,
                int(r["preempted_from"]) if r["preempted_from"] else None,
            ))
        except (KeyError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return rows
