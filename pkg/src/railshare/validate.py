"""Executable checks for the allocation constraints.

The checks walk cell contents directly and never trust the grid's own
counters, so they also work on grids read back from a CSV dump.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .band_plan import BandState
from .channel import LinkState
from .grid import DumpRow, Owner, ResourceGrid
from .schedulers import SchedulerOutcome


@dataclass(frozen=True)
class Violation:
    rule: str
    cell: tuple[int, ...]
    detail: str

    def __str__(self) -> str:
        return f"[{self.rule}] cell {self.cell}: {self.detail}"


class ConstraintViolation(AssertionError):
    def __init__(self, violations: list[Violation]):
        self.violations = violations
        head = "; ".join(str(v) for v in violations[:5])
        more = f" (+{len(violations) - 5} more)" if len(violations) > 5 else ""
        super().__init__(head + more)


def _emit(out: list[Violation], rule: str, mask: np.ndarray, detail: str) -> None:
    for idx in zip(*np.nonzero(mask)):
        out.append(Violation(rule, tuple(int(i) for i in idx), detail))


def check_arrays(
    owner: np.ndarray,
    user: np.ndarray,
    pre: np.ndarray,
    band: BandState | None = None,
) -> list[Violation]:
    """Constraints (a)-(d) on K x T x M cell arrays (-1 = no user)."""
    K, T, M = owner.shape
    out: list[Violation] = []
    P, C, G, F = Owner.PERFORMANCE, Owner.CRITICAL, Owner.GSMR, Owner.FREE
    _emit(out, "preemption", (pre >= 0) & (owner != C), "preempted_from set on non-critical cell")
    traffic = (owner == P) | (owner == C)
    _emit(out, "single-owner", traffic & (user < 0), "traffic cell without user")
    _emit(out, "single-owner", ~traffic & (user >= 0), "user on a non-traffic cell")
    gsmr_cells = (owner == G).sum(axis=(1, 2))
    if band is not None:
        if band.num_prbs != K:
            out.append(Violation("shape", (), f"band has {band.num_prbs} PRBs, grid has {K}"))
            return out
        col = np.array(band.colliding, dtype=bool)[:, None, None]
        occ = np.array(band.occupied, dtype=bool)[:, None, None]
        res = np.array(band.reserved, dtype=bool)[:, None, None]
        _emit(out, "reserved", res & (owner != F), "allocation on a control PRB")
        _emit(out, "c", (owner == P) & occ, "performance traffic on a GSM-R-occupied PRB")
        _emit(out, "d", (owner == C) & col, "critical traffic on a colliding PRB")
        _emit(out, "gsmr", (owner == G) & ~occ, "GSM-R cell on a PRB with b_k = 0")
        for k in sorted(band.occupied_set):
            if gsmr_cells[k] != T * M:
                out.append(Violation("gsmr", (k,), "occupied PRB not tagged for GSM-R"))

    # (a): one performance user per PRB-slot, granted for the whole slot
    perf_id = np.where(owner == P, user, pre)
    has = perf_id >= 0
    slot_has = has.any(axis=2)
    hi = np.where(has, perf_id, -1).max(axis=2)
    lo = np.where(has, perf_id, np.iinfo(np.int64).max).min(axis=2)
    multi = slot_has & (hi != lo)
    for k, t in zip(*np.nonzero(multi)):
        users = sorted({int(u) for u in perf_id[k, t] if u >= 0})
        out.append(Violation("a", (int(k), int(t)), f"performance users {users} share a PRB-slot"))
    gap = (slot_has & ~multi)[..., None] & ~has
    _emit(out, "preemption", gap & (owner == C), "critical cell in a performance slot without preempted_from")
    _emit(out, "a", gap & (owner != C), "performance grant does not cover the whole slot")

    for k in np.nonzero((gsmr_cells > 0) & (gsmr_cells != T * M))[0]:
        out.append(Violation("gsmr", (int(k),), "GSM-R tagging must cover the whole period"))
    return out


def check_cells(
    rows: Iterable[DumpRow],
    shape: tuple[int, int, int],
    band: BandState | None = None,
) -> list[Violation]:
    """Structural checks on a cell table, then :func:`check_arrays`."""
    K, T, M = shape
    out: list[Violation] = []
    owner = np.zeros(shape, dtype=np.int64)
    user = np.full(shape, -1, dtype=np.int64)
    pre = np.full(shape, -1, dtype=np.int64)
    seen = np.zeros(shape, dtype=bool)
    for r in rows:
        key = (r.k, r.t, r.m)
        if not (0 <= r.k < K and 0 <= r.t < T and 0 <= r.m < M):
            out.append(Violation("shape", key, "cell outside grid"))
            continue
        if seen[key]:
            out.append(Violation("single-owner", key, "cell listed twice"))
            continue
        seen[key] = True
        owner[key] = int(r.owner)
        user[key] = -1 if r.user is None else r.user
        pre[key] = -1 if r.preempted_from is None else r.preempted_from
    n = int(seen.sum())
    if n != K * T * M:
        out.append(Violation("shape", (), f"{n} cells listed, expected {K * T * M}"))
    return out + check_arrays(owner, user, pre, band)


def check_grid(grid: ResourceGrid) -> list[Violation]:
    return check_arrays(*grid.arrays(), grid.band)


def check_outcome(outcome: SchedulerOutcome, links: Mapping[int, LinkState]) -> list[Violation]:
    """Grid constraints plus the deadline rule and the preemption allowance."""
    grid = outcome.grid
    owner, user, pre = grid.arrays()
    out = check_arrays(owner, user, pre, grid.band)
    M = grid.config.minislots
    owner_l, user_l = owner.tolist(), user.tolist()
    crit = Owner.CRITICAL
    claimed: dict[tuple[int, int, int], int] = {}
    for pl in outcome.served:
        p = pl.packet
        link = links.get(p.user)
        n = link.minislots_needed(p.size, M) if link else None
        if n is None or len(pl.cells) != n:
            out.append(Violation("size", (p.seq,), f"packet got {len(pl.cells)} mini-slots, needs {n}"))
        for cell in pl.cells:
            k, t, m = cell
            tick = outcome.frame_start + t * M + m
            if not p.arrival_tick <= tick < p.deadline_tick:
                out.append(Violation(
                    "deadline", cell,
                    f"packet {p.seq} window [{p.arrival_tick}, {p.deadline_tick}) misses tick {tick}",
                ))
            if owner_l[k][t][m] != crit or user_l[k][t][m] != p.user:
                out.append(Violation("placement", cell, f"packet {p.seq} not on its cell"))
            if cell in claimed:
                out.append(Violation("b", cell, f"packets {claimed[cell]} and {p.seq} share a cell"))
            claimed[cell] = p.seq
    n_crit = int((owner == crit).sum())
    if n_crit != len(claimed):
        out.append(Violation("placement", (), f"{n_crit} critical cells, {len(claimed)} claimed by packets"))
    served = {pl.packet.seq for pl in outcome.served}
    for p in outcome.dropped:
        if p.seq in served:
            out.append(Violation("deadline", (p.seq,), "dropped packet was also served"))
    # raw trace tuples: (op, k, t, m, user, preempt, emergency)
    crit_ops = [e for e in grid._trace if e[0] == "crit"]
    if outcome.allowance is not None:
        normal = Counter((e[1], e[2]) for e in crit_ops if e[5] and not e[6])
        for (k, t), n in normal.items():
            if n > outcome.allowance:
                out.append(Violation("PA", (k, t), f"{n} regular preemptions exceed allowance {outcome.allowance}"))
    if outcome.algorithm == "bcqi" and any(e[5] for e in crit_ops):
        out.append(Violation("bcqi", (), "BCQI must never preempt"))
    return out


def assert_valid(outcome: SchedulerOutcome, links: Mapping[int, LinkState]) -> None:
    v = check_outcome(outcome, links)
    if v:
        raise ConstraintViolation(v)
