"""Glue between scheduler output and the binary program."""

from __future__ import annotations

from typing import Mapping, Sequence

from ..band_plan import BandState
from ..channel import LinkState, required_prbs
from ..grid import GridConfig, Owner, ResourceGrid
from ..schedulers import SchedulerOutcome
from .model import IlpError, IlpScenario


def slot_gamma(link: LinkState, config: GridConfig) -> float:
    """Shannon bits one PRB carries over one slot."""
    return link.per_prb_rate * config.slot_duration_ms * 1e-3


def ilp_scenario(
    config: GridConfig,
    band: BandState,
    links: Mapping[int, LinkState],
    th_perf: Mapping[int, float],
    th_crit: Mapping[int, float],
    *,
    deadline_minislots: int = 35,
    perf_users: Sequence[int] | None = None,
    crit_users: Sequence[int] | None = None,
    name: str = "scenario",
) -> IlpScenario:
    perf_users = sorted(links) if perf_users is None else sorted(perf_users)
    crit_users = sorted(links) if crit_users is None else sorted(crit_users)
    K = config.num_prbs
    gamma = {u: (slot_gamma(links[u], config),) * K for u in set(perf_users) | set(crit_users)}
    return IlpScenario(
        perf_users=tuple(perf_users),
        crit_users=tuple(crit_users),
        num_prbs=K,
        num_slots=config.num_slots,
        minislots=config.minislots,
        colliding=tuple(band.colliding),
        occupied=tuple(band.occupied),
        gamma=gamma,
        th_perf={u: float(th_perf.get(u, 0.0)) for u in perf_users},
        th_crit={u: float(th_crit.get(u, 0.0)) for u in crit_users},
        deadline_minislots=deadline_minislots,
        name=name,
    )


def scenario_from_outcome(
    outcome: SchedulerOutcome,
    links: Mapping[int, LinkState],
    *,
    perf_target: float = 10e6,
    deadline_minislots: int = 35,
    name: str = "tiny",
) -> IlpScenario:
    """Scenario whose demands the given schedule meets.

    TH_perf caps each user at ``required_prbs`` grants per slot; TH_crit is
    the critical-throughput row evaluated on the schedule itself.
    """
    grid = outcome.grid
    c = grid.config
    th_perf = {}
    for u, link in links.items():
        rb = required_prbs(perf_target, link.efficiency) or 0
        th_perf[u] = rb * c.num_slots * slot_gamma(link, c)
    cells: dict[int, int] = {u: 0 for u in links}
    for k, t, m, cs in grid.cells():
        if cs.owner == Owner.CRITICAL:
            cells[cs.user] = cells.get(cs.user, 0) + 1
    th_crit = {u: n * slot_gamma(links[u], c) for u, n in cells.items()}
    return ilp_scenario(
        c, grid.band, links, th_perf, th_crit,
        deadline_minislots=deadline_minislots, name=name,
    )


def assignment_from_grid(
    grid: ResourceGrid,
    perf_users: Sequence[int],
    crit_users: Sequence[int],
    preemption: bool = True,
) -> dict[str, int]:
    """Binary values induced by an allocation, for every model variable."""
    c = grid.config
    K, T, M = c.num_prbs, c.num_slots, c.minislots
    Up, Uc = sorted(perf_users), sorted(crit_users)
    out: dict[str, int] = {}
    x = {(i, k, t): 0 for i in Up for k in range(K) for t in range(T)}
    y = {(i, k, m, t): 0 for i in Uc for k in range(K) for t in range(T) for m in range(M)}
    for k in range(K):
        for t in range(T):
            u = grid.slot_user(k, t)
            if u is None:
                continue
            if (u, k, t) not in x:
                raise IlpError(f"PRB-slot ({k}, {t}) granted to {u}, not a performance user")
            x[(u, k, t)] = 1
    for k, t, m, cs in grid.cells():
        if cs.owner == Owner.CRITICAL:
            if (cs.user, k, m, t) not in y:
                raise IlpError(f"cell ({k}, {t}, {m}) granted to {cs.user}, not a critical user")
            y[(cs.user, k, m, t)] = 1
    zc = {}
    for k in range(K):
        for t in range(T):
            for m in range(M):
                has_x = any(x[(i, k, t)] for i in Up)
                has_y = any(y[(j, k, m, t)] for j in Uc)
                zc[(k, m, t)] = int(has_x and not has_y)
    for (i, k, t), v in x.items():
        out[f"x_{i}_{k}_{t}"] = v
    for (i, k, m, t), v in y.items():
        out[f"y_{i}_{k}_{m}_{t}"] = v
    if preemption:
        for i in Up:
            for k in range(K):
                for t in range(T):
                    for m in range(M):
                        out[f"f_{i}_{k}_{m}_{t}"] = zc[(k, m, t)] * x[(i, k, t)]
    for (k, m, t), v in zc.items():
        out[f"zc_{k}_{m}_{t}"] = v
    for t in range(T):
        for m in range(M):
            out[f"zs_{m}_{t}"] = int(any(zc[(k, m, t)] for k in range(K)))
    return out
