"""Binary program for one scheduling period, with and without preemption.

Variables, in export order:

- ``x_i_k_t``    performance user i holds PRB k in slot t
- ``y_i_k_m_t``  critical user i holds PRB k in mini-slot m of slot t
- ``f_i_k_m_t``  product zc * x (preemption variant only)
- ``zc_k_m_t``   PRB k carries only performance traffic in (m, t)
- ``zs_m_t``     the cell carries performance traffic somewhere in (m, t)

Rows are tagged with the rule they encode:

- a, b      one performance user per PRB-slot, one critical user per cell
- c, d      no performance on occupied PRBs, no critical on colliding PRBs
- e1..e4    linearized performance cap (preemption); ``e`` without preemption
- f         critical throughput floor
- g         per-PRB mini-slot budget D
- h         orthogonality of performance and critical grants (no preemption)
- lz1..lz3  zc = 1 iff some x is set and no y is set on that cell
- ls1, ls2  zs = OR over k of zc

Throughputs are bits per slot on one PRB, i.e. rate [bit/s] x slot length,
in every row that uses them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

RULES = ("a", "b", "c", "d", "e1", "e2", "e3", "e4", "e", "f", "g", "h",
         "lz1", "lz2", "lz3", "ls1", "ls2")


class IlpError(ValueError):
    pass


@dataclass(frozen=True)
class IlpScenario:
    """Everything the model needs; users are identified by small ints."""

    perf_users: tuple[int, ...]
    crit_users: tuple[int, ...]
    num_prbs: int
    num_slots: int
    minislots: int
    colliding: tuple[bool, ...]
    occupied: tuple[bool, ...]
    # bits per slot per PRB, one entry per PRB for each user
    gamma: Mapping[int, tuple[float, ...]]
    th_perf: Mapping[int, float]
    th_crit: Mapping[int, float]
    deadline_minislots: int = 35
    name: str = "scenario"

    def __post_init__(self):
        K = self.num_prbs
        if min(K, self.num_slots, self.minislots) < 1:
            raise IlpError("K, T and M must be >= 1")
        if len(self.colliding) != K or len(self.occupied) != K:
            raise IlpError(f"a_k and b_k need {K} entries")
        for k in range(K):
            if self.occupied[k] and not self.colliding[k]:
                raise IlpError(f"PRB {k}: b_k = 1 requires a_k = 1")
        for group, name in ((self.perf_users, "perf_users"), (self.crit_users, "crit_users")):
            if len(set(group)) != len(group):
                raise IlpError(f"{name} has duplicates")
            if any(u < 0 for u in group):
                raise IlpError(f"{name} ids must be >= 0")
        for u in set(self.perf_users) | set(self.crit_users):
            g = self.gamma.get(u)
            if g is None or len(g) != K:
                raise IlpError(f"user {u}: gamma needs {K} per-PRB values")
            if any(v < 0 or not math.isfinite(v) for v in g):
                raise IlpError(f"user {u}: gamma must be finite and >= 0")
        for u in self.perf_users:
            if u not in self.th_perf:
                raise IlpError(f"user {u}: missing th_perf")
        for u in self.crit_users:
            if u not in self.th_crit:
                raise IlpError(f"user {u}: missing th_crit")
        if self.deadline_minislots < 0:
            raise IlpError("deadline must be >= 0 mini-slots")

    @classmethod
    def uniform(
        cls,
        perf_users: Sequence[int],
        crit_users: Sequence[int],
        shape: tuple[int, int, int],
        colliding: Sequence[int] = (),
        occupied: Sequence[int] = (),
        gamma: float | Mapping[int, float] = 1.0,
        th_perf: float | Mapping[int, float] = 0.0,
        th_crit: float | Mapping[int, float] = 0.0,
        deadline_minislots: int = 35,
        name: str = "scenario",
    ) -> "IlpScenario":
        """Convenience constructor: PRB index sets and per-user scalars."""
        K, T, M = shape
        users = sorted(set(perf_users) | set(crit_users))

        def per_user(v):
            return {u: float(v[u] if isinstance(v, Mapping) else v) for u in users}

        g = per_user(gamma)
        return cls(
            perf_users=tuple(perf_users),
            crit_users=tuple(crit_users),
            num_prbs=K,
            num_slots=T,
            minislots=M,
            colliding=tuple(k in set(colliding) for k in range(K)),
            occupied=tuple(k in set(occupied) for k in range(K)),
            gamma={u: (g[u],) * K for u in users},
            th_perf={u: v for u, v in per_user(th_perf).items() if u in perf_users},
            th_crit={u: v for u, v in per_user(th_crit).items() if u in crit_users},
            deadline_minislots=deadline_minislots,
            name=name,
        )


@dataclass(frozen=True)
class Row:
    name: str
    rule: str
    terms: tuple[tuple[int, float], ...]  # (variable index, coefficient)
    sense: str  # "<=", ">=" or "="
    rhs: float

    def activity(self, values: Sequence[int]) -> float:
        return sum(c * values[j] for j, c in self.terms)

    def satisfied(self, values: Sequence[int], tol: float = 1e-9) -> bool:
        lhs = self.activity(values)
        slack = tol * max(1.0, abs(self.rhs))
        if self.sense == "<=":
            return lhs <= self.rhs + slack
        if self.sense == ">=":
            return lhs >= self.rhs - slack
        return abs(lhs - self.rhs) <= slack


@dataclass
class IlpModel:
    name: str
    preemption: bool
    variables: list[str]
    objective: dict[int, Fraction]
    rows: list[Row] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.index:
            self.index = {v: j for j, v in enumerate(self.variables)}

    @property
    def num_binaries(self) -> int:
        return len(self.variables)

    def count(self, prefix: str) -> int:
        """Variables of one family, e.g. ``count("x")``."""
        return sum(1 for v in self.variables if v.split("_", 1)[0] == prefix)

    def rows_of(self, rule: str) -> list[Row]:
        return [r for r in self.rows if r.rule == rule]

    def vector(self, assignment: Mapping[str, int]) -> list[int]:
        unknown = set(assignment) - set(self.index)
        if unknown:
            raise IlpError(f"unknown variables: {sorted(unknown)[:5]}")
        out = [0] * len(self.variables)
        for name, v in assignment.items():
            if v not in (0, 1):
                raise IlpError(f"{name} = {v!r} is not binary")
            out[self.index[name]] = int(v)
        return out

    def objective_value(self, assignment: Mapping[str, int] | Sequence[int]) -> Fraction:
        vals = self.vector(assignment) if isinstance(assignment, Mapping) else assignment
        return sum((c * vals[j] for j, c in self.objective.items()), Fraction(0))

    def violated(self, assignment: Mapping[str, int] | Sequence[int], tol: float = 1e-9) -> list[Row]:
        vals = self.vector(assignment) if isinstance(assignment, Mapping) else assignment
        return [r for r in self.rows if not r.satisfied(vals, tol)]

    def is_feasible(self, assignment, tol: float = 1e-9) -> bool:
        return not self.violated(assignment, tol)


class _Builder:
    def __init__(self, sc: IlpScenario, preemption: bool):
        self.sc = sc
        self.preemption = preemption
        self.variables: list[str] = []
        self.index: dict[str, int] = {}
        self.rows: list[Row] = []

    def var(self, name: str) -> None:
        self.index[name] = len(self.variables)
        self.variables.append(name)

    def row(self, name: str, rule: str, terms, sense: str, rhs: float) -> None:
        merged: dict[int, float] = {}
        for v, c in terms:
            j = self.index[v]
            merged[j] = merged.get(j, 0.0) + c
        self.rows.append(Row(name, rule, tuple(merged.items()), sense, float(rhs)))


def _x(i, k, t):
    return f"x_{i}_{k}_{t}"


def _y(i, k, m, t):
    return f"y_{i}_{k}_{m}_{t}"


def _f(i, k, m, t):
    return f"f_{i}_{k}_{m}_{t}"


def _zc(k, m, t):
    return f"zc_{k}_{m}_{t}"


def _zs(m, t):
    return f"zs_{m}_{t}"


def build_model(sc: IlpScenario, preemption: bool = True) -> IlpModel:
    Up, Uc = sorted(sc.perf_users), sorted(sc.crit_users)
    K, T, M = sc.num_prbs, sc.num_slots, sc.minislots
    Ks, Ts, Ms = range(K), range(T), range(M)
    b = _Builder(sc, preemption)

    for i in Up:
        for k in Ks:
            for t in Ts:
                b.var(_x(i, k, t))
    for i in Uc:
        for k in Ks:
            for t in Ts:
                for m in Ms:
                    b.var(_y(i, k, m, t))
    if preemption:
        for i in Up:
            for k in Ks:
                for t in Ts:
                    for m in Ms:
                        b.var(_f(i, k, m, t))
    for k in Ks:
        for t in Ts:
            for m in Ms:
                b.var(_zc(k, m, t))
    for t in Ts:
        for m in Ms:
            b.var(_zs(m, t))

    objective: dict[int, Fraction] = {}
    if Up:
        w = Fraction(1, T * K * len(Up))
        for i in Up:
            for k in Ks:
                for t in Ts:
                    objective[b.index[_x(i, k, t)]] = w
    if Uc:
        w = -Fraction(1, T * M * K * len(Uc))
        for i in Uc:
            for k in Ks:
                for t in Ts:
                    for m in Ms:
                        objective[b.index[_y(i, k, m, t)]] = w
    w = -Fraction(1, T * M)
    for t in Ts:
        for m in Ms:
            objective[b.index[_zs(m, t)]] = w

    # (a) one performance user per PRB-slot
    if Up:
        for k in Ks:
            for t in Ts:
                b.row(f"a_{k}_{t}", "a", [(_x(i, k, t), 1.0) for i in Up], "<=", 1)
    # (b) one critical user per cell
    if Uc:
        for k in Ks:
            for t in Ts:
                for m in Ms:
                    b.row(f"b_{k}_{m}_{t}", "b", [(_y(i, k, m, t), 1.0) for i in Uc], "<=", 1)
    # (c) x <= 1 - b_k, for all t
    for i in Up:
        for k in Ks:
            for t in Ts:
                b.row(f"c_{i}_{k}_{t}", "c", [(_x(i, k, t), 1.0)], "<=", 1 - int(sc.occupied[k]))
    # (d) y <= 1 - a_k
    for i in Uc:
        for k in Ks:
            for t in Ts:
                for m in Ms:
                    b.row(f"d_{i}_{k}_{m}_{t}", "d", [(_y(i, k, m, t), 1.0)], "<=", 1 - int(sc.colliding[k]))
    # (e) performance cap
    if preemption:
        for i in Up:
            g = sc.gamma[i]
            terms = [(_f(i, k, m, t), g[k]) for k in Ks for t in Ts for m in Ms]
            b.row(f"e1_{i}", "e1", terms, "<=", M * sc.th_perf[i])
        for i in Up:
            for k in Ks:
                for t in Ts:
                    for m in Ms:
                        b.row(f"e2_{i}_{k}_{m}_{t}", "e2", [(_f(i, k, m, t), 1.0), (_zc(k, m, t), -1.0)], "<=", 0)
        for i in Up:
            for k in Ks:
                for t in Ts:
                    for m in Ms:
                        b.row(f"e3_{i}_{k}_{m}_{t}", "e3", [(_f(i, k, m, t), 1.0), (_x(i, k, t), -1.0)], "<=", 0)
        for i in Up:
            for k in Ks:
                for t in Ts:
                    for m in Ms:
                        b.row(
                            f"e4_{i}_{k}_{m}_{t}", "e4",
                            [(_f(i, k, m, t), 1.0), (_zc(k, m, t), -1.0), (_x(i, k, t), -1.0)],
                            ">=", -1,
                        )
    else:
        # with (h) no cell is shared, so zc * x = x and (e) is already linear
        for i in Up:
            g = sc.gamma[i]
            terms = [(_x(i, k, t), g[k]) for k in Ks for t in Ts]
            b.row(f"e_{i}", "e", terms, "<=", sc.th_perf[i])
    # (f) critical throughput floor
    for i in Uc:
        g = sc.gamma[i]
        terms = [(_y(i, k, m, t), g[k]) for k in Ks for t in Ts for m in Ms]
        b.row(f"f_{i}", "f", terms, ">=", sc.th_crit[i])
    # (g) per-PRB mini-slot budget, D counted in mini-slots
    for i in Uc:
        for k in Ks:
            terms = [(_y(i, k, m, t), 1.0) for t in Ts for m in Ms]
            b.row(f"g_{i}_{k}", "g", terms, "<=", sc.deadline_minislots)
    # (h) orthogonal grants, every performance/critical user pair
    if not preemption:
        for i in Up:
            for j in Uc:
                for k in Ks:
                    for t in Ts:
                        for m in Ms:
                            b.row(
                                f"h_{i}_{j}_{k}_{m}_{t}", "h",
                                [(_x(i, k, t), 1.0), (_y(j, k, m, t), 1.0)], "<=", 1,
                            )
    # zc = 1 iff some x on (k, t) and no y on (k, m, t)
    for k in Ks:
        for t in Ts:
            for m in Ms:
                ys = [(_y(j, k, m, t), 1.0) for j in Uc]
                for i in Up:
                    terms = [(_zc(k, m, t), 1.0), (_x(i, k, t), -1.0)] + ys
                    b.row(f"lz1_{i}_{k}_{m}_{t}", "lz1", terms, ">=", 0)
    for k in Ks:
        for t in Ts:
            for m in Ms:
                b.row(f"lz2_{k}_{m}_{t}", "lz2", [(_zc(k, m, t), 1.0)] + [(_x(i, k, t), -1.0) for i in Up], "<=", 0)
    for k in Ks:
        for t in Ts:
            for m in Ms:
                for j in Uc:
                    b.row(f"lz3_{j}_{k}_{m}_{t}", "lz3", [(_zc(k, m, t), 1.0), (_y(j, k, m, t), 1.0)], "<=", 1)
    # zs = OR_k zc
    for t in Ts:
        for m in Ms:
            for k in Ks:
                b.row(f"ls1_{k}_{m}_{t}", "ls1", [(_zs(m, t), 1.0), (_zc(k, m, t), -1.0)], ">=", 0)
    for t in Ts:
        for m in Ms:
            b.row(f"ls2_{m}_{t}", "ls2", [(_zs(m, t), 1.0)] + [(_zc(k, m, t), -1.0) for k in Ks], "<=", 0)

    return IlpModel(sc.name, preemption, b.variables, objective, b.rows, b.index)


def expected_counts(sc: IlpScenario, preemption: bool) -> dict[str, int]:
    """Closed-form variable counts per family."""
    K, T, M = sc.num_prbs, sc.num_slots, sc.minislots
    up, uc = len(sc.perf_users), len(sc.crit_users)
    return {
        "x": up * K * T,
        "y": uc * K * T * M,
        "f": up * K * T * M if preemption else 0,
        "zc": K * M * T,
        "zs": M * T,
    }
