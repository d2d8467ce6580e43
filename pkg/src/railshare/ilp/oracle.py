"""Exhaustive solver for tiny binary programs.

Assignments are enumerated in descending lexicographic order of the
variable list (first variable most significant, ones before zeros), a
block of variables at a time with numpy. Among equal optima the first one met wins, so ties resolve
toward granting resources. The objective is scaled to integers by the
common denominator of its coefficients, so comparisons are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import IlpError, IlpModel

DEFAULT_LIMIT = 24
BLOCK_BITS = 6
MAX_FRONTIER = 1 << 15
ROW_TOL = 1e-9


class OracleLimitError(IlpError):
    pass


@dataclass(frozen=True)
class OracleSolution:
    assignment: dict[str, int]
    objective: Fraction | None
    feasible: bool
    enumerated: int
    fixed: int = 0

    def value(self, name: str) -> int:
        return self.assignment[name]


def _single_ok(lhs: float, sense: str, rhs: float) -> bool:
    slack = ROW_TOL * max(1.0, abs(rhs))
    if sense == "<=":
        return lhs <= rhs + slack
    if sense == ">=":
        return lhs >= rhs - slack
    return abs(lhs - rhs) <= slack


def _presolve(model: IlpModel) -> tuple[dict[int, int], bool]:
    """Values forced by single-variable rows; second item False if infeasible."""
    fixed: dict[int, int] = {}
    for r in model.rows:
        if len(r.terms) != 1:
            continue
        (j, c), = r.terms
        allowed = {v for v in (0, 1) if _single_ok(c * v, r.sense, r.rhs)}
        if not allowed:
            return fixed, False
        if len(allowed) == 1:
            (v,) = allowed
            if fixed.get(j, v) != v:
                return fixed, False
            fixed[j] = v
    return fixed, True


def _dense(model: IlpModel):
    n, R = len(model.variables), len(model.rows)
    A = np.zeros((R, n))
    lo = np.full(R, -np.inf)
    hi = np.full(R, np.inf)
    for r_i, r in enumerate(model.rows):
        for j, c in r.terms:
            A[r_i, j] += c
        slack = ROW_TOL * max(1.0, abs(r.rhs))
        if r.sense in ("<=", "="):
            hi[r_i] = r.rhs + slack
        if r.sense in (">=", "="):
            lo[r_i] = r.rhs - slack
    return A, lo, hi


def _scaled_objective(model: IlpModel) -> tuple[np.ndarray, int]:
    coefs = [Fraction(c) for c in model.objective.values()]
    den = math.lcm(*(c.denominator for c in coefs)) if coefs else 1
    w = np.zeros(len(model.variables), dtype=np.int64)
    for j, c in model.objective.items():
        w[j] = int(Fraction(c) * den)
    return w, den


class _Search:
    """Blockwise enumeration in descending lexicographic order.

    A subtree is skipped only when interval bounds on the unassigned
    variables prove every completion infeasible or no better than the
    incumbent, so the result equals plain enumeration of every assignment.
    """

    def __init__(self, A, lo, hi, w):
        self.A, self.lo, self.hi, self.w = A, lo, hi, w
        R, n = A.shape
        self.n = n
        neg, pos = np.minimum(A, 0.0), np.maximum(A, 0.0)
        # bounds contributed by variables p.. (index p = first unassigned)
        self.rest_min = np.zeros((n + 1, R))
        self.rest_max = np.zeros((n + 1, R))
        self.w_rest = np.zeros(n + 1, dtype=np.int64)
        for p in range(n - 1, -1, -1):
            self.rest_min[p] = self.rest_min[p + 1] + neg[:, p]
            self.rest_max[p] = self.rest_max[p + 1] + pos[:, p]
            self.w_rest[p] = self.w_rest[p + 1] + max(int(w[p]), 0)
        self.best_val: int | None = None
        self.best_bits: np.ndarray | None = None
        self.evaluated = 0

    def run(self, p: int, bits: np.ndarray, act: np.ndarray, obj: np.ndarray) -> None:
        if p == self.n:
            self.evaluated += len(obj)
            i = int(np.argmax(obj))  # first maximum in enumeration order
            if self.best_val is None or obj[i] > self.best_val:
                self.best_val, self.best_bits = int(obj[i]), bits[i].copy()
            return
        b = min(BLOCK_BITS, self.n - p)
        width = 1 << b
        if len(obj) * width > MAX_FRONTIER and len(obj) > 1:
            step = max(1, MAX_FRONTIER // width)
            for s in range(0, len(obj), step):
                self.run(p, bits[s:s + step], act[s:s + step], obj[s:s + step])
            return
        vals = np.arange(width - 1, -1, -1, dtype=np.int64)
        block = ((vals[:, None] >> np.arange(b - 1, -1, -1)) & 1).astype(np.int8)
        q = p + b
        N = len(obj)
        new_bits = np.concatenate([np.repeat(bits, width, axis=0), np.tile(block, (N, 1))], axis=1)
        new_act = np.repeat(act, width, axis=0) + np.tile(block @ self.A[:, p:q].T, (N, 1))
        new_obj = np.repeat(obj, width) + np.tile(block.astype(np.int64) @ self.w[p:q], N)
        keep = np.all(new_act + self.rest_min[q] <= self.hi, axis=1)
        keep &= np.all(new_act + self.rest_max[q] >= self.lo, axis=1)
        if self.best_val is not None:
            keep &= new_obj + self.w_rest[q] > self.best_val
        if keep.any():
            self.run(q, new_bits[keep], new_act[keep], new_obj[keep])


def solve_exhaustive(model: IlpModel, limit: int = DEFAULT_LIMIT) -> OracleSolution:
    n = model.num_binaries
    if n > limit:
        raise OracleLimitError(
            f"model {model.name} has {n} binaries; exhaustive search is capped at {limit}"
        )
    fixed, ok = _presolve(model)
    if not ok:
        return OracleSolution({}, None, False, 0, len(fixed))
    free = [j for j in range(n) if j not in fixed]
    A, lo, hi = _dense(model)
    w, den = _scaled_objective(model)

    base = np.zeros(n)
    for j, v in fixed.items():
        base[j] = v
    # fold fixed columns into the bounds
    shift = A @ base
    w_base = int(w @ base.astype(np.int64))

    search = _Search(A[:, free], lo - shift, hi - shift, w[free])
    R = A.shape[0]
    search.run(0, np.zeros((1, 0), dtype=np.int8), np.zeros((1, R)), np.zeros(1, dtype=np.int64))
    if search.best_val is None:
        return OracleSolution({}, None, False, search.evaluated, len(fixed))
    values = [0] * n
    for j, v in fixed.items():
        values[j] = v
    for p, j in enumerate(free):
        values[j] = int(search.best_bits[p])
    assignment = dict(zip(model.variables, values))
    objective = Fraction(search.best_val + w_base, den)
    return OracleSolution(assignment, objective, True, search.evaluated, len(fixed))
