"""CPLEX-style LP text export and a small parser for round-trip checks.

Only the subset we emit is understood: one objective, linear rows with a
constant right-hand side, a ``Binary`` section. Coefficients are written
with 12 significant digits; output depends only on the model.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, TextIO

from .model import IlpError, IlpModel, Row

LINE_WIDTH = 78
# objective normalizers are small integers, so this recovers them exactly
_MAX_DENOMINATOR = 10**7

_SECTION = re.compile(r"^\s*(maximize|maximum|max|minimize|minimum|min|subject to|such that|st|s\.t\.|binary|binaries|bin|end)\s*$", re.I)
_SENSES = ("<=", ">=", "=<", "=>", "=")


class LpParseError(IlpError):
    pass


def _num(c: float) -> str:
    return format(c, ".12g")


def _expr(terms: Iterable[tuple[str, float]]) -> list[str]:
    out = []
    for n, (name, c) in enumerate(terms):
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        body = name if mag == 1 else f"{_num(mag)} {name}"
        if n == 0:
            out.append(body if sign == "+" else f"- {body}")
        else:
            out.append(f"{sign} {body}")
    return out or ["0"]


def _wrap(head: str, pieces: list[str]) -> list[str]:
    lines, cur = [], head
    for p in pieces:
        if len(cur) + 1 + len(p) > LINE_WIDTH and cur.strip():
            lines.append(cur)
            cur = "   " + p
        else:
            cur = f"{cur} {p}" if cur else p
    lines.append(cur)
    return lines


def export_lp(model: IlpModel) -> str:
    names = model.variables
    lines = [
        f"\\ model {model.name} preemption={'yes' if model.preemption else 'no'}",
        f"\\ binaries {len(names)} rows {len(model.rows)}",
        "Maximize",
    ]
    obj = [(names[j], float(c)) for j, c in sorted(model.objective.items())]
    lines += _wrap(" obj:", _expr(obj))
    lines.append("Subject To")
    for r in model.rows:
        terms = [(names[j], c) for j, c in r.terms]
        lines += _wrap(f" {r.name}:", _expr(terms) + [r.sense, _num(r.rhs)])
    lines.append("Binary")
    lines += _wrap("", names)
    lines.append("End")
    return "\n".join(lines) + "\n"


def write_lp(model: IlpModel, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps bytes identical across platforms
    with open(path, "w", newline="") as fh:
        fh.write(export_lp(model))
    return path


@dataclass
class ParsedLp:
    sense: str
    objective: dict[str, float]
    rows: list[tuple[str, dict[str, float], str, float]] = field(default_factory=list)
    binaries: list[str] = field(default_factory=list)
    comments: list[str] = field(default_factory=list)


def _parse_terms(tokens: list[str], where: str) -> dict[str, float]:
    out: dict[str, float] = {}
    sign, coef = 1.0, None
    for tok in tokens:
        if tok in "+-":
            sign = -1.0 if tok == "-" else 1.0
            continue
        try:
            coef = float(tok)
            continue
        except ValueError:
            pass
        c = sign * (1.0 if coef is None else coef)
        out[tok] = out.get(tok, 0.0) + c
        sign, coef = 1.0, None
    if coef is not None and not out:
        # a bare constant such as "0"
        return {}
    if coef is not None:
        raise LpParseError(f"{where}: dangling coefficient {coef}")
    return out


def _tokens(text: str) -> list[str]:
    return re.findall(r"<=|>=|=<|=>|=|[+-]|[^\s+<>=-][^\s<>=+]*(?:[eE][+-]\d+)?", text)


def parse_lp(text: str) -> ParsedLp:
    section = None
    sense = ""
    comments: list[str] = []
    chunks: dict[str, list[str]] = {"obj": [], "st": [], "bin": []}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("\\", 1)
        if len(line) == 2:
            comments.append(line[1].strip())
        line = line[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            word = m.group(1).lower()
            if word.startswith("max"):
                section, sense = "obj", "max"
            elif word.startswith("min"):
                section, sense = "obj", "min"
            elif word.startswith("bin"):
                section = "bin"
            elif word == "end":
                section = "end"
            else:
                section = "st"
            continue
        if section in (None, "end"):
            raise LpParseError(f"line {lineno}: text outside any section: {line!r}")
        chunks[section].append(line)
    if not sense:
        raise LpParseError("no objective section")

    obj_text = " ".join(chunks["obj"])
    obj_text = re.sub(r"^\s*[^\s:]+:", "", obj_text)
    objective = _parse_terms(_tokens(obj_text), "objective")

    rows = []
    st_text = " ".join(chunks["st"])
    parts = re.split(r"(?:^|\s)([A-Za-z_][\w.\[\]]*):", st_text)
    # parts = [prefix, name1, body1, name2, body2, ...]
    if parts[0].strip():
        raise LpParseError(f"unnamed constraint: {parts[0].strip()[:40]!r}")
    for name, body in zip(parts[1::2], parts[2::2]):
        toks = _tokens(body)
        pos = [i for i, t in enumerate(toks) if t in _SENSES]
        if len(pos) != 1:
            raise LpParseError(f"row {name}: expected 'expr <sense> constant'")
        p = pos[0]
        s = {"=<": "<=", "=>": ">="}.get(toks[p], toks[p])
        rhs_text = "".join(toks[p + 1:])
        try:
            rhs = float(rhs_text)
        except ValueError:
            raise LpParseError(f"row {name}: right-hand side {rhs_text!r} is not a number")
        rows.append((name, _parse_terms(toks[:p], f"row {name}"), s, rhs))

    binaries = " ".join(chunks["bin"]).split()
    return ParsedLp(sense, objective, rows, binaries, comments)


def model_from_lp(text: str, name: str = "lp") -> IlpModel:
    """Rebuild a solvable model; row rules come from the name prefix."""
    p = parse_lp(text)
    if p.sense != "max":
        raise LpParseError("only maximization models are supported")
    variables = list(p.binaries)
    seen = set(variables)
    for n in list(p.objective) + [v for _, terms, _, _ in p.rows for v in terms]:
        if n not in seen:
            raise LpParseError(f"variable {n} is not declared binary")
    index = {v: j for j, v in enumerate(variables)}
    objective = {
        index[v]: Fraction(c).limit_denominator(_MAX_DENOMINATOR)
        for v, c in p.objective.items() if c != 0
    }
    rows = [
        Row(rname, rname.split("_", 1)[0], tuple((index[v], c) for v, c in terms.items()), s, rhs)
        for rname, terms, s, rhs in p.rows
    ]
    preemption = any(r.rule == "e1" for r in rows) or any(v.startswith("f_") for v in variables)
    for c in p.comments:
        m = re.match(r"model (\S+)(?: preemption=(yes|no))?", c)
        if m:
            name = m.group(1)
            # without performance users both variants have identical rows
            if m.group(2):
                preemption = m.group(2) == "yes"
    return IlpModel(name, preemption, variables, objective, rows, index)


def write_solution(assignment: Mapping[str, int], fh: TextIO, order: Iterable[str] | None = None) -> None:
    """One JSON object per line: {"var": name, "value": 0|1}."""
    for name in order if order is not None else sorted(assignment):
        fh.write(json.dumps({"var": name, "value": int(assignment[name])}) + "\n")


def read_solution(fh: TextIO) -> dict[str, int]:
    """Accepts our own lines and plain ``{name: value}`` objects."""
    out: dict[str, int] = {}
    for lineno, line in enumerate(fh, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise IlpError(f"solution line {lineno}: {e.msg}")
        if not isinstance(obj, dict):
            raise IlpError(f"solution line {lineno}: expected an object")
        pairs = [(obj["var"], obj["value"])] if "var" in obj else obj.items()
        for k, v in pairs:
            v = round(float(v))
            if v not in (0, 1):
                raise IlpError(f"solution line {lineno}: {k} = {v} is not binary")
            out[str(k)] = int(v)
    return out
