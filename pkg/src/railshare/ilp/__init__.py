"""Exact binary program for one period: builder, LP text, exhaustive oracle."""

from .bridge import assignment_from_grid, ilp_scenario, scenario_from_outcome, slot_gamma
from .lpformat import (
    LpParseError,
    ParsedLp,
    export_lp,
    model_from_lp,
    parse_lp,
    read_solution,
    write_lp,
    write_solution,
)
from .model import IlpError, IlpModel, IlpScenario, Row, build_model, expected_counts
from .oracle import DEFAULT_LIMIT, OracleLimitError, OracleSolution, solve_exhaustive

__all__ = [
    "DEFAULT_LIMIT",
    "IlpError",
    "IlpModel",
    "IlpScenario",
    "LpParseError",
    "OracleLimitError",
    "OracleSolution",
    "ParsedLp",
    "Row",
    "assignment_from_grid",
    "build_model",
    "expected_counts",
    "export_lp",
    "ilp_scenario",
    "model_from_lp",
    "parse_lp",
    "read_solution",
    "scenario_from_outcome",
    "slot_gamma",
    "solve_exhaustive",
    "write_lp",
    "write_solution",
]
