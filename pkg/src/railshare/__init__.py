"""Scheduling FRMCS traffic in the white space between GSM-R carriers."""

from .band_plan import BandPlan, BandState, GsmrCarrier
from .channel import LinkState, compute_link, required_prbs
from .config import ConfigError, Scenario, load_scenario, parse_scenario
from .engine import MetricsRow, ValidationFailure, export_scenario_ilp, run_scenario, simulate_point
from .grid import GridConfig, Owner, ResourceGrid
from .schedulers import PreemptionBudget, SchedulerOutcome, bcqi_schedule, itsp_schedule
from .validate import ConstraintViolation, check_grid, check_outcome

__version__ = "0.1.0"
