"""Scenario files: YAML with one section per subsystem.

Every value is checked on load; errors carry the file, line and dotted
field path so a bad scenario can be fixed without reading the code.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable

import yaml

from .band_plan import SCHEDULABLE_LOW_EDGE, BandPlan, BandPlanError, GsmrCarrier
from .channel import CQI_TABLE, ChannelConfigError, CqiRow, PathLossModel, RadioParams, load_cqi_table
from .grid import GridConfig
from .traffic import ArrivalConfig

OUTPUT_ENV = "RAILSHARE_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "railshare-out"
ALGORITHMS = ("itsp", "bcqi")


class ConfigError(ValueError):
    def __init__(self, message: str, *, path: str | None = None, line: int | None = None,
                 source: str | None = None):
        self.message, self.path, self.line, self.source = message, path, line, source
        where = ":".join(str(p) for p in (source, line) if p is not None)
        head = f"{where}: " if where else ""
        fld = f"{path}: " if path else ""
        super().__init__(f"{head}{fld}{message}")


@dataclass(frozen=True)
class BandSection:
    num_prbs: int = 17
    frmcs_low_edge_hz: float = SCHEDULABLE_LOW_EDGE
    control_reserved_prbs: tuple[int, ...] = ()
    colliding_prbs: tuple[int, ...] | None = None
    # (center frequency in Hz, active flag)
    carriers: tuple[tuple[float, bool], ...] | None = None

    def plan(self, n_colliding: int | None = None) -> BandPlan:
        """Plan for a sweep point, or the section's own plan when ``None``."""
        common = dict(
            num_prbs=self.num_prbs,
            frmcs_low_edge=self.frmcs_low_edge_hz,
            control_reserved=self.control_reserved_prbs,
        )
        if n_colliding is not None:
            return BandPlan.synthesize(n_colliding, **common)
        if self.colliding_prbs is not None:
            return BandPlan.from_colliding_list(self.colliding_prbs, **common)
        carriers = tuple(GsmrCarrier(f, a) for f, a in self.carriers or ())
        return BandPlan(carriers=carriers, **common)


@dataclass(frozen=True)
class ChannelSection:
    model: PathLossModel = PathLossModel.RMA_LOS
    radio: RadioParams = field(default_factory=RadioParams)
    cqi_table: tuple[CqiRow, ...] = CQI_TABLE
    cqi_table_path: str | None = None


@dataclass(frozen=True)
class UsersSection:
    """Trains on a straight track through a gNB at the origin."""

    count: int = 2
    spacing_m: float = 3000.0
    speed_kmh: float = 300.0
    cell_radius_m: float = 3000.0
    positions_m: tuple[float, ...] | None = None

    def initial_positions(self) -> list[float]:
        if self.positions_m is not None:
            return list(self.positions_m)
        return [-self.cell_radius_m + i * self.spacing_m for i in range(self.count)]

    def positions_at(self, elapsed_s: float) -> list[float]:
        """Positions after ``elapsed_s``; trains wrap within [-R, R)."""
        r = self.cell_radius_m
        step = self.speed_kmh / 3.6 * elapsed_s
        return [(p + step + r) % (2 * r) - r for p in self.initial_positions()]


@dataclass(frozen=True)
class SchedulerSection:
    algorithms: tuple[str, ...] = ALGORITHMS
    pa_mini_slots: int = 2
    gsmr_strict_subset: bool = True
    perf_target_bps: float = 10e6


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    grid: GridConfig = field(default_factory=GridConfig)
    band: BandSection = field(default_factory=BandSection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    traffic: ArrivalConfig = field(default_factory=ArrivalConfig)
    users: UsersSection = field(default_factory=UsersSection)
    scheduler: SchedulerSection = field(default_factory=SchedulerSection)
    # empty sweep: run the band section's own plan once
    sweep: tuple[int, ...] = tuple(range(2, 11))
    periods: int = 100
    seeds: tuple[int, ...] = (0,)
    output_dir: str | None = None

    @property
    def user_ids(self) -> list[int]:
        return list(range(len(self.users.initial_positions())))

    @property
    def sweep_points(self) -> list[int | None]:
        return list(self.sweep) if self.sweep else [None]

    def with_seeds(self, seeds) -> "Scenario":
        return replace(self, seeds=tuple(seeds))

    def resolve_output_dir(self, override: str | None = None) -> Path:
        return Path(override or self.output_dir or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_DIR)


# ---------------------------------------------------------------- parsing

class _Doc:
    """Plain data plus the source line of every node, keyed by dotted path."""

    def __init__(self, text: str, source: str):
        self.source = source
        self.lines: dict[str, int] = {}
        self._scalars = yaml.constructor.SafeConstructor()
        try:
            node = yaml.compose(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            line = mark.line + 1 if mark is not None else None
            problem = getattr(exc, "problem", None) or str(exc)
            raise ConfigError(f"YAML syntax error: {problem}", line=line, source=source) from None
        self.data = {} if node is None else self._plain(node, "")

    def _plain(self, node, path: str):
        self.lines[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            out = {}
            for k, v in node.value:
                key = str(k.value)
                sub = f"{path}.{key}" if path else key
                if key in out:
                    raise ConfigError("duplicate key", path=sub, line=k.start_mark.line + 1, source=self.source)
                self.lines[sub] = k.start_mark.line + 1
                out[key] = self._plain(v, sub)
            return out
        if isinstance(node, yaml.SequenceNode):
            return [self._plain(v, f"{path}[{i}]") for i, v in enumerate(node.value)]
        return self._scalars.construct_object(node, deep=True)

    def error(self, path: str, message: str) -> ConfigError:
        line = self.lines.get(path)
        probe = path
        while line is None and "." in probe:
            probe = probe.rsplit(".", 1)[0]
            line = self.lines.get(probe)
        return ConfigError(message, path=path, line=line, source=self.source)


class _Section:
    def __init__(self, doc: _Doc, path: str, data: Any):
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise doc.error(path, f"expected a mapping, got {type(data).__name__}")
        self.doc, self.path, self.data = doc, path, dict(data)

    def _p(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def err(self, key: str, message: str) -> ConfigError:
        return self.doc.error(self._p(key), message)

    def has(self, key: str) -> bool:
        return key in self.data and self.data[key] is not None

    def number(self, key: str, default: float, *, lo: float | None = None, hi: float | None = None,
               strict_lo: bool = False) -> float:
        v = self.data.pop(key, None)
        if v is None:
            return default
        if isinstance(v, bool):
            raise self.err(key, "expected a number, got a boolean")
        try:
            x = float(v)  # YAML 1.1 reads "877.7e6" as a string
        except (TypeError, ValueError):
            raise self.err(key, f"expected a number, got {v!r}") from None
        if not math.isfinite(x):
            raise self.err(key, "must be finite")
        if lo is not None and (x <= lo if strict_lo else x < lo):
            raise self.err(key, f"must be {'>' if strict_lo else '>='} {lo:g}, got {x:g}")
        if hi is not None and x > hi:
            raise self.err(key, f"must be <= {hi:g}, got {x:g}")
        return x

    def integer(self, key: str, default: int, *, lo: int | None = None) -> int:
        v = self.data.pop(key, None)
        if v is None:
            return default
        if isinstance(v, bool) or not isinstance(v, int):
            raise self.err(key, f"expected an integer, got {v!r}")
        if lo is not None and v < lo:
            raise self.err(key, f"must be >= {lo}, got {v}")
        return v

    def boolean(self, key: str, default: bool) -> bool:
        v = self.data.pop(key, None)
        if v is None:
            return default
        if not isinstance(v, bool):
            raise self.err(key, f"expected true or false, got {v!r}")
        return v

    def text(self, key: str, default: str | None, choices: tuple[str, ...] | None = None) -> str | None:
        v = self.data.pop(key, None)
        if v is None:
            return default
        if not isinstance(v, str):
            raise self.err(key, f"expected a string, got {v!r}")
        if choices and v.lower() not in choices:
            raise self.err(key, f"must be one of {', '.join(choices)}, got {v!r}")
        return v.lower() if choices else v

    def int_list(self, key: str, default):
        v = self.data.pop(key, None)
        if v is None:
            return default
        return _int_list(v, lambda msg: self.err(key, msg))

    def section(self, key: str) -> "_Section":
        return _Section(self.doc, self._p(key), self.data.pop(key, None))

    def raw(self, key: str):
        return self.data.pop(key, None)

    def done(self) -> None:
        if self.data:
            key = sorted(self.data)[0]
            raise self.err(key, "unknown field")


def _int_list(v, err: Callable[[str], ConfigError]) -> tuple[int, ...]:
    """A list of ints, a single int, or an inclusive range written "a..b"."""
    if isinstance(v, bool):
        raise err(f"expected integers, got {v!r}")
    if isinstance(v, int):
        return (v,)
    if isinstance(v, str):
        a, sep, b = v.partition("..")
        try:
            if not sep:
                return (int(a),)
            lo, hi = int(a), int(b)
        except ValueError:
            raise err(f"expected 'a..b' with integers, got {v!r}") from None
        if hi < lo:
            raise err(f"empty range {v!r}")
        return tuple(range(lo, hi + 1))
    if isinstance(v, list):
        if any(isinstance(x, bool) or not isinstance(x, int) for x in v):
            raise err(f"expected a list of integers, got {v!r}")
        return tuple(v)
    raise err(f"expected integers, got {v!r}")


def parse_int_range(text: str) -> tuple[int, ...]:
    """``"3"``, ``"1..5"`` or ``"1,2,7"``; used by the CLI."""
    out: list[int] = []
    for part in text.split(","):
        out.extend(_int_list(part.strip(), lambda msg: ConfigError(msg, path="--seeds")))
    return tuple(out)


def _grid(s: _Section) -> GridConfig:
    g = GridConfig(
        num_prbs=s.integer("num_prbs", 17, lo=1),
        num_slots=s.integer("num_slots", 10, lo=1),
        minislots=s.integer("minislots", 7, lo=1),
        slot_duration_ms=s.number("slot_duration_ms", 1.0, lo=0, strict_lo=True),
    )
    s.done()
    return g


def _band(s: _Section, grid: GridConfig) -> BandSection:
    num = s.integer("num_prbs", grid.num_prbs, lo=1)
    if num != grid.num_prbs:
        raise s.err("num_prbs", f"band plan has {num} PRBs but the grid has {grid.num_prbs}")
    edge = s.number("frmcs_low_edge_hz", SCHEDULABLE_LOW_EDGE, lo=0, strict_lo=True)
    reserved = s.int_list("control_reserved_prbs", ())
    for k in reserved:
        if not 0 <= k < num:
            raise s.err("control_reserved_prbs", f"PRB {k} out of range 0..{num - 1}")
    colliding = s.int_list("colliding_prbs", None)
    raw_carriers = s.raw("carriers")
    if colliding is not None and raw_carriers is not None:
        raise s.err("carriers", "give either colliding_prbs or carriers, not both")
    carriers = None
    if raw_carriers is not None:
        if not isinstance(raw_carriers, list):
            raise s.err("carriers", "expected a list")
        carriers = []
        for i, c in enumerate(raw_carriers):
            cs = _Section(s.doc, f"{s._p('carriers')}[{i}]", c)
            carriers.append((cs.number("center_hz", math.nan), cs.boolean("active", False)))
            if math.isnan(carriers[-1][0]):
                raise cs.err("center_hz", "required")
            cs.done()
        carriers = tuple(carriers)
    s.done()
    band = BandSection(num, edge, tuple(reserved), colliding, carriers)
    try:
        band.plan()
    except BandPlanError as exc:
        raise s.doc.error(s.path, str(exc)) from None
    return band


def _channel(s: _Section, base: Path | None) -> ChannelSection:
    model = s.text("model", "rma", choices=("uma", "rma"))
    d = RadioParams()
    kw = dict(
        carrier_frequency=s.number("carrier_frequency_hz", d.carrier_frequency, lo=0, strict_lo=True),
        gnb_antenna_height=s.number("gnb_antenna_height_m", d.gnb_antenna_height, lo=0, strict_lo=True),
        ue_antenna_height=s.number("ue_antenna_height_m", d.ue_antenna_height, lo=0, strict_lo=True),
        avg_building_height=s.number("avg_building_height_m", d.avg_building_height, lo=0, strict_lo=True),
        tx_output_power=s.number("tx_power_dbm", d.tx_output_power),
        tx_antenna_gain=s.number("tx_antenna_gain_dbi", d.tx_antenna_gain),
        rx_antenna_gain=s.number("rx_antenna_gain_db", d.rx_antenna_gain),
        noise_figure=s.number("noise_figure_db", d.noise_figure, lo=0),
        prb_bandwidth=s.number("prb_bandwidth_hz", d.prb_bandwidth, lo=0, strict_lo=True),
    )
    table_path = s.text("cqi_table", None)
    s.done()
    try:
        radio = RadioParams(**kw)
    except ChannelConfigError as exc:
        raise s.doc.error(s.path, str(exc)) from None
    table = CQI_TABLE
    if table_path is not None:
        p = Path(table_path)
        if not p.is_absolute() and base is not None:
            p = base / p
        try:
            table = load_cqi_table(p)
        except (OSError, ChannelConfigError) as exc:
            raise s.doc.error(s._p("cqi_table"), str(exc)) from None
    return ChannelSection(PathLossModel(model), radio, table, table_path)


def _traffic(s: _Section) -> ArrivalConfig:
    d = ArrivalConfig()
    kw = dict(
        lambda_perf=s.number("lambda_perf", d.lambda_perf, lo=0),
        lambda_critical=s.number("lambda_critical", d.lambda_critical, lo=0),
        lambda_gsmr=s.number("lambda_gsmr", d.lambda_gsmr, lo=0),
        seed=s.integer("seed", d.seed, lo=0),
        critical_deadline_ms=s.number("critical_deadline_ms", d.critical_deadline_ms, lo=0, strict_lo=True),
        critical_packet_bytes=s.integer("critical_packet_bytes", d.critical_packet_bytes, lo=70),
        critical_packet_max_bytes=s.integer("critical_packet_max_bytes", None, lo=70),
        perf_packet_bytes=s.integer("perf_packet_bytes", d.perf_packet_bytes, lo=1),
        signaling_fraction=s.number("signaling_fraction", d.signaling_fraction, lo=0, hi=1),
    )
    for key in ("critical_packet_bytes", "critical_packet_max_bytes"):
        if kw[key] is not None and kw[key] > 120:
            raise s.err(key, f"critical payloads are 70..120 bytes, got {kw[key]}")
    s.done()
    try:
        return ArrivalConfig(**kw)
    except ValueError as exc:
        raise s.doc.error(s.path, str(exc)) from None


def _users(s: _Section) -> UsersSection:
    d = UsersSection()
    count = s.integer("count", d.count, lo=0)
    spacing = s.number("spacing_m", d.spacing_m, lo=0)
    speed = s.number("speed_kmh", d.speed_kmh, lo=0)
    radius = s.number("cell_radius_m", d.cell_radius_m, lo=0, strict_lo=True)
    raw = s.raw("positions_m")
    positions = None
    if raw is not None:
        if not isinstance(raw, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in raw):
            raise s.err("positions_m", "expected a list of numbers")
        positions = tuple(float(x) for x in raw)
        if any(abs(x) > radius for x in positions):
            raise s.err("positions_m", f"positions must lie within +-{radius:g} m of the gNB")
    elif count > 1 and (count - 1) * spacing >= 2 * radius:
        raise s.err("spacing_m", f"{count} trains {spacing:g} m apart do not fit in a {2 * radius:g} m cell")
    s.done()
    return UsersSection(count, spacing, speed, radius, positions)


def _scheduler(s: _Section) -> SchedulerSection:
    raw = s.raw("algorithm")
    if raw is None:
        algorithms = ALGORITHMS
    else:
        items = raw if isinstance(raw, list) else [raw]
        if not items or any(not isinstance(a, str) or a.lower() not in ALGORITHMS for a in items):
            raise s.err("algorithm", f"expected itsp, bcqi or a list of them, got {raw!r}")
        algorithms = tuple(dict.fromkeys(a.lower() for a in items))
    sc = SchedulerSection(
        algorithms=algorithms,
        pa_mini_slots=s.integer("pa_mini_slots", 2, lo=0),
        gsmr_strict_subset=s.boolean("gsmr_strict_subset", True),
        perf_target_bps=s.number("perf_target_bps", 10e6, lo=0),
    )
    s.done()
    return sc


def parse_scenario(text: str, source: str = "<scenario>", base_dir: Path | None = None) -> Scenario:
    doc = _Doc(text, source)
    top = _Section(doc, "", doc.data)
    name = top.text("name", None) or (Path(source).stem if source != "<scenario>" else "scenario")
    if not name.replace("_", "").replace("-", "").isalnum():
        raise top.err("name", "use letters, digits, '-' and '_' only")
    grid = _grid(top.section("grid"))
    band = _band(top.section("band_plan"), grid)
    channel = _channel(top.section("channel"), base_dir)
    traffic = _traffic(top.section("traffic"))
    users = _users(top.section("users"))
    sched = _scheduler(top.section("scheduler"))
    if sched.pa_mini_slots > grid.minislots:
        raise doc.error("scheduler.pa_mini_slots", f"cannot exceed {grid.minislots} mini-slots per slot")

    sw = top.section("sweep")
    sweep = sw.int_list("colliding_prbs", tuple(range(2, 11)))
    sw.done()
    for n in sweep:
        try:
            band.plan(n)
        except BandPlanError as exc:
            raise doc.error("sweep.colliding_prbs", f"{n}: {exc}") from None
    periods = top.integer("periods", 100, lo=1)
    seeds = top.int_list("seeds", (traffic.seed,))
    if any(x < 0 for x in seeds):
        raise top.err("seeds", "seeds must be >= 0")
    out = top.section("output")
    out_dir = out.text("dir", None)
    out.done()
    top.done()
    return Scenario(name, grid, band, channel, traffic, users, sched, tuple(sweep),
                    periods, tuple(seeds), out_dir)


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc.strerror}", source=str(path)) from None
    return parse_scenario(text, str(path), path.parent)
