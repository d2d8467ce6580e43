"""GSM-R / FRMCS band plan: colliding PRBs (a_k) and live GSM-R occupancy (b_k).

All frequency intervals are half-open ``[low, high)``; two spans that only
touch at an edge do not collide.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

MHZ = 1e6
KHZ = 1e3

GSMR_CARRIER_WIDTH = 200 * KHZ
PRB_WIDTH = 180 * KHZ

# 900 MHz RMR band, uplink direction
GSMR_UL_BAND = (876.0 * MHZ, 880.0 * MHZ)
FRMCS_UL_BAND = (874.4 * MHZ, 879.4 * MHZ)
UL_OVERLAP = (876.0 * MHZ, 879.4 * MHZ)

# 25 PRBs fit the FRMCS carrier; 4 control PRBs at each edge leave 17 schedulable
FRMCS_TOTAL_PRBS = 25
EDGE_CONTROL_PRBS = 4
SCHEDULABLE_LOW_EDGE = FRMCS_UL_BAND[0] + EDGE_CONTROL_PRBS * PRB_WIDTH


class BandPlanError(ValueError):
    pass


def _intersects(lo1: float, hi1: float, lo2: float, hi2: float) -> bool:
    return max(lo1, lo2) < min(hi1, hi2)


@dataclass(frozen=True)
class GsmrCarrier:
    center_frequency: float
    active: bool = False
    width: float = GSMR_CARRIER_WIDTH
    band: tuple[float, float] = GSMR_UL_BAND

    def __post_init__(self):
        if self.width != GSMR_CARRIER_WIDTH:
            raise BandPlanError(f"GSM-R carriers are 200 kHz wide, got {self.width} Hz")
        lo, hi = self.band
        if not lo <= self.center_frequency <= hi:
            raise BandPlanError(
                f"carrier center {self.center_frequency / MHZ:.3f} MHz outside "
                f"GSM-R band [{lo / MHZ}, {hi / MHZ}] MHz"
            )

    @property
    def span(self) -> tuple[float, float]:
        half = self.width / 2
        return self.center_frequency - half, self.center_frequency + half


@dataclass(frozen=True)
class FrmcsPrb:
    index: int
    low_edge_frequency: float
    colliding: bool = False
    gsmr_occupied: bool = False
    control_reserved: bool = False
    width: float = PRB_WIDTH

    @property
    def span(self) -> tuple[float, float]:
        return self.low_edge_frequency, self.low_edge_frequency + self.width


@dataclass(frozen=True)
class BandState:
    """Per-PRB flags for one scheduling period.

    ``colliding`` is a_k, ``occupied`` is b_k. Indexed by PRB number.
    """

    colliding: tuple[bool, ...]
    occupied: tuple[bool, ...]
    reserved: tuple[bool, ...]

    def __post_init__(self):
        n = len(self.colliding)
        if len(self.occupied) != n or len(self.reserved) != n:
            raise BandPlanError("flag vectors must have equal length")
        for k in range(n):
            if self.occupied[k] and not self.colliding[k]:
                raise BandPlanError(f"PRB {k} occupied by GSM-R but not colliding")

    @classmethod
    def clear(cls, num_prbs: int) -> "BandState":
        off = (False,) * num_prbs
        return cls(off, off, off)

    @classmethod
    def from_sets(
        cls,
        num_prbs: int,
        colliding: Iterable[int] = (),
        occupied: Iterable[int] = (),
        reserved: Iterable[int] = (),
    ) -> "BandState":
        c, o, r = set(colliding), set(occupied), set(reserved)
        return cls(
            tuple(k in c for k in range(num_prbs)),
            tuple(k in o for k in range(num_prbs)),
            tuple(k in r for k in range(num_prbs)),
        )

    @property
    def num_prbs(self) -> int:
        return len(self.colliding)

    @property
    def colliding_set(self) -> frozenset[int]:
        return frozenset(k for k, f in enumerate(self.colliding) if f)

    @property
    def occupied_set(self) -> frozenset[int]:
        return frozenset(k for k, f in enumerate(self.occupied) if f)

    def performance_eligible(self, k: int, *, allow_colliding: bool = True) -> bool:
        if self.reserved[k] or self.occupied[k]:
            return False
        return allow_colliding or not self.colliding[k]

    def critical_eligible(self, k: int) -> bool:
        return not (self.reserved[k] or self.colliding[k])


@dataclass(frozen=True)
class BandPlan:
    """FRMCS PRB layout against a set of GSM-R carrier positions.

    If ``colliding_override`` is given, E_c is taken from it verbatim and the
    carriers only serve as occupancy units (their b_k footprint is masked by
    a_k).
    """

    num_prbs: int = 17
    frmcs_low_edge: float = SCHEDULABLE_LOW_EDGE
    carriers: tuple[GsmrCarrier, ...] = ()
    overlap_range: tuple[float, float] = UL_OVERLAP
    control_reserved: frozenset[int] = field(default_factory=frozenset)
    colliding_override: frozenset[int] | None = None

    def __post_init__(self):
        if self.num_prbs < 1:
            raise BandPlanError("band plan needs at least one PRB")
        object.__setattr__(self, "carriers", tuple(self.carriers))
        object.__setattr__(self, "control_reserved", frozenset(self.control_reserved))
        bad = [k for k in self.control_reserved if not 0 <= k < self.num_prbs]
        if bad:
            raise BandPlanError(f"control-reserved PRBs out of range: {sorted(bad)}")
        if self.colliding_override is not None:
            override = frozenset(self.colliding_override)
            object.__setattr__(self, "colliding_override", override)
            for k in override:
                if not 0 <= k < self.num_prbs:
                    raise BandPlanError(f"colliding PRB {k} out of range")
                if not _intersects(*self.prb_span(k), *self.overlap_range):
                    raise BandPlanError(f"colliding PRB {k} lies outside the overlap range")

    @property
    def frmcs_span(self) -> tuple[float, float]:
        return self.frmcs_low_edge, self.frmcs_low_edge + self.num_prbs * PRB_WIDTH

    def prb_span(self, k: int) -> tuple[float, float]:
        lo = self.frmcs_low_edge + k * PRB_WIDTH
        return lo, lo + PRB_WIDTH

    def prb_boundary(self, k: int) -> float:
        """Frequency of the edge between PRB ``k - 1`` and PRB ``k``."""
        return self.frmcs_low_edge + k * PRB_WIDTH

    def carrier_footprint(self, carrier: GsmrCarrier) -> frozenset[int]:
        lo, hi = carrier.span
        return frozenset(
            k for k in range(self.num_prbs) if _intersects(*self.prb_span(k), lo, hi)
        )

    @property
    def default_active(self) -> frozenset[int]:
        return frozenset(i for i, c in enumerate(self.carriers) if c.active)

    def state(self, active_carriers: Iterable[int] | None = None) -> BandState:
        colliding = compute_colliding_set(self)
        occupied = apply_gsmr_occupancy(
            self, self.default_active if active_carriers is None else active_carriers
        )
        n = self.num_prbs
        return BandState(
            tuple(k in colliding for k in range(n)),
            occupied,
            tuple(k in self.control_reserved for k in range(n)),
        )

    def prbs(self, active_carriers: Iterable[int] | None = None) -> list[FrmcsPrb]:
        st = self.state(active_carriers)
        return [
            FrmcsPrb(
                index=k,
                low_edge_frequency=self.prb_span(k)[0],
                colliding=st.colliding[k],
                gsmr_occupied=st.occupied[k],
                control_reserved=st.reserved[k],
            )
            for k in range(self.num_prbs)
        ]

    @classmethod
    def synthesize(
        cls,
        n_colliding: int,
        *,
        num_prbs: int = 17,
        frmcs_low_edge: float = SCHEDULABLE_LOW_EDGE,
        control_reserved: Iterable[int] = (),
        overlap_range: tuple[float, float] = UL_OVERLAP,
    ) -> "BandPlan":
        """Place carriers so that exactly ``n_colliding`` PRBs collide.

        Carriers sit on PRB boundaries, so each one covers two adjacent PRBs.
        Pairs are stacked upwards from the first PRB fully inside the overlap
        range; an odd count is closed by a carrier sharing a PRB with the
        previous one. A single colliding PRB cannot be produced this way.
        """
        if n_colliding < 0 or n_colliding == 1:
            raise BandPlanError("synthesized plans need 0 or >= 2 colliding PRBs")
        probe = cls(num_prbs=num_prbs, frmcs_low_edge=frmcs_low_edge, overlap_range=overlap_range)
        first = next(
            (k for k in range(num_prbs) if probe.prb_span(k)[0] >= overlap_range[0]), None
        )
        if n_colliding and (first is None or first + n_colliding > num_prbs
                            or probe.prb_span(first + n_colliding - 1)[1] > overlap_range[1]):
            raise BandPlanError(
                f"cannot fit {n_colliding} colliding PRBs inside the overlap range"
            )
        carriers = [
            GsmrCarrier(probe.prb_boundary(k + 1))
            for k in _pair_starts(first or 0, n_colliding)
        ]
        return cls(
            num_prbs=num_prbs,
            frmcs_low_edge=frmcs_low_edge,
            carriers=tuple(carriers),
            overlap_range=overlap_range,
            control_reserved=frozenset(control_reserved),
        )

    @classmethod
    def from_colliding_list(
        cls,
        colliding: Iterable[int],
        *,
        num_prbs: int = 17,
        frmcs_low_edge: float = SCHEDULABLE_LOW_EDGE,
        control_reserved: Iterable[int] = (),
        overlap_range: tuple[float, float] = UL_OVERLAP,
    ) -> "BandPlan":
        """Explicit E_c; one carrier chain per run of consecutive PRBs."""
        ks = sorted(set(colliding))
        probe = cls(num_prbs=num_prbs, frmcs_low_edge=frmcs_low_edge, overlap_range=overlap_range)
        carriers = []
        for start, length in _runs(ks):
            if length == 1:
                lo, hi = probe.prb_span(start)
                carriers.append(GsmrCarrier((lo + hi) / 2))
            else:
                carriers.extend(
                    GsmrCarrier(probe.prb_boundary(k + 1)) for k in _pair_starts(start, length)
                )
        return cls(
            num_prbs=num_prbs,
            frmcs_low_edge=frmcs_low_edge,
            carriers=tuple(carriers),
            overlap_range=overlap_range,
            control_reserved=frozenset(control_reserved),
            colliding_override=frozenset(ks),
        )


def _pair_starts(first: int, n: int) -> list[int]:
    starts = list(range(first, first + n - 1, 2))
    if n % 2 == 1 and n > 1:
        starts.append(first + n - 2)
    return starts


def _runs(ks: Sequence[int]) -> list[tuple[int, int]]:
    runs: list[tuple[int, int]] = []
    for k in ks:
        if runs and runs[-1][0] + runs[-1][1] == k:
            runs[-1] = (runs[-1][0], runs[-1][1] + 1)
        else:
            runs.append((k, 1))
    return runs


def compute_colliding_set(plan: BandPlan) -> frozenset[int]:
    """E_c: PRBs overlapping a GSM-R carrier inside the shared range."""
    if not _intersects(*plan.frmcs_span, *plan.overlap_range):
        raise BandPlanError("FRMCS span does not intersect the overlap range")
    if plan.colliding_override is not None:
        return plan.colliding_override
    out = set()
    for k in range(plan.num_prbs):
        lo, hi = plan.prb_span(k)
        if not _intersects(lo, hi, *plan.overlap_range):
            continue
        if any(_intersects(lo, hi, *c.span) for c in plan.carriers):
            out.add(k)
    return frozenset(out)


def apply_gsmr_occupancy(plan: BandPlan, active_carriers: Iterable[int]) -> tuple[bool, ...]:
    """b_k flags for the period given the indices of active carriers."""
    active = set(active_carriers)
    unknown = [i for i in active if not 0 <= i < len(plan.carriers)]
    if unknown:
        raise BandPlanError(f"unknown carrier indices: {sorted(unknown)}")
    colliding = compute_colliding_set(plan)
    hit: set[int] = set()
    for i in active:
        hit |= plan.carrier_footprint(plan.carriers[i])
    return tuple(k in hit and k in colliding for k in range(plan.num_prbs))
