"""Link budget: path loss, SNR, CQI/MCS lookup and per-PRB rates.

The path-loss bodies are the 3GPP LOS forms for UMa and RMa. The SNR chain
and CQI ladder are conventional model choices, not measured data.
"""

from __future__ import annotations

import bisect
import csv
import enum
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

SPEED_OF_LIGHT = 3e8
MIN_DISTANCE_M = 10.0
MAX_DISTANCE_M = 10_000.0

SUBCARRIERS_PER_PRB = 12
SYMBOLS_PER_SLOT = 14
SUBFRAME_S = 1e-3
# symbols per second carried by one PRB (psi)
PRB_SYMBOL_RATE = SUBCARRIERS_PER_PRB * SYMBOLS_PER_SLOT / SUBFRAME_S


class ChannelConfigError(ValueError):
    pass


class PathLossModel(str, enum.Enum):
    UMA_LOS = "uma"
    RMA_LOS = "rma"


@dataclass(frozen=True)
class CqiRow:
    threshold_db: float
    cqi: int
    efficiency: float


# 4-bit CQI ladder; thresholds are inclusive lower bounds in dB
CQI_TABLE: tuple[CqiRow, ...] = tuple(
    CqiRow(th, cqi, eff)
    for th, cqi, eff in [
        (-6.7, 1, 0.1523),
        (-4.7, 2, 0.2344),
        (-2.3, 3, 0.3770),
        (0.2, 4, 0.6016),
        (2.4, 5, 0.8770),
        (4.3, 6, 1.1758),
        (5.9, 7, 1.4766),
        (8.1, 8, 1.9141),
        (10.3, 9, 2.4063),
        (11.7, 10, 2.7305),
        (14.1, 11, 3.3223),
        (16.3, 12, 3.9023),
        (18.7, 13, 4.5234),
        (21.0, 14, 5.1152),
        (22.7, 15, 5.5547),
    ]
)


def load_cqi_table(path: str | Path) -> tuple[CqiRow, ...]:
    """Read ``threshold_db,cqi,efficiency`` rows (header optional)."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append(CqiRow(float(rec[0]), int(rec[1]), float(rec[2])))
            except (ValueError, IndexError):
                if lineno == 1:
                    continue  # header
                raise ChannelConfigError(f"{path}:{lineno}: bad CQI row {rec!r}")
    rows.sort(key=lambda r: r.threshold_db)
    for a, b in zip(rows, rows[1:]):
        if b.cqi <= a.cqi or b.efficiency < a.efficiency:
            raise ChannelConfigError(f"{path}: CQI table must be monotone")
    if not rows:
        raise ChannelConfigError(f"{path}: empty CQI table")
    return tuple(rows)


@dataclass(frozen=True)
class RadioParams:
    carrier_frequency: float = 877.7e6
    gnb_antenna_height: float = 35.0
    ue_antenna_height: float = 4.0
    avg_building_height: float = 5.0
    tx_output_power: float = 23.0
    tx_antenna_gain: float = 0.0
    rx_antenna_gain: float = 3.0
    noise_figure: float = 5.0
    prb_bandwidth: float = 180e3

    def __post_init__(self):
        if min(self.gnb_antenna_height, self.ue_antenna_height, self.avg_building_height) <= 0:
            raise ChannelConfigError("antenna and building heights must be positive")
        if self.gnb_antenna_height <= self.ue_antenna_height:
            raise ChannelConfigError("gNB antenna must be higher than the UE antenna")
        if self.carrier_frequency <= 0 or self.prb_bandwidth <= 0:
            raise ChannelConfigError("frequencies must be positive")

    @property
    def fc_ghz(self) -> float:
        return self.carrier_frequency / 1e9

    @property
    def eirp(self) -> float:
        return self.tx_output_power + self.tx_antenna_gain


def breakpoint_distance(params: RadioParams, model: PathLossModel = PathLossModel.UMA_LOS) -> float:
    """d_BP = 4 h_BTS h_UE f_c / c.

    UMa uses effective heights (1 m environment height removed); RMa uses the
    actual antenna heights.
    """
    if model is PathLossModel.UMA_LOS:
        h_bts = params.gnb_antenna_height - 1.0
        h_ue = params.ue_antenna_height - 1.0
    else:
        h_bts = params.gnb_antenna_height
        h_ue = params.ue_antenna_height
    if h_bts <= 0 or h_ue <= 0:
        raise ChannelConfigError("effective antenna height must be positive")
    return 4.0 * h_bts * h_ue * params.carrier_frequency / SPEED_OF_LIGHT


def clamp_distance(d: float) -> tuple[float, bool]:
    c = min(max(d, MIN_DISTANCE_M), MAX_DISTANCE_M)
    return c, c != d


def _uma_short(params: RadioParams, d: float) -> float:
    return 22.0 * math.log10(d) + 28.0 + 20.0 * math.log10(params.fc_ghz)


def _uma_long_raw(params: RadioParams, d: float, d_bp: float) -> float:
    dh = params.gnb_antenna_height - params.ue_antenna_height
    return (
        40.0 * math.log10(d)
        + 28.0
        + 20.0 * math.log10(params.fc_ghz)
        - 9.0 * math.log10(d_bp**2 + dh**2)
    )


def _uma_long(params: RadioParams, d: float, d_bp: float) -> float:
    # shift so the two slopes meet at the breakpoint
    offset = _uma_short(params, d_bp) - _uma_long_raw(params, d_bp, d_bp)
    return _uma_long_raw(params, d, d_bp) + offset


def _rma_short(params: RadioParams, d: float) -> float:
    h = params.avg_building_height
    return (
        20.0 * math.log10(40.0 * math.pi * d * params.fc_ghz / 3.0)
        + min(0.03 * h**1.72, 10.0) * math.log10(d)
        - min(0.044 * h**1.72, 14.77)
        + 0.002 * math.log10(h) * d
    )


def _rma_long(params: RadioParams, d: float, d_bp: float) -> float:
    return _rma_short(params, d_bp) + 40.0 * math.log10(d / d_bp)


def path_loss_branches(model: PathLossModel, params: RadioParams, d: float) -> tuple[float, float]:
    """(short-range, long-range) expressions evaluated at ``d``, no clamping."""
    d_bp = breakpoint_distance(params, model)
    if model is PathLossModel.UMA_LOS:
        return _uma_short(params, d), _uma_long(params, d, d_bp)
    return _rma_short(params, d), _rma_long(params, d, d_bp)


def path_loss(model: PathLossModel, params: RadioParams, d: float) -> float:
    """LOS path loss in dB; ``d`` is clamped to [10 m, 10 km]."""
    model = PathLossModel(model)
    d, _ = clamp_distance(d)
    d_bp = breakpoint_distance(params, model)
    if model is PathLossModel.UMA_LOS:
        return _uma_short(params, d) if d < d_bp else _uma_long(params, d, d_bp)
    return _rma_short(params, d) if d < d_bp else _rma_long(params, d, d_bp)


def thermal_noise_floor(channel_width_hz: float) -> float:
    return -144.0 + 10.0 * math.log10(channel_width_hz / 1e3)


def snr(params: RadioParams, path_loss_db: float) -> float:
    rssi = params.eirp - path_loss_db + params.rx_antenna_gain
    return rssi - thermal_noise_floor(params.prb_bandwidth) - params.noise_figure


def snr_to_cqi(snr_db: float, table: Sequence[CqiRow] = CQI_TABLE) -> int:
    i = bisect.bisect_right([r.threshold_db for r in table], snr_db)
    return 0 if i == 0 else table[i - 1].cqi


def cqi_efficiency(cqi: int, table: Sequence[CqiRow] = CQI_TABLE) -> float:
    if cqi == 0:
        return 0.0
    for row in table:
        if row.cqi == cqi:
            return row.efficiency
    raise ChannelConfigError(f"CQI {cqi} not in table")


def prb_rate(params: RadioParams, snr_db: float) -> float:
    """Shannon bound B_k log2(1 + SNR) in bit/s."""
    return params.prb_bandwidth * math.log2(1.0 + 10.0 ** (snr_db / 10.0))


def required_prbs(target_throughput: float, efficiency: float) -> int | None:
    """PRBs per slot for a throughput target; None when the link is in outage."""
    if target_throughput <= 0:
        return 0
    if efficiency <= 0:
        return None
    return math.ceil(target_throughput / (PRB_SYMBOL_RATE * efficiency))


@dataclass(frozen=True)
class LinkState:
    user: int
    distance: float
    path_loss: float
    snr: float
    cqi: int
    efficiency: float
    per_prb_rate: float
    distance_clamped: bool = False

    @property
    def in_outage(self) -> bool:
        return self.cqi == 0

    def slot_bits(self, slot_duration_ms: float = 1.0) -> float:
        """MCS payload of one PRB over one slot."""
        return PRB_SYMBOL_RATE * self.efficiency * slot_duration_ms * 1e-3

    def minislot_bits(self, minislots: int, slot_duration_ms: float = 1.0) -> float:
        return self.slot_bits(slot_duration_ms) / minislots

    def minislots_needed(self, size_bytes: int, minislots: int) -> int | None:
        """Mini-slots for one packet: ceil(bits / (symbols_per_minislot * 12 * eff))."""
        if self.efficiency <= 0:
            return None
        res = SUBCARRIERS_PER_PRB * (SYMBOLS_PER_SLOT / minislots) * self.efficiency
        return math.ceil(size_bytes * 8 / res)


def compute_link(
    user: int,
    distance: float,
    params: RadioParams,
    model: PathLossModel = PathLossModel.RMA_LOS,
    table: Sequence[CqiRow] = CQI_TABLE,
) -> LinkState:
    d, clamped = clamp_distance(distance)
    pl = path_loss(model, params, d)
    s = snr(params, pl)
    cqi = snr_to_cqi(s, table)
    return LinkState(
        user=user,
        distance=d,
        path_loss=pl,
        snr=s,
        cqi=cqi,
        efficiency=cqi_efficiency(cqi, table),
        per_prb_rate=0.0 if cqi == 0 else prb_rate(params, s),
        distance_clamped=clamped,
    )
