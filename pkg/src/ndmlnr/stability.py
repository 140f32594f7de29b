"""Link stability degree and the eligibility gate applied to every hop."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

from .kinematics import NodeKinematics, RadioModel, compute_let

# J/s floor for the energy factor
DRAIN_RATE_FLOOR = 1e-6

LAST_HOP = "last-hop"
BOTTLENECK = "bottleneck"
LSD_MODES = (LAST_HOP, BOTTLENECK)

COMPUTED = "computed"
TABULATED = "tabulated"
METRIC_MODES = (COMPUTED, TABULATED)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class LinkMetrics:
    let_value: float
    drain_rate: float
    lsd: float
    bandwidth: float


@dataclass(frozen=True)
class ProtocolConfig:
    lsd_threshold: float = 15.0
    wait_period: float = 5.0
    dest_window: Optional[float] = None
    ttl_limit: int = 0
    min_link_bandwidth: Optional[float] = None
    lsd_mode: str = LAST_HOP

    def __post_init__(self):
        if self.lsd_threshold <= 0:
            raise ValueError("lsd_threshold must be > 0")
        if self.wait_period <= 0:
            raise ValueError("wait_period must be > 0")
        if self.dest_window is None:
            object.__setattr__(self, "dest_window", 2.0 * self.wait_period)
        elif self.dest_window <= 0:
            raise ValueError("dest_window must be > 0")
        if self.ttl_limit < 0:
            raise ValueError("ttl_limit must be >= 0")
        if self.lsd_mode not in LSD_MODES:
            raise ValueError(f"lsd_mode must be one of {LSD_MODES}")


@dataclass(frozen=True)
class LinkRow:
    lsd: Optional[float]
    bandwidth: float


def link_key(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i <= j else (j, i)


def compute_lsd(let_value: float, drain_rate: float) -> float:
    if let_value < 0 or drain_rate < 0:
        raise ValueError("LET and drain rate must be non-negative")
    if math.isinf(let_value):
        return math.inf
    return let_value / max(drain_rate, DRAIN_RATE_FLOOR)


def link_eligible(m: LinkMetrics, cfg: ProtocolConfig) -> bool:
    if not m.lsd > cfg.lsd_threshold:
        return False
    return cfg.min_link_bandwidth is None or m.bandwidth >= cfg.min_link_bandwidth


def carried_lsd(previous: float, link_lsd: float, hops_so_far: int, mode: str) -> float:
    """LSD value a packet carries after crossing one more link."""
    if mode == BOTTLENECK and hops_so_far > 0:
        return min(previous, link_lsd)
    return link_lsd


def link_lsd_source(
    sender: int,
    receiver: int,
    mode: str,
    *,
    link_table: Mapping[tuple[int, int], LinkRow],
    kinematics: Mapping[int, NodeKinematics],
    drain_rates: Mapping[int, float],
    radio: RadioModel,
) -> LinkMetrics:
    """Metrics of the link ``sender -> receiver`` as seen when the receiver is the next carrier.

    In tabulated mode the scenario's row is returned verbatim. In computed mode
    the LSD is the link's expiration time over the receiver's drain rate.
    """
    row = link_table.get(link_key(sender, receiver))
    dr = drain_rates[receiver]
    if mode == TABULATED:
        if row is None or row.lsd is None:
            raise ConfigurationError(f"link table has no LSD entry for link ({sender}, {receiver})")
        return LinkMetrics(let_value=math.nan, drain_rate=dr, lsd=row.lsd, bandwidth=row.bandwidth)
    if mode != COMPUTED:
        raise ConfigurationError(f"unknown metric mode {mode!r}")
    let_value = compute_let(kinematics[sender], kinematics[receiver], radio)
    bandwidth = row.bandwidth if row is not None else radio.default_bandwidth
    return LinkMetrics(let_value=let_value, drain_rate=dr, lsd=compute_lsd(let_value, dr), bandwidth=bandwidth)
