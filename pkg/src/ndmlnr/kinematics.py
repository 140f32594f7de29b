"""Node motion state, unit-disk range tests and link expiration time."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

TWO_PI = 2.0 * math.pi

# (m/s)^2 below which two nodes are treated as co-moving
REL_SPEED_EPS = 1e-9


class OutOfRangeError(ValueError):
    """Raised when a link metric is requested for nodes that are not connected."""


@dataclass(frozen=True)
class NodeKinematics:
    x: float
    y: float
    speed: float = 0.0
    heading: float = 0.0

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError(f"speed must be >= 0, got {self.speed}")
        h = math.fmod(self.heading, TWO_PI)
        if h < 0:
            h += TWO_PI
        if h >= TWO_PI:
            h = 0.0
        object.__setattr__(self, "heading", h)

    @property
    def velocity(self) -> tuple[float, float]:
        return self.speed * math.cos(self.heading), self.speed * math.sin(self.heading)


@dataclass(frozen=True)
class RadioModel:
    range: float
    hop_delay: float = 0.001
    default_bandwidth: float = 1.0

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("radio range must be > 0")
        if self.hop_delay < 0:
            raise ValueError("hop_delay must be >= 0")


def advance(k: NodeKinematics, dt: float) -> NodeKinematics:
    """Move ``k`` along its heading for ``dt`` seconds at constant speed."""
    if dt < 0:
        raise ValueError(f"dt must be >= 0, got {dt}")
    if dt == 0 or k.speed == 0:
        return k
    vx, vy = k.velocity
    return replace(k, x=k.x + vx * dt, y=k.y + vy * dt)


def distance(ki: NodeKinematics, kj: NodeKinematics) -> float:
    return math.hypot(ki.x - kj.x, ki.y - kj.y)


def in_range(ki: NodeKinematics, kj: NodeKinematics, radio: RadioModel) -> bool:
    return distance(ki, kj) <= radio.range


def compute_let(ki: NodeKinematics, kj: NodeKinematics, radio: RadioModel) -> float:
    """Seconds until nodes ``ki`` and ``kj`` drift further apart than the radio range.

    Both nodes keep their current speed and heading. Returns ``math.inf`` when
    the relative velocity is negligible.
    """
    if not in_range(ki, kj, radio):
        raise OutOfRangeError("link expiration time is undefined for nodes out of range")
    vix, viy = ki.velocity
    vjx, vjy = kj.velocity
    a = vix - vjx
    b = ki.x - kj.x
    c = viy - vjy
    d = ki.y - kj.y
    rel2 = a * a + c * c
    if rel2 < REL_SPEED_EPS:
        return math.inf
    r = radio.range
    disc = rel2 * r * r - (a * d - b * c) ** 2
    # in range implies disc >= 0 up to rounding
    assert disc >= -1e-9 * rel2 * r * r, disc
    q = math.sqrt(max(disc, 0.0))
    return max((-(a * b + c * d) + q) / rel2, 0.0)
