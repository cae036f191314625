"""Random waypoint mobility and the disk radio model."""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Tuple

Point = Tuple[float, float]


@dataclass(frozen=True)
class RadioModel:
    range: float = 250.0
    tx_time: float = 0.001

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("radio range must be positive")
        if self.tx_time <= 0:
            raise ValueError("tx_time must be positive")


def in_range(a: Point, b: Point, radio: RadioModel) -> bool:
    dx = a[0] - b[0]
    dy = a[1] - b[1]
    return dx * dx + dy * dy <= radio.range * radio.range


class MobilityState:
    """One node's current random-waypoint leg.

    A leg starts at ``origin`` at ``depart_at``, reaches ``waypoint`` at
    ``arrive_at`` and then dwells there until ``pause_until``.
    """

    __slots__ = ("origin", "waypoint", "speed", "depart_at", "arrive_at",
                 "pause_until", "pause_time", "width", "height",
                 "speed_min", "speed_max", "rng")

    def __init__(self, origin: Point, waypoint: Point, speed: float,
                 depart_at: float, pause_time: float, rng: random.Random,
                 width: float = 700.0, height: float = 600.0,
                 speed_min: float = 1.0, speed_max: float = 20.0):
        self.rng = rng
        self.width = width
        self.height = height
        self.speed_min = speed_min
        self.speed_max = speed_max
        self.pause_time = pause_time
        self._set_leg(origin, waypoint, speed, depart_at)

    @classmethod
    def initial(cls, rng: random.Random, pause_time: float, width: float = 700.0,
                height: float = 600.0, speed_min: float = 1.0,
                speed_max: float = 20.0) -> "MobilityState":
        """Uniform start position, dwelling there for one pause first."""
        start = (rng.uniform(0.0, width), rng.uniform(0.0, height))
        state = cls(start, start, speed_min, 0.0, pause_time, rng, width,
                    height, speed_min, speed_max)
        return state

    def _set_leg(self, origin: Point, waypoint: Point, speed: float, depart_at: float):
        self.origin = origin
        self.waypoint = waypoint
        self.speed = speed
        self.depart_at = depart_at
        dist = math.hypot(waypoint[0] - origin[0], waypoint[1] - origin[1])
        self.arrive_at = depart_at + (dist / speed if dist > 0 else 0.0)
        self.pause_until = self.arrive_at + self.pause_time

    def advance(self, now: float) -> bool:
        """Draw new legs until ``now`` falls inside the current one."""
        moved = False
        while now >= self.pause_until and self.pause_until < math.inf:
            rng = self.rng
            target = (rng.uniform(0.0, self.width), rng.uniform(0.0, self.height))
            speed = rng.uniform(self.speed_min, self.speed_max)
            depart = self.pause_until
            self._set_leg(self.waypoint, target, speed, depart)
            moved = True
        return moved


def position_at(state: MobilityState, now: float) -> Point:
    if now >= state.arrive_at:
        return state.waypoint
    if now <= state.depart_at:
        return state.origin
    frac = (now - state.depart_at) / (state.arrive_at - state.depart_at)
    ox, oy = state.origin
    wx, wy = state.waypoint
    return (ox + (wx - ox) * frac, oy + (wy - oy) * frac)
