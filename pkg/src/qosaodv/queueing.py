"""Per-node transmit buffer, load ratio and the two forwarding disciplines.

The buffer keeps packets in arrival order.  Schedulers pick a position to
dequeue from but never reorder what is stored.  Control frames (RREQ, RREP,
RERR) are privileged the way a routing-aware priority queue treats them:
they always go out first and are admitted even when the buffer is full.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, NamedTuple, Optional

from qosaodv.packets import BE, CTRL, RT

DEFAULT_CAPACITY = 20
# Slot arithmetic runs on float seconds; anything closer than this to a
# boundary is treated as sitting on it.
TIME_EPS = 1e-9


class Admission(enum.Enum):
    ACCEPTED = "accepted"
    DROPPED = "dropped"


class Slot(enum.Enum):
    RT = "rt"
    BE = "be"


class ClassCounts(NamedTuple):
    n_be: int
    n_other: int


@dataclass(frozen=True)
class SchedulerConfig:
    rt_slot: float = 0.005
    be_slot: float = 0.003
    tx_time: float = 0.001
    strict_slots: bool = True
    slot_phase_origin: float = 0.0

    def __post_init__(self):
        if self.rt_slot <= 0:
            raise ValueError("rt_slot must be positive")
        if self.be_slot < 0:
            raise ValueError("be_slot must be non-negative")
        if self.tx_time <= 0:
            raise ValueError("tx_time must be positive")
        for name in ("rt_slot", "be_slot"):
            ticks = getattr(self, name) / self.tx_time
            if abs(ticks - round(ticks)) > 1e-6:
                raise ValueError(f"{name} must be a multiple of tx_time")

    @property
    def cycle(self) -> float:
        return self.rt_slot + self.be_slot

    def with_origin(self, origin: float) -> "SchedulerConfig":
        return SchedulerConfig(self.rt_slot, self.be_slot, self.tx_time,
                               self.strict_slots, origin)


class Buffer:
    """Drop-tail packet buffer with a fixed packet-count capacity."""

    __slots__ = ("slots", "capacity", "n_be", "n_rt", "n_ctrl")

    def __init__(self, capacity: int = DEFAULT_CAPACITY):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.slots: List = []
        self.capacity = capacity
        self.n_be = 0
        self.n_rt = 0
        self.n_ctrl = 0

    def __len__(self) -> int:
        return len(self.slots)

    def __iter__(self):
        return iter(self.slots)

    def __repr__(self) -> str:
        kinds = " ".join(p.cls.short for p in self.slots)
        return f"Buffer([{kinds}], capacity={self.capacity})"

    def _count(self, cls, delta):
        if cls is BE:
            self.n_be += delta
        elif cls is RT:
            self.n_rt += delta
        else:
            self.n_ctrl += delta

    def push(self, packet, now: float):
        """Admit ``packet``; return whatever got dropped, or None.

        A data packet arriving at a full buffer is returned unchanged (drop
        tail).  A control frame arriving at a full buffer evicts the tail-most
        data packet, which is returned instead.
        """
        slots = self.slots
        if len(slots) >= self.capacity:
            if packet.cls is not CTRL:
                return packet
            for i in range(len(slots) - 1, -1, -1):
                if slots[i].cls is not CTRL:
                    victim = slots.pop(i)
                    self._count(victim.cls, -1)
                    break
            else:
                return packet
        else:
            victim = None
        packet.current_hop_enqueued_at = now
        slots.append(packet)
        self._count(packet.cls, 1)
        return victim

    def pop_at(self, index: int):
        packet = self.slots.pop(index)
        self._count(packet.cls, -1)
        return packet

    def index_of_class(self, cls) -> int:
        """Position of the earliest-arrived packet of ``cls``, or -1."""
        i = 0
        for p in self.slots:
            if p.cls is cls:
                return i
            i += 1
        return -1

    def counts(self) -> ClassCounts:
        return ClassCounts(self.n_be, len(self.slots) - self.n_be)

    def ratio(self) -> float:
        n = len(self.slots)
        if n == 0:
            return 0.0
        other = n - self.n_be
        return self.n_be / (other if other > 0 else 1)


def enqueue(buffer: Buffer, packet, now: float) -> Admission:
    dropped = buffer.push(packet, now)
    return Admission.DROPPED if dropped is packet else Admission.ACCEPTED


def count_classes(buffer: Buffer) -> ClassCounts:
    n_be = 0
    for p in buffer.slots:
        if p.cls is BE:
            n_be += 1
    return ClassCounts(n_be, len(buffer.slots) - n_be)


def compute_node_ratio(buffer: Buffer) -> float:
    """BE-to-other packet ratio of a buffer.

    An all-BE buffer divides by one instead of zero so the value stays finite
    and keeps growing with the BE count.
    """
    n_be, n_other = count_classes(buffer)
    if n_be + n_other == 0:
        return 0.0
    return n_be / max(n_other, 1)


def _cycle_offset(now: float, config: SchedulerConfig) -> float:
    cycle = config.cycle
    t = (now - config.slot_phase_origin) % cycle
    if cycle - t < TIME_EPS:
        t = 0.0
    return t


def current_slot(now: float, config: SchedulerConfig) -> Slot:
    if now < config.slot_phase_origin - TIME_EPS:
        raise ValueError("now precedes the slot phase origin")
    if config.be_slot == 0:
        return Slot.RT
    t = _cycle_offset(now, config)
    return Slot.RT if t < config.rt_slot - TIME_EPS else Slot.BE


def next_slot_boundary(now: float, config: SchedulerConfig) -> float:
    """Earliest time strictly after ``now`` at which the slot changes."""
    t = _cycle_offset(now, config)
    if t < config.rt_slot - TIME_EPS:
        return now + (config.rt_slot - t)
    return now + (config.cycle - t)


def next_packet_fifo(buffer: Buffer):
    if not buffer.slots:
        return None
    if buffer.n_ctrl:
        return buffer.pop_at(buffer.index_of_class(CTRL))
    return buffer.pop_at(0)


def next_packet_slotted(buffer: Buffer, now: float, config: SchedulerConfig):
    if not buffer.slots:
        return None
    if buffer.n_ctrl:
        return buffer.pop_at(buffer.index_of_class(CTRL))
    if current_slot(now, config) is Slot.RT:
        preferred, fallback = RT, BE
    else:
        preferred, fallback = BE, RT
    i = buffer.index_of_class(preferred)
    if i < 0:
        if config.strict_slots:
            return None
        i = buffer.index_of_class(fallback)
        if i < 0:
            return None
    return buffer.pop_at(i)
