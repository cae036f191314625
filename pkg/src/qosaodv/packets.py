"""Packet and message types shared by every layer of the simulator."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple, Union


class ConfigError(ValueError):
    """Raised for malformed scenarios or references to unknown flows."""


class TrafficClass(enum.IntEnum):
    REALTIME = 0
    BESTEFFORT = 1
    CONTROL = 2

    @property
    def short(self) -> str:
        return _SHORT[self]

    @classmethod
    def from_short(cls, text: str) -> "TrafficClass":
        try:
            return _FROM_SHORT[text]
        except KeyError:
            raise ValueError(f"unknown traffic class {text!r}") from None


_SHORT = {
    TrafficClass.REALTIME: "RT",
    TrafficClass.BESTEFFORT: "BE",
    TrafficClass.CONTROL: "CTRL",
}
_FROM_SHORT = {v: k for k, v in _SHORT.items()}

RT = TrafficClass.REALTIME
BE = TrafficClass.BESTEFFORT
CTRL = TrafficClass.CONTROL

BROADCAST = -1

DEFAULT_SIZES = {RT: 512, BE: 1000}


class DataPacket:
    """A unicast payload packet.

    ``current_hop_enqueued_at`` is rewritten each time the packet enters a
    node's buffer; ``packet_id`` and ``cls`` are fixed at creation.
    """

    __slots__ = ("packet_id", "flow_id", "src", "dst", "cls", "size",
                 "created_at", "current_hop_enqueued_at")

    def __init__(self, packet_id: int, flow_id: int, src: int, dst: int,
                 cls: TrafficClass, size: int, created_at: float):
        if cls is CTRL:
            raise ValueError("data packets are RealTime or BestEffort")
        self.packet_id = packet_id
        self.flow_id = flow_id
        self.src = src
        self.dst = dst
        self.cls = cls
        self.size = size
        self.created_at = created_at
        self.current_hop_enqueued_at = created_at

    def __repr__(self) -> str:
        return (f"DataPacket(id={self.packet_id}, flow={self.flow_id}, "
                f"{self.src}->{self.dst}, {self.cls.short})")

    def __eq__(self, other):
        if not isinstance(other, DataPacket):
            return NotImplemented
        return all(getattr(self, s) == getattr(other, s) for s in self.__slots__)

    __hash__ = None


@dataclass(frozen=True)
class RreqMessage:
    origin: int
    origin_seq: int
    broadcast_id: int
    destination: int
    dest_seq_known: Optional[int]
    hop_count: int = 0
    reserved_load: float = 0.0
    issued_at: float = 0.0

    cls = CTRL

    @property
    def key(self) -> Tuple[int, int]:
        return (self.origin, self.broadcast_id)


@dataclass(frozen=True)
class RrepMessage:
    destination: int
    dest_seq: int
    origin: int
    hop_count: int
    lifetime: float

    cls = CTRL


@dataclass(frozen=True)
class RerrMessage:
    unreachable: Tuple[Tuple[int, int], ...]

    cls = CTRL

    def __post_init__(self):
        if not self.unreachable:
            raise ValueError("RERR must list at least one destination")


class Frame:
    """A control message queued for transmission to ``next_hop``.

    ``next_hop`` is ``BROADCAST`` for RREQ/RERR floods.
    """

    __slots__ = ("msg", "next_hop", "current_hop_enqueued_at")

    cls = CTRL
    packet_id = None

    def __init__(self, msg, next_hop: int):
        self.msg = msg
        self.next_hop = next_hop
        self.current_hop_enqueued_at = 0.0

    def __repr__(self) -> str:
        return f"Frame({type(self.msg).__name__}, to={self.next_hop})"


@dataclass
class FlowRegistry:
    """Maps flow ids to their declared traffic class."""

    classes: Dict[int, TrafficClass] = field(default_factory=dict)

    @classmethod
    def from_flows(cls, flows) -> "FlowRegistry":
        return cls({f.flow_id: f.cls for f in flows})

    def register(self, flow_id: int, cls_: TrafficClass) -> None:
        if cls_ is CTRL:
            raise ConfigError(f"flow {flow_id}: data flows cannot be Control")
        self.classes[flow_id] = cls_


def classify(flow_id: int, flow_table: Mapping[int, TrafficClass] | FlowRegistry) -> TrafficClass:
    table = flow_table.classes if isinstance(flow_table, FlowRegistry) else flow_table
    try:
        return table[flow_id]
    except KeyError:
        raise ConfigError(f"flow {flow_id} is not registered") from None


class Mode(enum.Enum):
    BASELINE = "baseline"
    QOS = "qos"

    @classmethod
    def parse(cls, text: Union[str, "Mode"]) -> "Mode":
        if isinstance(text, Mode):
            return text
        key = text.strip().lower()
        aliases = {"baseline": cls.BASELINE, "qos": cls.QOS,
                   "qosimproved": cls.QOS, "improved": cls.QOS}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown protocol mode {text!r}") from None
