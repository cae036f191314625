"""Discrete-event MANET simulator comparing stock AODV with a QoS variant.

The QoS variant steers route discovery away from relays whose buffers hold
many best-effort packets and forwards queued packets in alternating
real-time and best-effort time slots.
"""

from .packets import BE, CTRL, RT, DataPacket, TrafficClass, classify
from .queueing import Buffer, SchedulerConfig
from .packets import Mode

__version__ = "0.1.0"

__all__ = ["BE", "CTRL", "RT", "DataPacket", "TrafficClass", "classify",
           "Buffer", "SchedulerConfig", "Mode"]
