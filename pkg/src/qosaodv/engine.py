"""Discrete-event kernel: nodes, radio, traffic and the main loop.

The MAC is contention free and half duplex.  Each node sends at most one
packet per ``tx_time`` on its own transmission grid, which starts at the
node's random start offset.  Unicast to a neighbour outside radio range is
how link breaks are discovered.
"""

from __future__ import annotations

import enum
import heapq
import math
import random
from dataclasses import dataclass
from typing import Dict, List, Optional

# Shared value types come in by absolute name so that the compiled build of
# this module (qosaodv._compiled.engine) uses the very same classes.
from qosaodv.metrics import format_pairs, rrep_extra, rreq_extra
from qosaodv.packets import (BE, BROADCAST, CTRL, DEFAULT_SIZES, RT, DataPacket, Frame,
                             RerrMessage, RrepMessage, RreqMessage, TrafficClass)
from .mobility import MobilityState, RadioModel, position_at
from .queueing import Buffer, SchedulerConfig, TIME_EPS, current_slot, next_slot_boundary, Slot
from .routing import (AodvAgent, Collect, Forward, Mode, Reply, RouteInstalled,
                      RrepDropped, RrepForward)

DISCOVERY_TIMEOUT = 0.5
RREQ_RETRIES = 2
PENDING_CAPACITY = 64
RERR_HOLDOFF = 0.1


class EventKind(enum.IntEnum):
    SIM_END = 0
    PACKET_ARRIVAL = 1
    TRANSMIT_OPPORTUNITY = 2
    WINDOW_CLOSE = 3
    MOBILITY_UPDATE = 4
    TRAFFIC_TICK = 5
    ROUTE_TIMEOUT = 6


_END = int(EventKind.SIM_END)
_ARR = int(EventKind.PACKET_ARRIVAL)
_TXO = int(EventKind.TRANSMIT_OPPORTUNITY)
_WIN = int(EventKind.WINDOW_CLOSE)
_MOB = int(EventKind.MOBILITY_UPDATE)
_TICK = int(EventKind.TRAFFIC_TICK)
_RTO = int(EventKind.ROUTE_TIMEOUT)

# transmitter states
_IDLE, _SENDING, _SLEEPING = 0, 1, 2


@dataclass(frozen=True)
class Event:
    """Public view of a queued event; the loop itself keeps plain tuples."""

    fire_at: float
    seq: int
    kind: EventKind
    payload: tuple = ()


@dataclass(frozen=True)
class TrafficFlow:
    flow_id: int
    src: int
    dst: int
    cls: TrafficClass
    rate: float
    packet_size: int
    start_at: float
    stop_at: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError(f"flow {self.flow_id}: rate must be positive")
        if not self.start_at < self.stop_at:
            raise ValueError(f"flow {self.flow_id}: start_at must precede stop_at")
        if self.cls is CTRL:
            raise ValueError(f"flow {self.flow_id}: data flows are RT or BE")
        if self.src == self.dst:
            raise ValueError(f"flow {self.flow_id}: src equals dst")

    def tick_time(self, k: int) -> float:
        return self.start_at + k / self.rate


class Node:
    __slots__ = ("nid", "buffer", "agent", "mob", "phase", "tx", "sched",
                 "slotted", "strict", "state", "token", "pending",
                 "n_pending", "discovery", "rerr_sent")

    def __init__(self, nid: int, buffer: Buffer, agent: AodvAgent, mob: MobilityState,
                 phase: float, tx: float, sched: Optional[SchedulerConfig]):
        self.nid = nid
        self.buffer = buffer
        self.agent = agent
        self.mob = mob
        self.phase = phase
        self.tx = tx
        self.sched = sched
        self.slotted = sched is not None
        self.strict = sched is not None and sched.strict_slots
        self.state = _IDLE
        self.token = 0
        self.pending: Dict[int, List[DataPacket]] = {}
        self.n_pending = 0
        self.discovery: Dict[int, int] = {}
        self.rerr_sent: Dict[int, float] = {}

    def next_grid(self, now: float) -> float:
        k = math.ceil((now - self.phase) / self.tx - 1e-6)
        if k < 0:
            k = 0
        # the tolerance can land a rounding error before now
        return max(now, self.phase + k * self.tx)

    def eligible(self, cls, now: float) -> bool:
        if cls is CTRL or not self.strict:
            return True
        slot = current_slot(now, self.sched)
        return (slot is Slot.RT) == (cls is RT)


class Simulator:
    """One run of one scenario at one pause time in one protocol mode."""

    def __init__(self, *, node_count: int = 15, width: float = 700.0, height: float = 600.0,
                 sim_time: float = 40.0, pause_time: float = 0.0,
                 speed_min: float = 1.0, speed_max: float = 20.0,
                 radio: RadioModel = RadioModel(), queue_capacity: int = 20,
                 mode: Mode = Mode.QOS, scheduler: SchedulerConfig = SchedulerConfig(),
                 collection_window: float = 0.010, flows=(), seed: int = 1,
                 positions=None, static: bool = False):
        self.sim_time = sim_time
        self.mode = Mode.parse(mode)
        self.radio = radio
        self.range2 = radio.range * radio.range
        self.tx = radio.tx_time
        self.flows = list(flows)
        self.trace: list = []
        self.heap: list = []
        self.seq = 0
        self.now = 0.0
        self.next_pid = 1
        self.ended = False

        layout = random.Random(f"{seed}/layout")
        cycle = scheduler.cycle
        self.nodes: List[Node] = []
        for i in range(node_count):
            nrng = random.Random(f"{seed}/node/{i}")
            if positions is not None:
                p = tuple(positions[i])
                mob = MobilityState(p, p, speed_min, 0.0,
                                    math.inf if static else pause_time, nrng,
                                    width, height, speed_min, speed_max)
            else:
                mob = MobilityState.initial(nrng, math.inf if static else pause_time,
                                            width, height, speed_min, speed_max)
            phase = layout.uniform(0.0, cycle)
            # snap to a microsecond so grid arithmetic stays clean
            phase = round(phase, 6)
            sched = scheduler.with_origin(phase) if self.mode is Mode.QOS else None
            buf = Buffer(queue_capacity)
            agent = AodvAgent(i, self.mode, collection_window, buf.ratio)
            self.nodes.append(Node(i, buf, agent, mob, phase, self.tx, sched))

    # -- plumbing ----------------------------------------------------------

    def schedule(self, t: float, kind: int, a=None, b=None, c=None):
        if t < self.now:
            raise RuntimeError(f"event scheduled in the past: {t} < {self.now}")
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, kind, a, b, c))

    def position(self, nid: int, now: float):
        return position_at(self.nodes[nid].mob, now)

    def linked(self, a: int, b: int, now: float) -> bool:
        pa = position_at(self.nodes[a].mob, now)
        pb = position_at(self.nodes[b].mob, now)
        dx = pa[0] - pb[0]
        dy = pa[1] - pb[1]
        return dx * dx + dy * dy <= self.range2

    # -- run ---------------------------------------------------------------

    def run(self) -> list:
        self.schedule(self.sim_time, _END)
        for n in self.nodes:
            self.schedule(0.0, _MOB, n.nid)
        for idx, f in enumerate(self.flows):
            if f.start_at < self.sim_time:
                self.schedule(f.start_at, _TICK, idx, 0)
        heap = self.heap
        pop = heapq.heappop
        trace = self.trace
        nodes = self.nodes
        while heap:
            t, _, kind, a, b, c = pop(heap)
            self.now = t
            if kind == _ARR:
                self.on_arrival(nodes[a], b, c, t)
            elif kind == _TXO:
                node = nodes[a]
                if b == node.token:
                    self.on_opportunity(node, t)
            elif kind == _TICK:
                self.on_tick(a, b, t)
            elif kind == _WIN:
                self.on_window(nodes[a], b, t)
            elif kind == _RTO:
                self.on_route_timeout(nodes[a], b, c, t)
            elif kind == _MOB:
                self.on_mobility(nodes[a], t)
            else:
                self.ended = True
                break
        return trace

    # -- traffic -----------------------------------------------------------

    def on_tick(self, idx: int, k: int, now: float):
        f = self.flows[idx]
        if now >= f.stop_at:
            return
        pid = self.next_pid
        self.next_pid = pid + 1
        pkt = DataPacket(pid, f.flow_id, f.src, f.dst, f.cls, f.packet_size, now)
        self.trace.append((now, f.src, "Generate", pid, f.cls,
                           {"flow": f.flow_id, "dst": f.dst, "size": f.packet_size}))
        self.originate_data(self.nodes[f.src], pkt, now)
        nxt = f.tick_time(k + 1)
        if nxt < f.stop_at and nxt < self.sim_time:
            self.schedule(nxt, _TICK, idx, k + 1)

    def originate_data(self, node: Node, pkt: DataPacket, now: float):
        if node.agent.lookup(pkt.dst, now) is not None:
            dropped = node.buffer.push(pkt, now)
            if dropped is pkt:
                self.trace.append((now, node.nid, "DropSource", pkt.packet_id, pkt.cls, None))
                return
            self.trace.append((now, node.nid, "Enqueue", pkt.packet_id, pkt.cls, None))
            if dropped is not None:
                self.trace.append((now, node.nid, "DropTail", dropped.packet_id, dropped.cls, None))
            self.wake(node, pkt.cls, now)
        else:
            self.hold(node, pkt, now)

    def hold(self, node: Node, pkt: DataPacket, now: float):
        if node.n_pending >= PENDING_CAPACITY:
            self.trace.append((now, node.nid, "DropSource", pkt.packet_id, pkt.cls,
                               {"reason": "pending"}))
            return
        node.pending.setdefault(pkt.dst, []).append(pkt)
        node.n_pending += 1
        if pkt.dst not in node.discovery:
            self.start_discovery(node, pkt.dst, now, 0)

    def start_discovery(self, node: Node, dst: int, now: float, attempt: int):
        rreq = node.agent.originate_rreq(dst, now)
        if rreq is None:
            self.release(node, dst, now)
            return
        node.discovery[dst] = rreq.broadcast_id
        self.trace.append((now, node.nid, "RreqOriginate", None, CTRL, rreq_extra(rreq)))
        self.send_control(node, Frame(rreq, BROADCAST), now)
        self.schedule(now + DISCOVERY_TIMEOUT, _RTO, node.nid, dst, (rreq.broadcast_id, attempt))

    def on_route_timeout(self, node: Node, dst: int, info, now: float):
        bid, attempt = info
        if node.discovery.get(dst) != bid:
            return
        del node.discovery[dst]
        if node.agent.lookup(dst, now) is not None:
            self.release(node, dst, now)
            return
        if attempt < RREQ_RETRIES and node.pending.get(dst):
            self.start_discovery(node, dst, now, attempt + 1)
            return
        for pkt in node.pending.pop(dst, ()):
            node.n_pending -= 1
            self.trace.append((now, node.nid, "DropRoute", pkt.packet_id, pkt.cls,
                               {"reason": "discovery"}))

    def release(self, node: Node, dst: int, now: float):
        node.discovery.pop(dst, None)
        held = node.pending.pop(dst, ())
        for pkt in held:
            node.n_pending -= 1
            dropped = node.buffer.push(pkt, now)
            if dropped is pkt:
                self.trace.append((now, node.nid, "DropSource", pkt.packet_id, pkt.cls, None))
                continue
            self.trace.append((now, node.nid, "Enqueue", pkt.packet_id, pkt.cls, None))
            if dropped is not None:
                self.trace.append((now, node.nid, "DropTail", dropped.packet_id, dropped.cls, None))
            self.wake(node, pkt.cls, now)

    # -- transmitter -------------------------------------------------------

    def wake(self, node: Node, cls, now: float):
        st = node.state
        if st == _SENDING:
            return
        if st == _SLEEPING and not node.eligible(cls, now):
            return
        node.state = _SENDING
        node.token += 1
        self.schedule(node.next_grid(now), _TXO, node.nid, node.token)

    def send_control(self, node: Node, frame: Frame, now: float):
        dropped = node.buffer.push(frame, now)
        if dropped is frame:
            return
        if dropped is not None:
            self.trace.append((now, node.nid, "DropTail", dropped.packet_id, dropped.cls, None))
        self.wake(node, CTRL, now)

    def select(self, node: Node, now: float):
        buf = node.buffer
        slots = buf.slots
        if not slots:
            return None
        if buf.n_ctrl:
            return buf.pop_at(buf.index_of_class(CTRL))
        if not node.slotted:
            return buf.pop_at(0)
        if current_slot(now, node.sched) is Slot.RT:
            i = buf.index_of_class(RT)
            if i < 0 and not node.strict:
                i = buf.index_of_class(BE)
        else:
            i = buf.index_of_class(BE)
            if i < 0 and not node.strict:
                i = buf.index_of_class(RT)
        if i < 0:
            return None
        return buf.pop_at(i)

    def on_opportunity(self, node: Node, now: float):
        trace = self.trace
        nid = node.nid
        while True:
            pkt = self.select(node, now)
            if pkt is None:
                if node.buffer.slots and node.strict:
                    node.state = _SLEEPING
                    node.token += 1
                    self.schedule(next_slot_boundary(now, node.sched), _TXO, nid, node.token)
                else:
                    node.state = _IDLE
                return
            cls = pkt.cls
            if cls is CTRL:
                trace.append((now, nid, "Dequeue", None, CTRL, None))
                if pkt.next_hop == BROADCAST:
                    self.broadcast(node, pkt.msg, now)
                else:
                    self.unicast(node, pkt.next_hop, pkt.msg, None, now)
                break
            pid = pkt.packet_id
            trace.append((now, nid, "Dequeue", pid, cls, None))
            nh = node.agent.next_hop(pkt.dst, now)
            if nh < 0:
                if pkt.src == nid:
                    self.hold(node, pkt, now)
                else:
                    trace.append((now, nid, "DropRoute", pid, cls, {"reason": "noroute"}))
                    self.route_error(node, pkt.dst, now)
                continue
            self.unicast(node, nh, pkt, pid, now)
            break
        node.state = _SENDING
        node.token += 1
        self.schedule(now + self.tx, _TXO, nid, node.token)

    def unicast(self, node: Node, nh: int, obj, pid, now: float):
        nid = node.nid
        if self.linked(nid, nh, now):
            cls = obj.cls
            self.trace.append((now, nid, "Send", pid, cls, {"to": nh}))
            self.schedule(now + self.tx, _ARR, nh, obj, nid)
            return
        cls = obj.cls
        self.trace.append((now, nid, "LinkBreak", pid, cls, {"to": nh}))
        rerr = node.agent.handle_link_break(nh, now)
        if rerr is not None:
            self.trace.append((now, nid, "RerrSend", None, CTRL,
                               {"unreachable": format_pairs(rerr.unreachable)}))
            self.send_control(node, Frame(rerr, BROADCAST), now)

    def broadcast(self, node: Node, msg, now: float):
        nid = node.nid
        px, py = position_at(node.mob, now)
        r2 = self.range2
        t = now + self.tx
        self.trace.append((now, nid, "Send", None, CTRL, {"to": BROADCAST}))
        for other in self.nodes:
            if other is node:
                continue
            qx, qy = position_at(other.mob, now)
            dx = px - qx
            dy = py - qy
            if dx * dx + dy * dy <= r2:
                self.schedule(t, _ARR, other.nid, msg, nid)

    def route_error(self, node: Node, dst: int, now: float):
        last = node.rerr_sent.get(dst)
        if last is not None and now - last < RERR_HOLDOFF:
            return
        node.rerr_sent[dst] = now
        e = node.agent.table.get(dst)
        seq = e.dest_seq if e is not None else 0
        rerr = RerrMessage(((dst, seq),))
        self.trace.append((now, node.nid, "RerrSend", None, CTRL,
                           {"unreachable": format_pairs(rerr.unreachable)}))
        self.send_control(node, Frame(rerr, BROADCAST), now)

    # -- reception ---------------------------------------------------------

    def on_arrival(self, node: Node, obj, sender: int, now: float):
        cls = obj.cls
        if cls is not CTRL:
            nid = node.nid
            if obj.dst == nid:
                self.trace.append((now, nid, "Deliver", obj.packet_id, cls, None))
                return
            if node.agent.lookup(obj.dst, now) is None:
                self.trace.append((now, nid, "DropRoute", obj.packet_id, cls, {"reason": "noroute"}))
                self.route_error(node, obj.dst, now)
                return
            dropped = node.buffer.push(obj, now)
            if dropped is obj:
                self.trace.append((now, nid, "DropTail", obj.packet_id, cls, None))
                return
            self.trace.append((now, nid, "Enqueue", obj.packet_id, cls, None))
            if dropped is not None:
                self.trace.append((now, nid, "DropTail", dropped.packet_id, dropped.cls, None))
            self.wake(node, cls, now)
            return
        if isinstance(obj, RreqMessage):
            self.on_rreq(node, obj, sender, now)
        elif isinstance(obj, RrepMessage):
            self.on_rrep(node, obj, sender, now)
        else:
            out = node.agent.process_rerr(obj, sender, now)
            if out is not None:
                self.trace.append((now, node.nid, "RerrSend", None, CTRL,
                                   {"unreachable": format_pairs(out.unreachable)}))
                self.send_control(node, Frame(out, BROADCAST), now)

    def on_rreq(self, node: Node, rreq: RreqMessage, sender: int, now: float):
        act = node.agent.process_rreq(rreq, sender, now)
        nid = node.nid
        if isinstance(act, Forward):
            self.trace.append((now, nid, "RatioSample", None, None,
                               {"ratio": act.ratio, "origin": rreq.origin,
                                "bid": rreq.broadcast_id}))
            ex = rreq_extra(act.rreq)
            ex["prev"] = sender
            self.trace.append((now, nid, "RreqForward", None, CTRL, ex))
            self.send_control(node, Frame(act.rreq, BROADCAST), now)
        elif isinstance(act, Collect):
            ex = rreq_extra(act.window.candidates[-1].rreq)
            ex["prev"] = sender
            self.trace.append((now, nid, "RreqArrive", None, CTRL, ex))
            if act.opened:
                self.schedule(act.window.closes_at, _WIN, nid, act.window)
        elif isinstance(act, Reply):
            if rreq.destination == nid:
                ex = rreq_extra(rreq)
                ex["hop_count"] = rreq.hop_count + 1
                ex["prev"] = sender
                self.trace.append((now, nid, "RreqArrive", None, CTRL, ex))
            self.reply(node, act.rrep, act.next_hop, now)

    def on_window(self, node: Node, window, now: float):
        rrep, nh = node.agent.close_collection_window(window, now)
        self.reply(node, rrep, nh, now)

    def reply(self, node: Node, rrep: RrepMessage, nh: int, now: float):
        ex = rrep_extra(rrep)
        ex["to"] = nh
        self.trace.append((now, node.nid, "RrepSend", None, CTRL, ex))
        self.send_control(node, Frame(rrep, nh), now)

    def on_rrep(self, node: Node, rrep: RrepMessage, sender: int, now: float):
        act = node.agent.process_rrep(rrep, sender, now)
        if isinstance(act, RrepForward):
            ex = rrep_extra(act.rrep)
            ex["to"] = act.next_hop
            self.trace.append((now, node.nid, "RrepSend", None, CTRL, ex))
            self.send_control(node, Frame(act.rrep, act.next_hop), now)
        elif isinstance(act, RouteInstalled):
            self.trace.append((now, node.nid, "RouteInstalled", None, CTRL,
                               {"dst": rrep.destination, "via": sender,
                                "hop_count": rrep.hop_count + 1}))
            self.release(node, rrep.destination, now)
        else:
            self.trace.append((now, node.nid, "RrepDrop", None, CTRL, {"reason": act.reason}))

    # -- mobility ----------------------------------------------------------

    def on_mobility(self, node: Node, now: float):
        mob = node.mob
        mob.advance(now)
        x, y = position_at(mob, now)
        self.trace.append((now, node.nid, "MobilityUpdate", None, None, {"x": x, "y": y}))
        nxt = mob.arrive_at if now < mob.arrive_at else mob.pause_until
        if nxt < self.sim_time:
            self.schedule(nxt, _MOB, node.nid)

    # -- fixtures ----------------------------------------------------------

    def preload(self, nid: int, cls, dst: int, count: int, flow_id: int = 0) -> List[DataPacket]:
        """Queue ``count`` data packets at ``nid`` before the run starts.

        The packets get Generate records like any other but do not wake the
        transmitter, so they stay put until the node has something else to
        send.  Used to give relays a known buffer composition.
        """
        if self.heap:
            raise RuntimeError("preload must happen before run()")
        node = self.nodes[nid]
        out = []
        for _ in range(count):
            pid = self.next_pid
            self.next_pid = pid + 1
            pkt = DataPacket(pid, flow_id, nid, dst, cls, DEFAULT_SIZES[cls], 0.0)
            if node.buffer.push(pkt, 0.0) is not None:
                raise ValueError(f"node {nid} buffer cannot hold {count} packets")
            self.trace.append((0.0, nid, "Generate", pid, cls,
                               {"flow": flow_id, "dst": dst, "size": pkt.size}))
            self.trace.append((0.0, nid, "Enqueue", pid, cls, None))
            out.append(pkt)
        return out

    # -- end-of-run accounting --------------------------------------------

    def residual_packets(self) -> List[DataPacket]:
        """Data packets still queued, held or on the air when the run stopped."""
        out = []
        for n in self.nodes:
            out.extend(p for p in n.buffer.slots if p.cls is not CTRL)
            for held in n.pending.values():
                out.extend(held)
        for ev in self.heap:
            if ev[2] == _ARR and isinstance(ev[4], DataPacket):
                out.append(ev[4])
        return out


