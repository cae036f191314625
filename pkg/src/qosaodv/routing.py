"""AODV route discovery with optional best-effort-aware path selection.

In QoS mode every relay adds its buffer's BE-to-other ratio to the RREQ's
reserved load.  The destination gathers every copy of one request for a
short window, divides each copy's load by its hop count and answers the copy
with the smallest average.  Baseline mode answers the first copy at once and
lets intermediate nodes reply from their own fresh routes, like stock AODV.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Set, Tuple

from qosaodv.packets import Mode, RerrMessage, RrepMessage, RreqMessage

ACTIVE_ROUTE_TIMEOUT = 3.0
PATH_DISCOVERY_TIME = 3.0
DEFAULT_WINDOW = 0.010


@dataclass(slots=True)
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_seq: int
    expires_at: float
    valid: bool = True
    precursors: Set[int] = field(default_factory=set)

    def usable(self, now: float) -> bool:
        return self.valid and self.expires_at > now


class SeenCache:
    """(origin, broadcast_id) pairs already handled, with expiry."""

    __slots__ = ("entries", "lifetime")

    def __init__(self, lifetime: float = PATH_DISCOVERY_TIME):
        self.entries: Dict[Tuple[int, int], float] = {}
        self.lifetime = lifetime

    def seen(self, key, now: float) -> bool:
        exp = self.entries.get(key)
        return exp is not None and exp > now

    def add(self, key, now: float) -> None:
        self.entries[key] = now + self.lifetime

    def __contains__(self, key) -> bool:
        return key in self.entries


@dataclass(frozen=True)
class RreqCandidate:
    rreq: RreqMessage
    prev_hop: int
    arrived_at: float


@dataclass
class CollectionWindow:
    key: Tuple[int, int]
    opened_at: float
    duration: float = DEFAULT_WINDOW
    candidates: List[RreqCandidate] = field(default_factory=list)
    closed: bool = False

    @property
    def closes_at(self) -> float:
        return self.opened_at + self.duration


# process_rreq outcomes
@dataclass(frozen=True)
class Ignore:
    pass


@dataclass(frozen=True)
class Forward:
    rreq: RreqMessage
    ratio: float


@dataclass(frozen=True)
class Collect:
    window: CollectionWindow
    opened: bool


@dataclass(frozen=True)
class Reply:
    rrep: RrepMessage
    next_hop: int


# process_rrep outcomes
@dataclass(frozen=True)
class RrepForward:
    rrep: RrepMessage
    next_hop: int


@dataclass(frozen=True)
class RouteInstalled:
    destination: int


@dataclass(frozen=True)
class RrepDropped:
    reason: str


IGNORE = Ignore()


def accumulate_load(rreq: RreqMessage, node_ratio: float) -> RreqMessage:
    if node_ratio < 0:
        raise ValueError("node ratio must be non-negative")
    return replace(rreq, reserved_load=rreq.reserved_load + node_ratio,
                   hop_count=rreq.hop_count + 1)


def average_load(rreq: RreqMessage) -> float:
    if rreq.hop_count < 1:
        raise ValueError("average load needs a request that travelled at least one hop")
    return rreq.reserved_load / rreq.hop_count


def _rank(c: RreqCandidate):
    return (average_load(c.rreq), c.rreq.hop_count, c.arrived_at)


def select_best_rreq(candidates: List[RreqCandidate]) -> RreqCandidate:
    """Least average load wins; then fewer hops; then earlier arrival."""
    if not candidates:
        raise ValueError("select_best_rreq needs at least one candidate")
    keys = {c.rreq.key for c in candidates}
    if len(keys) != 1:
        raise ValueError(f"candidates mix several requests: {sorted(keys)}")
    return min(candidates, key=_rank)


class AodvAgent:
    """Routing state of one node.

    ``load_probe`` returns the node's current buffer ratio; the engine binds
    it to the node's buffer.
    """

    def __init__(self, node_id: int, mode: Mode = Mode.QOS,
                 window: float = DEFAULT_WINDOW,
                 load_probe: Optional[Callable[[], float]] = None,
                 route_timeout: float = ACTIVE_ROUTE_TIMEOUT):
        self.node_id = node_id
        self.mode = Mode.parse(mode)
        # Baseline AODV replies to the first request that shows up.
        self.window = window if self.mode is Mode.QOS else 0.0
        self.load_probe = load_probe or (lambda: 0.0)
        self.route_timeout = route_timeout
        self.seq = 0
        self.broadcast_id = 0
        self.table: Dict[int, RouteEntry] = {}
        self.seen = SeenCache()
        self.windows: Dict[Tuple[int, int], CollectionWindow] = {}

    # -- route table -----------------------------------------------------

    def lookup(self, dst: int, now: float) -> Optional[RouteEntry]:
        e = self.table.get(dst)
        if e is not None and e.valid and e.expires_at > now:
            return e
        return None

    def next_hop(self, dst: int, now: float) -> int:
        """Next hop toward ``dst`` (refreshing the route), or -1."""
        e = self.table.get(dst)
        if e is not None and e.valid and e.expires_at > now:
            e.expires_at = now + self.route_timeout
            return e.next_hop
        return -1

    def update_route(self, dst: int, next_hop: int, hop_count: int,
                     dest_seq: int, now: float, lifetime: Optional[float] = None) -> RouteEntry:
        expires = now + (self.route_timeout if lifetime is None else lifetime)
        e = self.table.get(dst)
        if e is None:
            e = RouteEntry(dst, next_hop, hop_count, dest_seq, expires)
            self.table[dst] = e
            return e
        stale = not e.usable(now)
        if (stale or dest_seq > e.dest_seq
                or (dest_seq == e.dest_seq and hop_count < e.hop_count)
                or e.next_hop == next_hop):
            e.next_hop = next_hop
            e.hop_count = hop_count
            e.dest_seq = max(dest_seq, e.dest_seq) if not stale else dest_seq
            e.valid = True
            e.expires_at = max(e.expires_at, expires) if not stale else expires
        return e

    # -- discovery ---------------------------------------------------------

    def originate_rreq(self, destination: int, now: float) -> Optional[RreqMessage]:
        """Start a discovery; None when a usable route already exists."""
        if self.lookup(destination, now) is not None:
            return None
        self.seq += 1
        self.broadcast_id += 1
        known = self.table.get(destination)
        rreq = RreqMessage(origin=self.node_id, origin_seq=self.seq,
                           broadcast_id=self.broadcast_id, destination=destination,
                           dest_seq_known=known.dest_seq if known else None,
                           hop_count=0, reserved_load=0.0, issued_at=now)
        # the origin never re-handles its own flood
        self.seen.add(rreq.key, now)
        return rreq

    def process_rreq(self, rreq: RreqMessage, prev_hop: int, now: float):
        key = rreq.key
        if rreq.origin == self.node_id:
            return IGNORE
        if rreq.destination == self.node_id:
            return self._collect(rreq, prev_hop, now)
        if self.seen.seen(key, now):
            return IGNORE
        self.seen.add(key, now)
        ratio = self.load_probe()
        fwd = accumulate_load(rreq, ratio)
        self.update_route(rreq.origin, prev_hop, fwd.hop_count, rreq.origin_seq, now)
        if self.mode is Mode.BASELINE:
            cached = self.lookup(rreq.destination, now)
            if cached is not None and (rreq.dest_seq_known is None
                                       or cached.dest_seq >= rreq.dest_seq_known):
                cached.precursors.add(prev_hop)
                self.table[rreq.origin].precursors.add(cached.next_hop)
                rrep = RrepMessage(destination=rreq.destination, dest_seq=cached.dest_seq,
                                   origin=rreq.origin, hop_count=cached.hop_count,
                                   lifetime=cached.expires_at - now)
                return Reply(rrep, prev_hop)
        return Forward(fwd, ratio)

    def _collect(self, rreq: RreqMessage, prev_hop: int, now: float):
        key = rreq.key
        win = self.windows.get(key)
        if win is None:
            if self.seen.seen(key, now):
                return IGNORE
            self.seen.add(key, now)
            win = CollectionWindow(key, now, self.window)
            self.windows[key] = win
            opened = True
        elif win.closed:
            return IGNORE
        else:
            opened = False
        arrived = replace(rreq, hop_count=rreq.hop_count + 1)
        win.candidates.append(RreqCandidate(arrived, prev_hop, now))
        if self.window <= 0:
            rrep, nh = self.close_collection_window(win, now)
            return Reply(rrep, nh)
        return Collect(win, opened)

    def close_collection_window(self, window: CollectionWindow, now: float):
        """Answer the winning request; return (RrepMessage, next hop)."""
        if window.closed:
            raise ValueError(f"window {window.key} already closed")
        if not window.candidates:
            raise ValueError(f"window {window.key} has no candidates")
        window.closed = True
        del self.windows[window.key]
        best = select_best_rreq(window.candidates)
        rreq = best.rreq
        self.update_route(rreq.origin, best.prev_hop, rreq.hop_count, rreq.origin_seq, now)
        if rreq.dest_seq_known is not None and rreq.dest_seq_known > self.seq:
            self.seq = rreq.dest_seq_known
        self.seq += 1
        rrep = RrepMessage(destination=self.node_id, dest_seq=self.seq,
                           origin=rreq.origin, hop_count=0,
                           lifetime=self.route_timeout)
        return rrep, best.prev_hop

    def process_rrep(self, rrep: RrepMessage, prev_hop: int, now: float):
        hops = rrep.hop_count + 1
        fwd_entry = self.update_route(rrep.destination, prev_hop, hops, rrep.dest_seq,
                                      now, rrep.lifetime)
        if rrep.origin == self.node_id:
            return RouteInstalled(rrep.destination)
        rev = self.lookup(rrep.origin, now)
        if rev is None:
            return RrepDropped("no reverse route")
        fwd_entry.precursors.add(rev.next_hop)
        rev.precursors.add(prev_hop)
        rev.expires_at = max(rev.expires_at, now + self.route_timeout)
        return RrepForward(replace(rrep, hop_count=hops), rev.next_hop)

    # -- maintenance -------------------------------------------------------

    def handle_link_break(self, dead_neighbor: int, now: float) -> Optional[RerrMessage]:
        lost = []
        notify = False
        for dst, e in self.table.items():
            if e.valid and e.next_hop == dead_neighbor:
                e.valid = False
                e.dest_seq += 1
                lost.append((dst, e.dest_seq))
                if e.precursors:
                    notify = True
        if lost and notify:
            return RerrMessage(tuple(lost))
        return None

    def process_rerr(self, rerr: RerrMessage, prev_hop: int, now: float) -> Optional[RerrMessage]:
        lost = []
        for dst, seq in rerr.unreachable:
            e = self.table.get(dst)
            if e is not None and e.valid and e.next_hop == prev_hop:
                e.valid = False
                e.dest_seq = max(e.dest_seq, seq)
                if e.precursors:
                    lost.append((dst, e.dest_seq))
        return RerrMessage(tuple(lost)) if lost else None
