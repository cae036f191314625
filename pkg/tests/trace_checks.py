"""Whole-trace property checks shared by engine and acceptance tests.

Each checker returns a list of human-readable violations; empty means pass.
"""

import math
from collections import Counter, defaultdict

from qosaodv.metrics import DROP_EVENTS
from qosaodv.packets import CTRL, RT
from qosaodv.queueing import Slot, current_slot


def strict_slot_purity(trace, sim):
    bad = []
    for t, node, ev, pid, cls, _ in trace:
        if ev != "Dequeue" or cls is CTRL:
            continue
        sched = sim.nodes[node].sched
        slot = current_slot(t, sched)
        if (slot is Slot.RT) != (cls is RT):
            bad.append(f"{cls.short} packet {pid} left node {node} in {slot.name} slot at {t}")
    return bad


def per_class_fifo(trace):
    """Within one node and class, packets leave in the order they arrived."""
    queues = defaultdict(list)
    bad = []
    for t, node, ev, pid, cls, _ in trace:
        if pid is None:
            continue
        q = queues[(node, cls)]
        if ev == "Enqueue":
            q.append(pid)
        elif ev == "DropTail" and pid in q:
            q.remove(pid)
        elif ev == "Dequeue":
            if not q or q[0] != pid:
                bad.append(f"node {node} dequeued {pid} ahead of {q[:1]} at {t}")
                if pid in q:
                    q.remove(pid)
            else:
                q.pop(0)
    return bad


def data_occupancy(trace, capacity):
    """Replays per-node data occupancy exactly, including evictions."""
    held = defaultdict(set)
    bad = []
    for t, node, ev, pid, cls, _ in trace:
        if pid is None:
            continue
        if ev == "Enqueue":
            held[node].add(pid)
            if len(held[node]) > capacity:
                bad.append(f"node {node} holds {len(held[node])} data packets at {t}")
        elif ev in ("Dequeue", "DropTail"):
            held[node].discard(pid)
    return bad


def conservation(trace, residual):
    """generated = delivered + dropped + still in the network, per flow."""
    flow_of, gen = {}, Counter()
    out = Counter()
    for t, node, ev, pid, cls, ex in trace:
        if pid is None:
            continue
        if ev == "Generate":
            flow_of[pid] = ex["flow"]
            gen[ex["flow"]] += 1
        elif ev == "Deliver" or ev in DROP_EVENTS:
            out[flow_of[pid]] += 1
    for p in residual:
        out[p.flow_id] += 1
    return [f"flow {f}: generated {gen[f]} accounted {out[f]}"
            for f in set(gen) | set(out) if gen[f] != out[f]]


def half_duplex(trace, tx_time):
    last = {}
    bad = []
    for t, node, ev, pid, cls, _ in trace:
        if ev != "Send":
            continue
        prev = last.get(node)
        if prev is not None and t - prev < tx_time - 1e-9:
            bad.append(f"node {node} sent at {prev} and {t}")
        last[node] = t
    return bad


def path_sums(trace):
    """Rebuild every delivered request's path and re-add the sampled ratios."""
    forwards, ratios, bad = {}, {}, []
    checked = 0
    for t, node, ev, pid, cls, ex in trace:
        if ev == "RatioSample":
            ratios[(node, ex["origin"], ex["bid"])] = ex["ratio"]
        elif ev == "RreqForward":
            forwards[(node, ex["origin"], ex["bid"])] = ex
        elif ev == "RreqArrive":
            origin, bid = ex["origin"], ex["bid"]
            chain = []
            hop = ex["prev"]
            while hop != origin:
                fwd = forwards.get((hop, origin, bid))
                if fwd is None or hop in chain:
                    bad.append(f"broken path for ({origin},{bid}) at {hop}")
                    break
                chain.append(hop)
                hop = fwd["prev"]
            else:
                total = 0.0
                for relay in reversed(chain):
                    total += ratios[(relay, origin, bid)]
                if not math.isclose(total, ex["reserved_load"], rel_tol=1e-12, abs_tol=1e-15):
                    bad.append(f"({origin},{bid}) load {ex['reserved_load']} != path sum {total}")
                if ex["hop_count"] != len(chain) + 1:
                    bad.append(f"({origin},{bid}) hop_count {ex['hop_count']} != {len(chain) + 1}")
                checked += 1
    return bad, checked


def single_forward(trace):
    seen = Counter((node, ex["origin"], ex["bid"])
                   for t, node, ev, pid, cls, ex in trace if ev == "RreqForward")
    return [f"node {k[0]} forwarded ({k[1]},{k[2]}) {n} times" for k, n in seen.items() if n > 1]


def times_non_decreasing(trace):
    bad = []
    for i in range(1, len(trace)):
        if trace[i][0] < trace[i - 1][0]:
            bad.append(f"record {i} goes back in time")
            break
    return bad


def in_area(trace, width, height):
    return [f"node {node} at ({ex['x']}, {ex['y']})"
            for t, node, ev, pid, cls, ex in trace
            if ev == "MobilityUpdate" and not (0 <= ex["x"] <= width and 0 <= ex["y"] <= height)]

