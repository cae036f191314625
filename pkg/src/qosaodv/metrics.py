"""Trace records, per-class aggregation, A/B comparison and CSV export."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

from .packets import (BE, CTRL, RT, DataPacket, RerrMessage, RrepMessage,
                      RreqMessage, TrafficClass)

DATA_CLASSES = (RT, BE)
DROP_EVENTS = frozenset({"DropTail", "DropSource", "DropRoute", "LinkBreak"})
CSV_COLUMNS = ("series", "pause_time_s", "bucket_end_s", "class",
               "cumulative_delivered", "mean_delay_s")


class TraceIntegrityError(ValueError):
    pass


class TraceRecord(NamedTuple):
    time: float
    node: int
    event: str
    packet_id: Optional[int]
    cls: Optional[TrafficClass]
    extra: Optional[dict]


# -- message <-> extra fields ---------------------------------------------

def rreq_extra(r: RreqMessage) -> dict:
    return {"origin": r.origin, "origin_seq": r.origin_seq, "bid": r.broadcast_id,
            "dst": r.destination, "dest_seq_known": r.dest_seq_known,
            "hop_count": r.hop_count, "reserved_load": r.reserved_load,
            "issued_at": r.issued_at}


def rrep_extra(r: RrepMessage) -> dict:
    return {"dst": r.destination, "dest_seq": r.dest_seq, "origin": r.origin,
            "hop_count": r.hop_count, "lifetime": r.lifetime}


def format_pairs(pairs) -> str:
    return ";".join(f"{d}:{s}" for d, s in pairs)


def parse_pairs(text: str) -> Tuple[Tuple[int, int], ...]:
    return tuple(tuple(int(v) for v in item.split(":")) for item in text.split(";"))


def rreq_from_extra(ex: dict) -> RreqMessage:
    return RreqMessage(ex["origin"], ex["origin_seq"], ex["bid"], ex["dst"],
                       ex["dest_seq_known"], ex["hop_count"], ex["reserved_load"],
                       ex["issued_at"])


def rrep_from_extra(ex: dict) -> RrepMessage:
    return RrepMessage(ex["dst"], ex["dest_seq"], ex["origin"], ex["hop_count"],
                       ex["lifetime"])


def rerr_extra(r: RerrMessage) -> dict:
    return {"unreachable": format_pairs(r.unreachable)}


def rerr_from_extra(ex: dict) -> RerrMessage:
    return RerrMessage(parse_pairs(ex["unreachable"]))


def generate_record(p: DataPacket) -> tuple:
    return (p.created_at, p.src, "Generate", p.packet_id, p.cls,
            {"flow": p.flow_id, "dst": p.dst, "size": p.size})


def packet_from_record(rec) -> DataPacket:
    t, node, event, pid, cls, ex = rec
    if event != "Generate":
        raise ValueError(f"not a Generate record: {event}")
    return DataPacket(pid, ex["flow"], node, ex["dst"], cls, ex["size"], t)


# -- trace file -------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_value(text: str):
    if text == "-":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def format_record(rec) -> str:
    t, node, event, pid, cls, ex = rec
    parts = [repr(float(t)), str(node), event, _fmt(pid),
             cls.short if cls is not None else "-"]
    if ex:
        parts.extend(f"{k}={_fmt(v)}" for k, v in ex.items())
    return "\t".join(parts)


def parse_record(line: str) -> TraceRecord:
    parts = line.rstrip("\n").split("\t")
    if len(parts) < 5:
        raise TraceIntegrityError(f"malformed trace line: {line!r}")
    t, node, event, pid, cls = parts[:5]
    extra = None
    if len(parts) > 5:
        extra = {}
        for item in parts[5:]:
            k, _, v = item.partition("=")
            extra[k] = _parse_value(v)
    return TraceRecord(float(t), int(node), event,
                       None if pid == "-" else int(pid),
                       None if cls == "-" else TrafficClass.from_short(cls), extra)


def write_trace(records: Iterable, path) -> None:
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(format_record(rec))
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write trace {path}: {exc.strerror or exc}") from exc


def read_trace(path) -> List[TraceRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        return [parse_record(line) for line in fh if line.strip()]


# -- aggregation ------------------------------------------------------------

@dataclass
class RunSummary:
    generated: Dict[TrafficClass, int]
    delivered: Dict[TrafficClass, int]
    dropped: Dict[TrafficClass, int]
    mean_delay: Dict[TrafficClass, Optional[float]]
    mean_queue_delay: Dict[TrafficClass, Optional[float]]
    series: List[Tuple[float, Dict[TrafficClass, int]]]
    label: str = "run"
    pause_time: Optional[float] = None
    fingerprint: str = ""

    def cumulative(self, cls: TrafficClass) -> List[int]:
        return [counts[cls] for _, counts in self.series]


def aggregate(trace: Iterable, bucket: float = 5.0, end_time: Optional[float] = None,
              label: str = "run", pause_time: Optional[float] = None,
              fingerprint: str = "") -> RunSummary:
    """Fold a trace into per-class counts, delays and a throughput series.

    End-to-end delay runs from generation to delivery; queuing delay sums the
    per-hop buffer waits of the same packet.  Both are averaged over delivered
    packets only.
    """
    created: Dict[int, float] = {}
    klass: Dict[int, TrafficClass] = {}
    enq: Dict[Tuple[int, int], float] = {}
    qwait: Dict[int, float] = {}
    done: set = set()
    gen = {c: 0 for c in DATA_CLASSES}
    dlv = {c: 0 for c in DATA_CLASSES}
    drp = {c: 0 for c in DATA_CLASSES}
    dsum = {c: 0.0 for c in DATA_CLASSES}
    qsum = {c: 0.0 for c in DATA_CLASSES}
    deliveries: List[Tuple[float, TrafficClass]] = []
    last_t = 0.0
    for t, node, event, pid, cls, _ex in trace:
        last_t = t
        if pid is None:
            continue
        if event == "Generate":
            if pid in created:
                raise TraceIntegrityError(f"packet {pid} generated twice")
            created[pid] = t
            klass[pid] = cls
            gen[cls] += 1
        elif event == "Enqueue":
            enq[(node, pid)] = t
        elif event == "Dequeue":
            t0 = enq.pop((node, pid), None)
            if t0 is not None:
                qwait[pid] = qwait.get(pid, 0.0) + (t - t0)
        elif event == "Deliver":
            if pid not in created:
                raise TraceIntegrityError(f"packet {pid} delivered without creation")
            if pid in done:
                raise TraceIntegrityError(f"packet {pid} delivered twice")
            done.add(pid)
            c = klass[pid]
            dlv[c] += 1
            dsum[c] += t - created[pid]
            qsum[c] += qwait.get(pid, 0.0)
            deliveries.append((t, c))
        elif event in DROP_EVENTS:
            if pid not in created:
                raise TraceIntegrityError(f"packet {pid} dropped without creation")
            drp[klass[pid]] += 1

    mean = {c: (dsum[c] / dlv[c] if dlv[c] else None) for c in DATA_CLASSES}
    qmean = {c: (qsum[c] / dlv[c] if dlv[c] else None) for c in DATA_CLASSES}
    if end_time is None:
        end_time = last_t
    series = []
    if end_time > 0 and bucket > 0:
        n = max(1, math.ceil(end_time / bucket - 1e-9))
        cum = {c: 0 for c in DATA_CLASSES}
        i = 0
        deliveries.sort(key=lambda d: d[0])
        for k in range(1, n + 1):
            edge = min(k * bucket, end_time)
            while i < len(deliveries) and deliveries[i][0] <= edge + 1e-12:
                cum[deliveries[i][1]] += 1
                i += 1
            series.append((edge, dict(cum)))
    return RunSummary(gen, dlv, drp, mean, qmean, series, label, pause_time, fingerprint)


# -- comparison -------------------------------------------------------------

def _ratio(num, den) -> Optional[float]:
    if num is None or den is None:
        return None
    if den == 0:
        return 1.0 if num == 0 else math.inf
    return num / den


@dataclass
class ComparisonRow:
    pause_time: Optional[float]
    baseline: RunSummary
    improved: RunSummary

    @property
    def rt_ratio(self) -> Optional[float]:
        return _ratio(self.improved.delivered[RT], self.baseline.delivered[RT])

    @property
    def be_ratio(self) -> Optional[float]:
        return _ratio(self.improved.delivered[BE], self.baseline.delivered[BE])

    @property
    def rt_delay_ratio(self) -> Optional[float]:
        return _ratio(self.baseline.mean_delay[RT], self.improved.mean_delay[RT])


@dataclass
class ComparisonReport:
    fingerprint: str
    rows: List[ComparisonRow] = field(default_factory=list)

    def extend(self, other: "ComparisonReport") -> None:
        if other.fingerprint != self.fingerprint:
            raise ValueError("cannot merge reports of different scenarios")
        self.rows.extend(other.rows)

    def totals(self, mode: str, cls: TrafficClass) -> int:
        return sum(getattr(r, mode).delivered[cls] for r in self.rows)

    def text(self) -> str:
        lines = [f"scenario {self.fingerprint[:12]}",
                 "pause_s  RT_base  RT_qos  RT_x   BE_base  BE_qos  BE_x   "
                 "RTdelay_base_ms  RTdelay_qos_ms  delay_x"]
        for r in self.rows:
            b, q = r.baseline, r.improved
            lines.append(
                f"{_num(r.pause_time):>7}  {b.delivered[RT]:>7}  {q.delivered[RT]:>6}  "
                f"{_num(r.rt_ratio):>5}  {b.delivered[BE]:>7}  {q.delivered[BE]:>6}  "
                f"{_num(r.be_ratio):>5}  {_ms(b.mean_delay[RT]):>15}  "
                f"{_ms(q.mean_delay[RT]):>14}  {_num(r.rt_delay_ratio):>7}")
        return "\n".join(lines)


def _num(v) -> str:
    return "-" if v is None else f"{v:.2f}"


def _ms(v) -> str:
    return "-" if v is None else f"{v * 1000:.3f}"


def compare(baseline: RunSummary, improved: RunSummary) -> ComparisonReport:
    if baseline.fingerprint != improved.fingerprint:
        raise ValueError("refusing to compare runs of different scenarios "
                         f"({baseline.fingerprint[:12]} vs {improved.fingerprint[:12]})")
    return ComparisonReport(baseline.fingerprint,
                            [ComparisonRow(baseline.pause_time, baseline, improved)])


# -- CSV ----------------------------------------------------------------------

def summary_rows(s: RunSummary) -> List[tuple]:
    rows = []
    for edge, counts in s.series:
        for c in DATA_CLASSES:
            rows.append((s.label, s.pause_time, edge, c.short, counts[c], s.mean_delay[c]))
    return rows


def export_csv(obj, path) -> Path:
    if isinstance(obj, RunSummary):
        rows = summary_rows(obj)
    else:
        rows = []
        for r in obj.rows:
            rows.extend(summary_rows(r.baseline))
            rows.extend(summary_rows(r.improved))
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in rows:
                w.writerow([_fmt(v) if v is not None else "" for v in row])
    except OSError as exc:
        raise OSError(f"cannot write CSV {path}: {exc.strerror or exc}") from exc
    return path


def read_csv(path) -> List[tuple]:
    out = []
    with Path(path).open(encoding="utf-8", newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header in {path}: {header}")
        for label, pause, edge, cls, cum, delay in r:
            out.append((label, float(pause) if pause else None, float(edge), cls,
                        int(cum), float(delay) if delay else None))
    return out
