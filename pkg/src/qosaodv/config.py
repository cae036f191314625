"""Scenario configuration: TOML loading, validation and defaults."""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Tuple

from .engine import TrafficFlow
from .packets import BE, RT, ConfigError, DEFAULT_SIZES, TrafficClass
from .queueing import SchedulerConfig
from .packets import Mode

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def default_flows(sim_time: float = 40.0) -> List[TrafficFlow]:
    """One CBR-like RT flow and one heavier BE flow, started a little apart."""
    stop = sim_time
    specs = [
        (1, 5, 0, RT, 50.0, DEFAULT_SIZES[RT], 1.0, stop),
        (2, 7, 1, BE, 200.0, DEFAULT_SIZES[BE], 1.5, stop),
    ]
    return [TrafficFlow(*s) for s in specs if s[6] < stop]


@dataclass
class ScenarioConfig:
    area: Tuple[float, float] = (700.0, 600.0)
    node_count: int = 15
    sim_time: float = 40.0
    queue_capacity: int = 20
    radio_range: float = 250.0
    tx_time: float = 0.001
    pause_times: List[float] = field(default_factory=lambda: [0.0, 10.0, 20.0, 40.0])
    speed_range: Tuple[float, float] = (1.0, 20.0)
    protocol_mode: Mode = Mode.QOS
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    collection_window: float = 0.010
    flows: List[TrafficFlow] = field(default_factory=default_flows)
    seed: int = 1

    def validate(self) -> "ScenarioConfig":
        w, h = self.area
        if w <= 0 or h <= 0:
            raise ConfigError("area: dimensions must be positive")
        if self.node_count < 2:
            raise ConfigError("node_count: need at least 2 nodes")
        if self.sim_time < 0:
            raise ConfigError("sim_time: must be non-negative")
        if self.queue_capacity < 1:
            raise ConfigError("queue_capacity: must be at least 1")
        if self.radio_range <= 0:
            raise ConfigError("radio_range: must be positive")
        if self.tx_time <= 0:
            raise ConfigError("tx_time: must be positive")
        if not self.pause_times:
            raise ConfigError("pause_times: sweep list is empty")
        if any(p < 0 for p in self.pause_times):
            raise ConfigError("pause_times: must be non-negative")
        lo, hi = self.speed_range
        if not 0 < lo <= hi:
            raise ConfigError("speed_range: need 0 < min <= max")
        if self.collection_window < 0:
            raise ConfigError("collection_window: must be non-negative")
        if abs(self.scheduler.tx_time - self.tx_time) > 1e-12:
            raise ConfigError("scheduler: tx_time must match the radio tx_time")
        ids = set()
        for f in self.flows:
            for end in ("src", "dst"):
                v = getattr(f, end)
                if not 0 <= v < self.node_count:
                    raise ConfigError(f"flows: flow {f.flow_id} {end}={v} outside "
                                      f"0..{self.node_count - 1}")
            if f.flow_id in ids:
                raise ConfigError(f"flows: duplicate flow_id {f.flow_id}")
            ids.add(f.flow_id)
        return self

    def fingerprint(self) -> str:
        """Hash of every field except the protocol mode."""
        d = asdict(replace(self, protocol_mode=Mode.QOS))
        d.pop("protocol_mode")
        blob = json.dumps(d, sort_keys=True, default=_jsonable)
        return hashlib.sha256(blob.encode()).hexdigest()

    def to_toml(self) -> str:
        s = self.scheduler
        lines = [
            f"area = [{self.area[0]!r}, {self.area[1]!r}]",
            f"node_count = {self.node_count}",
            f"sim_time = {self.sim_time!r}",
            f"queue_capacity = {self.queue_capacity}",
            f"radio_range = {self.radio_range!r}",
            f"tx_time = {self.tx_time!r}",
            f"pause_times = [{', '.join(repr(float(p)) for p in self.pause_times)}]",
            f"speed_range = [{self.speed_range[0]!r}, {self.speed_range[1]!r}]",
            f'protocol_mode = "{self.protocol_mode.value}"',
            f"collection_window = {self.collection_window!r}",
            f"seed = {self.seed}",
            "",
            "[scheduler]",
            f"rt_slot = {s.rt_slot!r}",
            f"be_slot = {s.be_slot!r}",
            f"strict_slots = {'true' if s.strict_slots else 'false'}",
        ]
        for f in self.flows:
            lines += ["", "[[flows]]", f"flow_id = {f.flow_id}", f"src = {f.src}",
                      f"dst = {f.dst}", f'class = "{f.cls.short}"', f"rate = {f.rate!r}",
                      f"packet_size = {f.packet_size}", f"start_at = {f.start_at!r}",
                      f"stop_at = {f.stop_at!r}"]
        return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, (Mode, TrafficClass)):
        return v.name
    raise TypeError(type(v))


_FLOW_KEYS = {"flow_id", "src", "dst", "class", "rate", "packet_size", "start_at", "stop_at"}
_SCHED_KEYS = {"rt_slot", "be_slot", "strict_slots"}


def _num(key, v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    return float(v)


def _int(key, v):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return v


def _pair(key, v):
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{key}: expected a two-element list")
    return (_num(key, v[0]), _num(key, v[1]))


def _flow(i, d, sim_time) -> TrafficFlow:
    where = f"flows[{i}]"
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: expected a table")
    unknown = set(d) - _FLOW_KEYS
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
    for k in ("flow_id", "src", "dst", "class", "rate"):
        if k not in d:
            raise ConfigError(f"{where}: missing {k}")
    try:
        cls = TrafficClass.from_short(str(d["class"]).upper())
    except ValueError:
        raise ConfigError(f"{where}.class: expected RT or BE, got {d['class']!r}") from None
    try:
        return TrafficFlow(
            flow_id=_int(f"{where}.flow_id", d["flow_id"]),
            src=_int(f"{where}.src", d["src"]), dst=_int(f"{where}.dst", d["dst"]),
            cls=cls, rate=_num(f"{where}.rate", d["rate"]),
            packet_size=_int(f"{where}.packet_size", d.get("packet_size", DEFAULT_SIZES.get(cls, 512))),
            start_at=_num(f"{where}.start_at", d.get("start_at", 1.0)),
            stop_at=_num(f"{where}.stop_at", d.get("stop_at", sim_time)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None


def scenario_from_dict(d: dict) -> ScenarioConfig:
    names = {f.name for f in fields(ScenarioConfig)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}")
    cfg = ScenarioConfig()
    kw = {}
    if "area" in d:
        kw["area"] = _pair("area", d["area"])
    for k in ("node_count", "queue_capacity", "seed"):
        if k in d:
            kw[k] = _int(k, d[k])
    for k in ("sim_time", "radio_range", "tx_time", "collection_window"):
        if k in d:
            kw[k] = _num(k, d[k])
    if "pause_times" in d:
        if not isinstance(d["pause_times"], list):
            raise ConfigError("pause_times: expected a list")
        kw["pause_times"] = [_num("pause_times", p) for p in d["pause_times"]]
    if "speed_range" in d:
        kw["speed_range"] = _pair("speed_range", d["speed_range"])
    if "protocol_mode" in d:
        try:
            kw["protocol_mode"] = Mode.parse(str(d["protocol_mode"]))
        except ValueError as exc:
            raise ConfigError(f"protocol_mode: {exc}") from None
    tx = kw.get("tx_time", cfg.tx_time)
    sd = d.get("scheduler", {})
    if not isinstance(sd, dict):
        raise ConfigError("scheduler: expected a table")
    unknown = set(sd) - _SCHED_KEYS
    if unknown:
        raise ConfigError(f"scheduler: unknown key(s) {sorted(unknown)}")
    try:
        kw["scheduler"] = SchedulerConfig(
            rt_slot=_num("scheduler.rt_slot", sd.get("rt_slot", 5 * tx)),
            be_slot=_num("scheduler.be_slot", sd.get("be_slot", 3 * tx)),
            tx_time=tx,
            strict_slots=bool(sd.get("strict_slots", True)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"scheduler: {exc}") from None
    sim_time = kw.get("sim_time", cfg.sim_time)
    if "flows" in d:
        if not isinstance(d["flows"], list):
            raise ConfigError("flows: expected an array of tables")
        kw["flows"] = [_flow(i, f, sim_time) for i, f in enumerate(d["flows"])]
    elif sim_time != cfg.sim_time:
        kw["flows"] = default_flows(sim_time)
    return replace(cfg, **kw).validate()


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # message already carries "(at line N, column M)"
        raise ConfigError(f"{path}: parse error: {exc}") from None
    return scenario_from_dict(data)
