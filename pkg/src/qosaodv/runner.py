"""Single runs and baseline-vs-QoS sweeps over pause times."""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional

from .config import ScenarioConfig
from .backend import Simulator
from .metrics import (ComparisonReport, RunSummary, aggregate, compare,
                      export_csv, write_trace)
from .mobility import RadioModel
from .packets import Mode


@dataclass
class RunResult:
    summary: RunSummary
    trace: list
    residual: list
    simulator: Simulator


def simulate(config: ScenarioConfig, pause_time: Optional[float] = None,
             mode: Optional[Mode] = None, bucket: float = 5.0) -> RunResult:
    config.validate()
    pause = config.pause_times[0] if pause_time is None else pause_time
    mode = config.protocol_mode if mode is None else Mode.parse(mode)
    sim = Simulator(node_count=config.node_count, width=config.area[0],
                    height=config.area[1], sim_time=config.sim_time,
                    pause_time=pause, speed_min=config.speed_range[0],
                    speed_max=config.speed_range[1],
                    radio=RadioModel(config.radio_range, config.tx_time),
                    queue_capacity=config.queue_capacity, mode=mode,
                    scheduler=config.scheduler,
                    collection_window=config.collection_window,
                    flows=config.flows, seed=config.seed)
    trace = sim.run()
    label = f"{mode.value}"
    summary = aggregate(trace, bucket=bucket, end_time=config.sim_time, label=label,
                        pause_time=pause, fingerprint=config.fingerprint())
    return RunResult(summary, trace, sim.residual_packets(), sim)


def run_single(config: ScenarioConfig, out_dir=None, pause_time=None, mode=None) -> RunResult:
    res = simulate(config, pause_time, mode)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        s = res.summary
        stem = f"{s.label}_pause{s.pause_time:g}_seed{config.seed}"
        write_trace(res.trace, out / f"{stem}.tr")
        export_csv(s, out / f"{stem}.csv")
    return res


def run_ab(config: ScenarioConfig, out_dir=None, pause_times=None) -> ComparisonReport:
    """Baseline and QoS runs at each pause time with everything else equal."""
    config.validate()
    pauses = list(config.pause_times if pause_times is None else pause_times)
    base_cfg = replace(config, protocol_mode=Mode.BASELINE)
    qos_cfg = replace(config, protocol_mode=Mode.QOS)
    if base_cfg.fingerprint() != qos_cfg.fingerprint():
        raise AssertionError("A/B configurations differ beyond protocol mode")
    report = ComparisonReport(config.fingerprint())
    for pause in sorted(pauses):
        b = simulate(base_cfg, pause).summary
        q = simulate(qos_cfg, pause).summary
        report.extend(compare(b, q))
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        export_csv(report, out / f"ab_seed{config.seed}.csv")
        (out / f"ab_seed{config.seed}.txt").write_text(report.text() + "\n", encoding="utf-8")
    return report
