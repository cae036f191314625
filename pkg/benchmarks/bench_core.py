"""Times the default scenario on the pure and compiled simulation cores.

Usage: python benchmarks/bench_core.py [--repeat N] [--seed S]
"""

import argparse
import statistics
import time

from qosaodv import backend
from qosaodv.config import ScenarioConfig
from qosaodv.mobility import RadioModel
from qosaodv.packets import Mode


def one_run(engine, cfg, mode, pause):
    sim = engine.Simulator(
        node_count=cfg.node_count, width=cfg.area[0], height=cfg.area[1],
        sim_time=cfg.sim_time, pause_time=pause, speed_min=cfg.speed_range[0],
        speed_max=cfg.speed_range[1], radio=RadioModel(cfg.radio_range, cfg.tx_time),
        queue_capacity=cfg.queue_capacity, mode=mode, scheduler=cfg.scheduler,
        collection_window=cfg.collection_window, flows=cfg.flows, seed=cfg.seed)
    t0 = time.perf_counter()
    trace = sim.run()
    return time.perf_counter() - t0, trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    cfg = ScenarioConfig(seed=args.seed)
    engines = backend.available()
    if "compiled" not in engines:
        print("compiled core not built; timing the pure core only")
    for mode in (Mode.BASELINE, Mode.QOS):
        times, traces = {}, {}
        for name, eng in engines.items():
            runs = [one_run(eng, cfg, mode, 0.0) for _ in range(args.repeat)]
            times[name] = statistics.median(t for t, _ in runs)
            traces[name] = runs[0][1]
        line = f"{mode.value:8s} records={len(traces['pure']):7d}"
        for name, t in times.items():
            line += f"  {name}={t * 1000:7.1f} ms"
        if "compiled" in times:
            same = traces["pure"] == traces["compiled"]
            line += f"  speedup={times['pure'] / times['compiled']:.2f}x identical={same}"
        print(line)


if __name__ == "__main__":
    main()
