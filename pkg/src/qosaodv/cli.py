"""Command-line entry point: ``qosaodv run|ab|validate``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .config import ScenarioConfig, load_scenario
from .metrics import DATA_CLASSES, TraceIntegrityError
from .packets import ConfigError, Mode
from .runner import run_ab, run_single


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="qosaodv",
        description="Simulate AODV and QoS-AODV on a random-waypoint MANET.")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p, mode=False):
        p.add_argument("--config", type=Path, help="TOML scenario file (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--out", type=Path, help="directory for traces and CSVs")
        if mode:
            p.add_argument("--mode", choices=["baseline", "qos"],
                           help="protocol variant (default: the scenario's protocol_mode)")
            p.add_argument("--pause", type=float,
                           help="pause time in seconds (default: first sweep entry)")

    common(sub.add_parser("run", help="one simulation, trace and summary"), mode=True)
    common(sub.add_parser("ab", help="baseline vs QoS at every pause time"))
    v = sub.add_parser("validate", help="check a scenario file and print it resolved")
    v.add_argument("--config", type=Path)
    v.add_argument("--seed", type=int)
    return ap


def _scenario(args) -> ScenarioConfig:
    cfg = load_scenario(args.config) if args.config else ScenarioConfig().validate()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "mode", None):
        cfg = replace(cfg, protocol_mode=Mode.parse(args.mode))
    return cfg.validate()


def _print_summary(res, cfg) -> None:
    s = res.summary
    print(f"mode={s.label} pause={s.pause_time:g}s seed={cfg.seed} "
          f"scenario={s.fingerprint[:12]}")
    for c in DATA_CLASSES:
        d = s.mean_delay[c]
        q = s.mean_queue_delay[c]
        print(f"  {c.short}: generated={s.generated[c]} delivered={s.delivered[c]} "
              f"dropped={s.dropped[c]} "
              f"mean_delay_ms={'-' if d is None else f'{d * 1000:.3f}'} "
              f"mean_queue_ms={'-' if q is None else f'{q * 1000:.3f}'}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _scenario(args)
        if args.verb == "validate":
            sys.stdout.write(cfg.to_toml())
        elif args.verb == "run":
            res = run_single(cfg, args.out, args.pause)
            _print_summary(res, cfg)
        else:
            print(run_ab(cfg, args.out).text())
    except (ConfigError, TraceIntegrityError, OSError) as exc:
        print(f"qosaodv: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
