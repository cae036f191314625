import os
import subprocess
import sys

import pytest

from qosaodv import backend
from qosaodv.config import ScenarioConfig
from qosaodv.mobility import RadioModel


def build(engine, cfg, mode):
    return engine.Simulator(
        node_count=cfg.node_count, sim_time=cfg.sim_time, pause_time=0.0,
        radio=RadioModel(), mode=mode, scheduler=cfg.scheduler,
        collection_window=cfg.collection_window, flows=cfg.flows, seed=cfg.seed)


def test_backend_selected():
    assert backend.BACKEND in ("pure", "compiled")
    assert backend.Simulator is backend.engine.Simulator


@pytest.mark.skipif("compiled" not in backend.available(), reason="extension not built")
@pytest.mark.parametrize("mode", ["baseline", "qos"])
def test_compiled_matches_pure(mode):
    cfg = ScenarioConfig(seed=6, sim_time=10.0)
    engines = backend.available()
    assert build(engines["pure"], cfg, mode).run() == build(engines["compiled"], cfg, mode).run()


def test_env_forces_pure():
    code = "from qosaodv import backend; print(backend.BACKEND)"
    env = dict(os.environ, QOSAODV_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "pure"
