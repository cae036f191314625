import pytest

from qosaodv.backend import Simulator
from qosaodv.engine import TrafficFlow
from qosaodv.packets import BE, RT, DataPacket
from qosaodv.queueing import Buffer

TABLE1_KINDS = "RT BE BE RT RT BE BE BE RT RT".split()

# Diamond used by the route-selection fixture: S=0 reaches A=1 and B=2, both
# reach D=3, while S-D and A-B are out of the 250 m range.
DIAMOND = [(0.0, 300.0), (180.0, 160.0), (180.0, 440.0), (360.0, 300.0)]

ACCEPTANCE_RESULTS = []


def make_packet(pid, cls, t=0.0, src=0, dst=1, flow=None):
    return DataPacket(pid, pid if flow is None else flow, src, dst, cls, 512, t)


def table1_buffer():
    buf = Buffer(20)
    for i, kind in enumerate(TABLE1_KINDS, start=1):
        buf.push(make_packet(i, RT if kind == "RT" else BE), 0.0)
    return buf


def diamond_sim(mode, seed, a_load=6, b_load=1, window=0.010):
    sim = Simulator(node_count=4, sim_time=0.2, mode=mode, positions=DIAMOND,
                    static=True, seed=seed, collection_window=window,
                    flows=[TrafficFlow(1, 0, 3, RT, 10.0, 512, 0.0, 0.05)])
    if a_load:
        sim.preload(1, BE, 0, a_load)
    if b_load:
        sim.preload(2, BE, 0, b_load)
    return sim


def record_acceptance(label, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] {label}: {detail}"
    ACCEPTANCE_RESULTS.append(line)
    print(line)


@pytest.fixture
def table1():
    return table1_buffer()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_RESULTS:
            terminalreporter.write_line(line)
