import pytest

from sliceiso.sim import kernel
from sliceiso.sim.engine import Port, link_queue_model
from sliceiso.sim.rrport import RRPort as PyRRPort

MS = 1_000_000
PKT = 10_000  # 1250 B


def flooded(cls, rate_bps=200e6, seconds=2.0, seed=5):
    port = cls(1, 100e6, 64, seed)
    port.add_source(0, rate_bps, PKT, 0, int(seconds * 1e9))
    return port


def test_flood_at_twice_capacity_drops_half():
    port = flooded(PyRRPort)
    port.advance(int(2.5e9))
    st = port.stats()
    assert st["arrived"][0] == pytest.approx(40_000, rel=0.03)
    assert st["dropped"][0] / st["arrived"][0] == pytest.approx(0.5, abs=0.03)


def test_packets_are_conserved():
    port = flooded(PyRRPort, seconds=1.0)
    for t in range(0, 1_200, 7):
        port.advance(t * MS)
        st = port.stats()
        busy = 1 if st["in_service"] >= 0 else 0
        assert st["arrived"][0] == st["served"][0] + st["dropped"][0] + st["queued"][0] + busy


def _mean_wait(n_bg, load_bps=90e6, seed=3):
    port = PyRRPort(n_bg + 1, 100e6, 1000, seed)
    for q in range(n_bg):
        port.add_source(q, load_bps / n_bg, PKT, 0, int(3e9))
    port.pkt_bits[n_bg] = PKT
    waits = []
    for t in range(200, 3000, 3):
        port.advance(t * MS)
        waits.append(port.fg_delay_ns(n_bg, PKT))
    return sum(waits) / len(waits)


def test_more_queues_wait_longer_at_equal_load():
    assert _mean_wait(6) > _mean_wait(2)


def test_uncontended_port_gives_idle_link_delay():
    port = Port("link:a|b", PyRRPort(2, 100e6, 64, 1), {"s": 0, "bg": 1}, 100.0, 0.15, 16.85)
    port.kernel.pkt_bits[0] = 1600
    delay_ms = link_queue_model(port, "s", 1600) / MS
    assert delay_ms == pytest.approx(0.15 + 1600 / 100e6 * 1e3, abs=1e-6)


def test_saturated_port_approaches_loaded_delay():
    port = Port("link:a|b", flooded(PyRRPort), {"s": 0}, 100.0, 0.15, 16.85)
    port.kernel.advance(int(1e9))
    prop_ms = (link_queue_model(port, "s", 0) - port.kernel.fg_delay_ns(0, 0)) / MS
    assert prop_ms == pytest.approx(17.0, rel=0.02)


@pytest.mark.skipif(kernel.BACKEND != "cython", reason="compiled kernel not built")
def test_compiled_kernel_is_bit_identical():
    a, b = flooded(PyRRPort, seed=11), flooded(kernel.RRPort, seed=11)
    for t in range(0, 2_500, 13):
        a.advance(t * MS)
        b.advance(t * MS)
        assert a.stats() == b.stats()
        assert a.fg_delay_ns(0, 512) == b.fg_delay_ns(0, 512)
        assert a.throughput_bps() == b.throughput_bps()


SIM_SNIPPET = """
import sys
from sliceiso.campaign import solve_setting
from sliceiso.scenario import DEFAULT_SWEEP, gen_scenario
from sliceiso.sim import AttackSpec, BACKEND, SimConfig, run
from sliceiso.topology import commit_allocation
topo, slices, _, _ = gen_scenario("table2", 0)
batch, res = solve_setting(topo, slices, DEFAULT_SWEEP[0])
cfg = SimConfig(res.scheme, commit_allocation(topo, batch, res.scheme), tuple(batch),
                duration_s=12.0, attack=AttackSpec("flood", "S4", 6.0, 10.0),
                cpu_reservations=False)
log = run(cfg)
print(BACKEND)
print(log.auth, log.rtt, log.bw)
"""


@pytest.mark.skipif(kernel.BACKEND != "cython", reason="compiled kernel not built")
def test_pure_fallback_is_selected_and_agrees():
    import os
    import subprocess
    import sys

    outs = {}
    for pure in ("0", "1"):
        env = dict(os.environ, SLICEISO_PURE=pure)
        outs[pure] = subprocess.run([sys.executable, "-c", SIM_SNIPPET], env=env, check=True,
                                    capture_output=True, text=True).stdout.split("\n", 1)
    assert outs["0"][0] == "cython" and outs["1"][0] == "python"
    assert outs["0"][1] == outs["1"][1]
