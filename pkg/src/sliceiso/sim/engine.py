"""Event-driven simulation of authentication, ping and bandwidth probes for one slice.

Every physical link, and every host's dedicated access link, is a
round-robin port with one FIFO queue per VNF on its attached hosts. Flood
and background traffic are autonomous port sources; foreground packets
are priced against the port state when they reach it. Traffic between
two VNFs on the same host is bridged through that host's access port
(out and back in), so it shares the kernel queueing with external traffic.
"""
from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from ..topology import SliceRequest
from .config import AttackSpec, MetricsLog, SimConfig, SimulationDivergence, cpu_contention
from .kernel import BACKEND, RRPort

NS_PER_MS = 1_000_000
NS_PER_S = 1_000_000_000
CLIENT = "@client"
_PORT_STREAM, _SERVICE_STREAM, _PING_STREAM = 1, 2, 3


def _ns(seconds: float) -> int:
    return int(round(seconds * NS_PER_S))


@dataclass
class Port:
    name: str
    kernel: RRPort
    queues: dict[str, int]
    capacity_mbps: float
    initial_delay_ms: float
    max_delay_increase_ms: float

    def throughput_mbps(self) -> float:
        return self.kernel.throughput_bps() / 1e6

    def residual_mbps(self) -> float:
        return max(0.0, self.capacity_mbps - self.throughput_mbps())


def link_queue_model(port: Port, queue: str, bits: int) -> int:
    """Delay (ns) of one packet entering ``queue`` of ``port`` now.

    Round-robin wait and transmission from the port snapshot, plus the
    link delay at the instantaneous allocation, i.e. the measured throughput.
    """
    wait = port.kernel.fg_delay_ns(port.queues[queue], bits)
    alloc = min(port.capacity_mbps, port.throughput_mbps())
    prop_ms = alloc / port.capacity_mbps * port.max_delay_increase_ms + port.initial_delay_ms
    return wait + int(round(prop_ms * NS_PER_MS))


def access_port_name(host: str) -> str:
    return f"access:{host}"


def link_port_name(endpoints) -> str:
    return f"link:{endpoints[0]}|{endpoints[1]}"


def slice_chain(s: SliceRequest) -> list[str]:
    """VNFs visited by a request: start at the entry VNF and follow virtual links."""
    chain = [s.vnfs[0].id]
    while True:
        nxt = [vl.dst for vl in s.vlinks if vl.src == chain[-1] and vl.dst not in chain]
        if not nxt:
            return chain
        chain.append(nxt[0])


def _stream_seed(seed: int, stream: int, index: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(stream, index))
    return int(ss.generate_state(1, np.uint64)[0])


def _stream_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


class Network:
    """Ports, placement lookups and CPU contention for one configuration."""

    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        topo, scheme = cfg.topology, cfg.scheme
        self.slices = {s.id: s for s in cfg.slices}
        if cfg.observed_slice not in self.slices:
            raise ValueError(f"unknown observed slice {cfg.observed_slice!r}")
        self.vnfs = {v.id: v for s in cfg.slices for v in s.vnfs}
        self.host = {vid: scheme.host(vid) for vid in self.vnfs}
        hosted: dict[str, list[str]] = {n.id: [] for n in topo.nodes}
        for vid, h in self.host.items():
            hosted[h].append(vid)
        bits = cfg.packet_size_bytes * 8

        self.ports: dict[str, Port] = {}
        specs = []
        for n in topo.nodes:
            specs.append((access_port_name(n.id), hosted[n.id] + ["bg"], cfg.access_bw_mbps,
                          cfg.access_initial_delay_ms, cfg.access_max_delay_increase_ms))
        for link in topo.links:
            e, f = link.endpoints
            specs.append((link_port_name(link.endpoints), hosted[e] + hosted[f] + ["transit", "bg"],
                          link.bw_capacity_mbps, link.initial_delay_ms,
                          link.max_delay_increase_ms))
        for idx, (name, queues, cap, init, delta) in enumerate(specs):
            kernel = RRPort(len(queues), cap * 1e6, cfg.buffer_pkts,
                            _stream_seed(cfg.seed, _PORT_STREAM, idx))
            self.ports[name] = Port(name, kernel, {q: i for i, q in enumerate(queues)},
                                    cap, init, delta)
        self._link_port = {link.key: self.ports[link_port_name(link.endpoints)]
                           for link in topo.links}

        end_ns = _ns(cfg.duration_s)
        for name, rate in cfg.background:
            if name not in self.ports:
                raise ValueError(f"unknown port {name!r}")
            port = self.ports[name]
            port.kernel.add_source(port.queues["bg"], rate * 1e6, bits, 0, end_ns, False)

        att = cfg.attack
        self.target_hosts: set[str] = set()
        if att.kind != "none":
            if att.target_slice not in self.slices:
                raise ValueError(f"unknown target slice {att.target_slice!r}")
            target = self.slices[att.target_slice]
            self.target_hosts = {self.host[v.id] for v in target.vnfs}
            if att.kind == "flood" and att.flood_rate_mbps > 0:
                entry = target.vnfs[0].id
                port = self.ports[access_port_name(self.host[entry])]
                port.kernel.add_source(port.queues[entry], att.flood_rate_mbps * 1e6, bits,
                                       _ns(att.start_s), _ns(att.stop_s), True)

    # -- placement ---------------------------------------------------------

    def _route(self, a: str, b: str):
        routes = self.cfg.scheme.routes
        if (a, b) in routes:
            return list(routes[(a, b)])
        if (b, a) in routes:
            return [(f, e) for e, f in reversed(routes[(b, a)])]
        raise ValueError(f"no route between {a} and {b}")

    def path(self, a: str, b: str) -> list[tuple[Port, str]]:
        """Ports (with the queue used on each) crossed by a message from ``a`` to ``b``."""
        if a == CLIENT:
            return [(self.ports[access_port_name(self.host[b])], b)]
        if b == CLIENT:
            return [(self.ports[access_port_name(self.host[a])], a)]
        ha, hb = self.host[a], self.host[b]
        if ha == hb:
            port = self.ports[access_port_name(ha)]
            return [(port, a), (port, b)]
        out = []
        for e, f in self._route(a, b):
            port = self._link_port[frozenset((e, f))]
            ends = (e, f)
            queue = a if ha in ends else b if hb in ends else "transit"
            out.append((port, queue))
        if not out:
            raise ValueError(f"empty route between hosts {ha} and {hb}")
        return out

    def multiplier(self, host: str, t_s: float) -> float:
        att = self.cfg.attack
        if att.kind != "cpu_starve" or not att.active(t_s) or host not in self.target_hosts:
            return 1.0
        # with reservations the attacker cannot take cycles reserved for others
        load = 0.0 if self.cfg.cpu_reservations else att.cpu_load_fraction
        return cpu_contention(load, self.cfg.cpu_eps)

    def node_delay_ms(self, vid: str) -> float:
        return self.cfg.topology.node(self.host[vid]).node_processing_delay_ms

    def advance(self, t_ns: int) -> None:
        for port in self.ports.values():
            port.kernel.advance(t_ns)

    def available_bw(self, slice_id: str) -> float:
        """Mean over segments (client to entry VNF, each virtual link) of the
        residual capacity on the segment's bottleneck, capped at the slice's
        allocated bandwidth. Ports must already be advanced."""
        s = self.slices[slice_id]
        segments = [(CLIENT, s.vnfs[0].id)] + [(vl.src, vl.dst) for vl in s.vlinks]
        values = []
        for a, b in segments:
            ports = self.path(a, b)
            avail = min((p.residual_mbps() for p, _ in ports), default=s.allocated_bw_mbps)
            values.append(min(s.allocated_bw_mbps, avail))
        return math.fsum(values) / len(values)

    def hss_extra_ms(self) -> float:
        return math.ceil(math.log2(self.cfg.hss_records)) * self.cfg.hss_unit_ms if \
            self.cfg.hss_records > 1 else 0.0


class _Run:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.net = Network(cfg)
        self.heap: list = []
        self.seq = 0
        self.events = 0
        self.log = MetricsLog()
        s = self.net.slices[cfg.observed_slice]
        chain = slice_chain(s)
        self.stages = []  # ("net", a, b) and ("cpu", vnf)
        hops = [CLIENT] + chain + chain[-2::-1] + [CLIENT]
        for i in range(len(hops) - 1):
            self.stages.append(("net", hops[i], hops[i + 1]))
            if hops[i + 1] != CLIENT:
                self.stages.append(("cpu", hops[i + 1]))
        self.terminal = chain[-1]
        order = {v.id: i for i, v in enumerate(v for sl in cfg.slices for v in sl.vnfs)}
        self.rng = {vid: _stream_rng(cfg.seed, _SERVICE_STREAM, order[vid]) for vid in chain}
        self.ping_rng = _stream_rng(cfg.seed, _PING_STREAM, 0)
        self.fifo = {vid: deque() for vid in chain}
        self.busy = {vid: False for vid in chain}
        self.pending_auth: dict[int, int] = {}
        self.pending_ping: dict[int, int] = {}
        self.auth_out: dict[int, tuple] = {}
        self.ping_out: dict[int, tuple] = {}
        self.msg_bits = cfg.message_bytes * 8
        self.ping_bits = cfg.ping_bytes * 8

    def push(self, t: int, fn, *args) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (t, self.seq, fn, args))
        if len(self.heap) > self.cfg.event_cap:
            raise SimulationDivergence(f"event queue exceeded {self.cfg.event_cap} entries")

    def jitter(self, rng: np.random.Generator) -> float:
        j = self.cfg.service_jitter
        return 1.0 + j * (2.0 * rng.random() - 1.0) if j else 1.0

    # -- messages ------------------------------------------------------------

    def send(self, t: int, a: str, b: str, bits: int, then, *args) -> None:
        self.log.messages_sent += 1
        self.hop(t, self.net.path(a, b), 0, bits, then, args)

    def hop(self, t: int, path, k: int, bits: int, then, args) -> None:
        port, queue = path[k]
        port.kernel.advance(t)
        t2 = t + link_queue_model(port, queue, bits)
        if k + 1 < len(path):
            self.push(t2, self.hop, path, k + 1, bits, then, args)
        else:
            self.push(t2, self.deliver, then, args)

    def deliver(self, t: int, then, args) -> None:
        self.log.messages_delivered += 1
        then(t, *args)

    # -- authentication ------------------------------------------------------

    def issue_auth(self, t: int, i: int) -> None:
        self.pending_auth[i] = t
        self.push(t + _ns(self.cfg.auth_timeout_s), self.auth_timeout, i)
        self.stage(t, i, 0)

    def stage(self, t: int, i: int, k: int) -> None:
        if k == len(self.stages):
            t0 = self.pending_auth.pop(i, None)
            if t0 is not None:
                self.auth_out[i] = (i, t0 / NS_PER_S, (t - t0) / NS_PER_MS, "ok")
            return
        st = self.stages[k]
        if st[0] == "net":
            self.send(t, st[1], st[2], self.msg_bits, self.stage, i, k + 1)
        else:
            vid = st[1]
            self.fifo[vid].append((i, k + 1))
            if not self.busy[vid]:
                self.serve(t, vid)

    def serve(self, t: int, vid: str) -> None:
        i, k = self.fifo[vid][0]
        self.busy[vid] = True
        net = self.net
        base = self.net.vnfs[vid].vnf_processing_delay_ms + net.node_delay_ms(vid)
        if vid == self.terminal:
            base += net.hss_extra_ms()
        mult = net.multiplier(net.host[vid], t / NS_PER_S)
        dur = int(round(base * mult * self.jitter(self.rng[vid]) * NS_PER_MS))
        self.push(t + dur, self.served, vid)

    def served(self, t: int, vid: str) -> None:
        i, k = self.fifo[vid].popleft()
        self.busy[vid] = False
        if self.fifo[vid]:
            self.serve(t, vid)
        self.stage(t, i, k)

    def auth_timeout(self, t: int, i: int) -> None:
        t0 = self.pending_auth.pop(i, None)
        if t0 is not None:
            self.auth_out[i] = (i, t0 / NS_PER_S, None, "timeout")

    # -- ping ----------------------------------------------------------------

    def issue_ping(self, t: int, i: int) -> None:
        self.pending_ping[i] = t
        self.push(t + _ns(self.cfg.auth_timeout_s), self.ping_timeout, i)
        entry = self.stages[0][2]
        self.send(t, CLIENT, entry, self.ping_bits, self.echo, i, entry)

    def echo(self, t: int, i: int, entry: str) -> None:
        net = self.net
        mult = net.multiplier(net.host[entry], t / NS_PER_S)
        dur = int(round(net.node_delay_ms(entry) * mult * self.jitter(self.ping_rng) * NS_PER_MS))
        self.push(t + dur, self.echo_back, i, entry)

    def echo_back(self, t: int, i: int, entry: str) -> None:
        self.send(t, entry, CLIENT, self.ping_bits, self.pong, i)

    def pong(self, t: int, i: int) -> None:
        t0 = self.pending_ping.pop(i, None)
        if t0 is not None:
            self.ping_out[i] = (i, t0 / NS_PER_S, (t - t0) / NS_PER_MS, "ok")

    def ping_timeout(self, t: int, i: int) -> None:
        t0 = self.pending_ping.pop(i, None)
        if t0 is not None:
            self.ping_out[i] = (i, t0 / NS_PER_S, None, "timeout")

    # -- bandwidth -----------------------------------------------------------

    def probe_bw(self, t: int) -> None:
        self.net.advance(t)
        self.log.bw.append((t / NS_PER_S, self.net.available_bw(self.cfg.observed_slice)))

    # -- main loop -----------------------------------------------------------

    def run(self) -> MetricsLog:
        cfg = self.cfg
        end = _ns(cfg.duration_s)
        n_auth = math.ceil(cfg.duration_s * cfg.auth_request_rate_hz - 1e-9)
        for i in range(n_auth):
            self.push(_ns(i / cfg.auth_request_rate_hz), self.issue_auth, i)
        i = 0
        while _ns(cfg.ping_offset_s + i / cfg.ping_rate_hz) < end:
            self.push(_ns(cfg.ping_offset_s + i / cfg.ping_rate_hz), self.issue_ping, i)
            i += 1
        i = 1
        while _ns(i * cfg.bw_probe_interval_s) <= end:
            self.push(_ns(i * cfg.bw_probe_interval_s), self.probe_bw)
            i += 1
        while self.heap:
            t, _, fn, args = heapq.heappop(self.heap)
            self.events += 1
            if self.events > cfg.event_cap:
                raise SimulationDivergence(f"more than {cfg.event_cap} events processed")
            fn(t, *args)
        log = self.log
        log.auth = [self.auth_out[i] for i in sorted(self.auth_out)]
        log.rtt = [self.ping_out[i] for i in sorted(self.ping_out)]
        log.ports = {name: p.kernel.stats() for name, p in self.net.ports.items()}
        labels = dict(cfg.labels)
        log.meta = {"seed": cfg.seed, "config_hash": cfg.config_hash(),
                    "solver": labels.get("solver", ""), "K_rel": labels.get("K_rel", ""),
                    "setting": labels.get("setting", ""), "attack": cfg.attack.kind,
                    "flood_dropped": sum(sum(st["dropped"]) for st in log.ports.values())}
        return log


def run(config: SimConfig) -> MetricsLog:
    """Simulate one configuration; identical configs give identical logs."""
    return _Run(config).run()


# -- analytic references ---------------------------------------------------------


def unloaded_response_ms(config: SimConfig) -> float:
    """Response time of one request on an idle network with no jitter."""
    r = _Run(config)
    total = 0
    for st in r.stages:
        if st[0] == "net":
            for port, _ in r.net.path(st[1], st[2]):
                total += port.kernel.tx_ns(r.msg_bits) + int(round(port.initial_delay_ms * NS_PER_MS))
        else:
            base = r.net.vnfs[st[1]].vnf_processing_delay_ms + r.net.node_delay_ms(st[1])
            if st[1] == r.terminal:
                base += r.net.hss_extra_ms()
            total += int(round(base * NS_PER_MS))
    return total / NS_PER_MS


def response_lower_bound_ms(config: SimConfig) -> float:
    """Lower bound on any response time: unloaded links, fastest service draw."""
    r = _Run(config)
    net_ms = cpu_ms = 0.0
    for st in r.stages:
        if st[0] == "net":
            for port, _ in r.net.path(st[1], st[2]):
                net_ms += port.kernel.tx_ns(r.msg_bits) / NS_PER_MS + port.initial_delay_ms
        else:
            base = r.net.vnfs[st[1]].vnf_processing_delay_ms + r.net.node_delay_ms(st[1])
            if st[1] == r.terminal:
                base += r.net.hss_extra_ms()
            cpu_ms += base
    return net_ms + cpu_ms * (1.0 - config.service_jitter)


def measure_bandwidth(config: SimConfig, scheme=None, slice_id: str | None = None,
                      t_s: float = 0.0) -> float:
    """Average available bandwidth of a slice at time ``t_s`` (Mb/s)."""
    cfg = config if scheme is None else config.with_(scheme=scheme)
    net = Network(cfg)
    net.advance(_ns(t_s))
    return net.available_bw(slice_id or cfg.observed_slice)


def calibrate_delay_params(config: SimConfig, probes: int = 200,
                           load_fraction: float = 1.0) -> tuple[float, float]:
    """Estimate ``(initial delay, max delay increase)`` in ms from echo probes.

    Probes cross every port used by the observed slice, first on an idle
    network and then with each of those ports driven to ``load_fraction`` of
    capacity by constant-rate background traffic.
    """
    base = config.with_(attack=AttackSpec(), background=())
    net = Network(base)
    s = net.slices[base.observed_slice]
    segments = [(CLIENT, s.vnfs[0].id)] + [(vl.src, vl.dst) for vl in s.vlinks]
    crossings = []
    for a, b in segments:
        for port, queue in net.path(a, b):
            if (port.name, queue) not in crossings:
                crossings.append((port.name, queue))
    ports = sorted({name for name, _ in crossings})

    def average(cfg: SimConfig) -> float:
        net = Network(cfg)
        bits = cfg.ping_bytes * 8
        settle = 200 * NS_PER_MS  # fill the throughput window first
        samples = []
        for k in range(probes):
            t = settle + k * 50 * NS_PER_MS  # spaced wider than any loaded crossing
            for name, queue in crossings:
                port = net.ports[name]
                port.kernel.advance(t)
                d1 = link_queue_model(port, queue, bits)
                port.kernel.advance(t + d1)
                d2 = link_queue_model(port, queue, bits)
                samples.append((d1 + d2) / 2 / NS_PER_MS)
        return math.fsum(samples) / len(samples)

    duration = max(base.duration_s, (200 + probes * 50) / 1000 + 1.0)
    idle = average(base.with_(duration_s=duration))
    loaded_cfg = base.with_(duration_s=duration, background=tuple(
        (name, load_fraction * net.ports[name].capacity_mbps) for name in ports))
    loaded = average(loaded_cfg)
    return idle, loaded - idle


__all__ = ["run", "Network", "Port", "link_queue_model", "measure_bandwidth",
           "calibrate_delay_params", "unloaded_response_ms", "response_lower_bound_ms",
           "slice_chain", "CLIENT", "BACKEND"]
