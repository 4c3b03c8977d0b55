"""Physical network and slice-request data model.

Units are fixed throughout the package: CPU in GHz, bandwidth in Mb/s and
delays in milliseconds.
"""
from __future__ import annotations

import dataclasses
from collections import defaultdict, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

# Allocations live on a 1e-9 grid so that commit/uncommit are exact inverses.
_QUANTUM = 1_000_000_000
_TOL = 1e-9


def _q(value: float) -> float:
    return round(value * _QUANTUM) / _QUANTUM


def _qadd(a: float, b: float) -> float:
    return (round(a * _QUANTUM) + round(b * _QUANTUM)) / _QUANTUM


class TopologyError(ValueError):
    """Raised when a topology or slice request breaks its invariants."""


class MalformedScheme(ValueError):
    """A scheme references VNFs, nodes or links that do not exist."""


class InfeasibleCommit(ValueError):
    """Committing a scheme would exceed a node or link capacity."""


class Plane(str, Enum):
    CONTROL = "control"
    DATA = "data"


@dataclass(frozen=True)
class PhysicalNode:
    id: str
    cpu_capacity_ghz: float
    cpu_allocated_ghz: float = 0.0
    node_processing_delay_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cpu_allocated_ghz", _q(self.cpu_allocated_ghz))
        if self.cpu_capacity_ghz < 0 or self.node_processing_delay_ms < 0:
            raise TopologyError(f"node {self.id}: negative capacity or delay")
        if not 0 <= self.cpu_allocated_ghz <= self.cpu_capacity_ghz + _TOL:
            raise TopologyError(f"node {self.id}: allocation outside [0, capacity]")

    @property
    def cpu_residual_ghz(self) -> float:
        return self.cpu_capacity_ghz - self.cpu_allocated_ghz


@dataclass(frozen=True)
class PhysicalLink:
    endpoints: tuple[str, str]
    bw_capacity_mbps: float
    bw_allocated_mbps: float = 0.0
    initial_delay_ms: float = 0.0
    max_delay_increase_ms: float = 0.0

    def __post_init__(self):
        a, b = self.endpoints
        object.__setattr__(self, "endpoints", (a, b))
        object.__setattr__(self, "bw_allocated_mbps", _q(self.bw_allocated_mbps))
        if a == b:
            raise TopologyError(f"link {a}-{b}: endpoints must differ")
        if self.bw_capacity_mbps <= 0:
            raise TopologyError(f"link {a}-{b}: capacity must be positive")
        if not 0 <= self.bw_allocated_mbps <= self.bw_capacity_mbps + _TOL:
            raise TopologyError(f"link {a}-{b}: allocation outside [0, capacity]")
        if self.initial_delay_ms < 0 or self.max_delay_increase_ms < 0:
            raise TopologyError(f"link {a}-{b}: negative delay parameter")

    @property
    def key(self) -> frozenset:
        return frozenset(self.endpoints)

    @property
    def bw_residual_mbps(self) -> float:
        return self.bw_capacity_mbps - self.bw_allocated_mbps

    def other(self, node: str) -> str:
        a, b = self.endpoints
        return b if node == a else a


def current_link_delay(link: PhysicalLink) -> float:
    """Utilization-dependent link delay in ms.

    Grows linearly from ``initial_delay_ms`` on an idle link to
    ``initial_delay_ms + max_delay_increase_ms`` on a fully allocated one.
    """
    utilization = link.bw_allocated_mbps / link.bw_capacity_mbps
    return utilization * link.max_delay_increase_ms + link.initial_delay_ms


@dataclass(frozen=True)
class PhysicalTopology:
    nodes: tuple[PhysicalNode, ...]
    links: tuple[PhysicalLink, ...]
    _node_index: dict = field(init=False, repr=False, compare=False)
    _link_index: dict = field(init=False, repr=False, compare=False)
    _adjacency: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "links", tuple(self.links))
        node_index = {}
        for i, n in enumerate(self.nodes):
            if n.id in node_index:
                raise TopologyError(f"duplicate node id {n.id!r}")
            node_index[n.id] = i
        link_index = {}
        adjacency: dict[str, list[str]] = {n.id: [] for n in self.nodes}
        for i, link in enumerate(self.links):
            for end in link.endpoints:
                if end not in node_index:
                    raise TopologyError(f"link references unknown node {end!r}")
            if link.key in link_index:
                raise TopologyError(f"more than one link between {sorted(link.key)}")
            link_index[link.key] = i
            a, b = link.endpoints
            adjacency[a].append(b)
            adjacency[b].append(a)
        for nbrs in adjacency.values():
            nbrs.sort(key=node_index.__getitem__)
        object.__setattr__(self, "_node_index", node_index)
        object.__setattr__(self, "_link_index", link_index)
        object.__setattr__(self, "_adjacency", adjacency)
        if self.nodes and not self._connected():
            raise TopologyError("physical topology is not connected")

    def _connected(self) -> bool:
        start = self.nodes[0].id
        seen = {start}
        todo = deque([start])
        while todo:
            for nbr in self._adjacency[todo.popleft()]:
                if nbr not in seen:
                    seen.add(nbr)
                    todo.append(nbr)
        return len(seen) == len(self.nodes)

    @property
    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def node(self, node_id: str) -> PhysicalNode:
        try:
            return self.nodes[self._node_index[node_id]]
        except KeyError:
            raise MalformedScheme(f"unknown node {node_id!r}") from None

    def node_order(self, node_id: str) -> int:
        return self._node_index[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._node_index

    def link(self, a: str, b: str) -> PhysicalLink:
        try:
            return self.links[self._link_index[frozenset((a, b))]]
        except KeyError:
            raise MalformedScheme(f"no physical link between {a!r} and {b!r}") from None

    def has_link(self, a: str, b: str) -> bool:
        return frozenset((a, b)) in self._link_index

    def link_position(self, a: str, b: str) -> int:
        return self._link_index[frozenset((a, b))]

    def neighbors(self, node_id: str) -> list[str]:
        return self._adjacency[node_id]

    def replace_allocations(self, cpu: Mapping[str, float] | None = None,
                            bw: Mapping[frozenset, float] | None = None) -> "PhysicalTopology":
        cpu = cpu or {}
        bw = bw or {}
        nodes = [dataclasses.replace(n, cpu_allocated_ghz=cpu[n.id]) if n.id in cpu else n
                 for n in self.nodes]
        links = [dataclasses.replace(l, bw_allocated_mbps=bw[l.key]) if l.key in bw else l
                 for l in self.links]
        return PhysicalTopology(tuple(nodes), tuple(links))


@dataclass(frozen=True)
class Vnf:
    id: str
    plane: Plane
    cpu_demand_ghz: float
    vnf_processing_delay_ms: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "plane", Plane(self.plane))
        if self.cpu_demand_ghz <= 0:
            raise TopologyError(f"vnf {self.id}: cpu demand must be positive")
        if self.vnf_processing_delay_ms < 0:
            raise TopologyError(f"vnf {self.id}: negative processing delay")


@dataclass(frozen=True)
class VirtualLink:
    src: str
    dst: str
    bw_demand_mbps: float

    def __post_init__(self):
        if self.src == self.dst:
            raise TopologyError(f"virtual link {self.src}->{self.dst}: self loop")
        if self.bw_demand_mbps <= 0:
            raise TopologyError(f"virtual link {self.src}->{self.dst}: demand must be positive")

    @property
    def key(self) -> tuple[str, str]:
        return (self.src, self.dst)


@dataclass(frozen=True)
class SliceRequest:
    id: str
    vnfs: tuple[Vnf, ...]
    vlinks: tuple[VirtualLink, ...]
    e2e_delay_budget_ms: float
    intra_isolation_control: int = 3
    intra_isolation_data: int = 3
    inter_isolation_control: int = 0
    inter_isolation_data: int = 0
    allocated_bw_mbps: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "vnfs", tuple(self.vnfs))
        object.__setattr__(self, "vlinks", tuple(self.vlinks))
        if not self.vnfs:
            raise TopologyError(f"slice {self.id}: no VNFs")
        ids = [v.id for v in self.vnfs]
        if len(set(ids)) != len(ids):
            raise TopologyError(f"slice {self.id}: duplicate VNF ids")
        for vl in self.vlinks:
            if vl.src not in ids or vl.dst not in ids:
                raise TopologyError(f"slice {self.id}: virtual link {vl.key} leaves the slice")
        if len({vl.key for vl in self.vlinks}) != len(self.vlinks):
            raise TopologyError(f"slice {self.id}: duplicate virtual links")
        if self.e2e_delay_budget_ms <= 0 or self.allocated_bw_mbps <= 0:
            raise TopologyError(f"slice {self.id}: budget and bandwidth grant must be positive")
        if self.intra_isolation_control < 1 or self.intra_isolation_data < 1:
            raise TopologyError(f"slice {self.id}: intra-slice isolation must be >= 1")
        if self.inter_isolation_control not in (0, 1) or self.inter_isolation_data not in (0, 1):
            raise TopologyError(f"slice {self.id}: inter-slice isolation flags are bits")
        if not self._weakly_connected():
            raise TopologyError(f"slice {self.id}: virtual links do not connect all VNFs")

    def _weakly_connected(self) -> bool:
        adj = defaultdict(set)
        for vl in self.vlinks:
            adj[vl.src].add(vl.dst)
            adj[vl.dst].add(vl.src)
        start = self.vnfs[0].id
        seen = {start}
        todo = [start]
        while todo:
            for nbr in adj[todo.pop()]:
                if nbr not in seen:
                    seen.add(nbr)
                    todo.append(nbr)
        return len(seen) == len(self.vnfs)

    def isolation_bound(self, plane: Plane) -> int:
        return self.intra_isolation_control if plane is Plane.CONTROL else self.intra_isolation_data

    def inter_isolated(self, plane: Plane) -> bool:
        flag = self.inter_isolation_control if plane is Plane.CONTROL else self.inter_isolation_data
        return flag == 1

    def with_isolation(self, k_control: int, k_data: int, gamma_control: int = 0,
                       gamma_data: int = 0) -> "SliceRequest":
        return dataclasses.replace(self, intra_isolation_control=k_control,
                                   intra_isolation_data=k_data,
                                   inter_isolation_control=gamma_control,
                                   inter_isolation_data=gamma_data)


def check_batch(slices: Sequence[SliceRequest]) -> None:
    """VNF ids must be unique across the whole batch."""
    seen: set[str] = set()
    for s in slices:
        for v in s.vnfs:
            if v.id in seen:
                raise TopologyError(f"VNF id {v.id!r} appears in more than one slice")
            seen.add(v.id)


@dataclass
class AllocationScheme:
    """Placement of VNFs on nodes plus the physical route of every virtual link.

    ``assignments`` maps a VNF id to its host. A value may also be a sequence
    of node ids, which is how a scheme violating single assignment is
    expressed. Routes are lists of directed hops ``(e, f)`` in travel order.
    """
    assignments: dict[str, str]
    routes: dict[tuple[str, str], list[tuple[str, str]]] = field(default_factory=dict)
    objective_value: float = float("nan")
    per_slice_delay_ms: dict[str, float] = field(default_factory=dict)

    def hosts_of(self, vnf_id: str) -> list[str]:
        value = self.assignments.get(vnf_id)
        if value is None:
            return []
        if isinstance(value, str):
            return [value]
        return list(value)

    def host(self, vnf_id: str) -> str:
        return self.assignments[vnf_id]

    def route(self, src: str, dst: str) -> list[tuple[str, str]]:
        return self.routes.get((src, dst), [])


def path_links(path: Iterable[tuple[str, str]]) -> list[frozenset]:
    return [frozenset(hop) for hop in path]


def route_delay(topology: PhysicalTopology, path: Sequence[tuple[str, str]]) -> float:
    return sum(current_link_delay(topology.link(e, f)) for e, f in path)


def slice_delay(topology: PhysicalTopology, slice_: SliceRequest,
                scheme: AllocationScheme) -> float:
    """Link + VNF + node processing delay of one placed slice."""
    total = 0.0
    for vl in slice_.vlinks:
        total += route_delay(topology, scheme.route(vl.src, vl.dst))
    for v in slice_.vnfs:
        total += v.vnf_processing_delay_ms
        for h in scheme.hosts_of(v.id):
            total += topology.node(h).node_processing_delay_ms
    return total


def _demands(topology, slices, scheme, strict):
    cpu: dict[str, float] = defaultdict(float)
    bw: dict[frozenset, float] = defaultdict(float)
    for s in slices:
        for v in s.vnfs:
            for h in scheme.hosts_of(v.id):
                if strict:
                    topology.node(h)
                cpu[h] += v.cpu_demand_ghz
        for vl in s.vlinks:
            for e, f in scheme.route(vl.src, vl.dst):
                if strict:
                    topology.link(e, f)
                bw[frozenset((e, f))] += vl.bw_demand_mbps
    return cpu, bw


def commit_allocation(topology: PhysicalTopology, slices: SliceRequest | Sequence[SliceRequest],
                      scheme: AllocationScheme) -> PhysicalTopology:
    """Return a copy of ``topology`` with the scheme's CPU and bandwidth added."""
    if isinstance(slices, SliceRequest):
        slices = [slices]
    cpu, bw = _demands(topology, slices, scheme, strict=True)
    new_cpu = {}
    for h, d in cpu.items():
        node = topology.node(h)
        value = _qadd(node.cpu_allocated_ghz, d)
        if value > node.cpu_capacity_ghz + _TOL:
            raise InfeasibleCommit(f"node {h}: {value:.6g} GHz exceeds {node.cpu_capacity_ghz:.6g}")
        new_cpu[h] = value
    new_bw = {}
    for key, d in bw.items():
        link = topology.links[topology.link_position(*key)]
        value = _qadd(link.bw_allocated_mbps, d)
        if value > link.bw_capacity_mbps + _TOL:
            raise InfeasibleCommit(f"link {sorted(key)}: {value:.6g} Mb/s exceeds "
                                   f"{link.bw_capacity_mbps:.6g}")
        new_bw[key] = value
    return topology.replace_allocations(new_cpu, new_bw)


def uncommit_allocation(topology: PhysicalTopology, slices: SliceRequest | Sequence[SliceRequest],
                        scheme: AllocationScheme) -> PhysicalTopology:
    """Inverse of :func:`commit_allocation`."""
    if isinstance(slices, SliceRequest):
        slices = [slices]
    cpu, bw = _demands(topology, slices, scheme, strict=True)
    new_cpu = {h: max(0.0, _qadd(topology.node(h).cpu_allocated_ghz, -d)) for h, d in cpu.items()}
    new_bw = {k: max(0.0, _qadd(topology.links[topology.link_position(*k)].bw_allocated_mbps, -d))
              for k, d in bw.items()}
    return topology.replace_allocations(new_cpu, new_bw)


FAMILIES = ("2", "3", "4", "5", "6", "10a", "10b", "11a", "11b", "12")


@dataclass
class ValidationReport:
    violations: dict[str, list[str]] = field(default_factory=lambda: {f: [] for f in FAMILIES})

    @property
    def ok(self) -> bool:
        return not any(self.violations.values())

    def passed(self, family: str) -> bool:
        return not self.violations[family]

    def add(self, family: str, message: str) -> None:
        self.violations[family].append(message)

    def failing(self) -> list[str]:
        return [f for f in FAMILIES if self.violations[f]]

    def lines(self) -> list[str]:
        out = []
        for f in FAMILIES:
            v = self.violations[f]
            out.append(f"eq{f}: PASS" if not v else f"eq{f}: FAIL " + "; ".join(v))
        return out


def validate_scheme(topology: PhysicalTopology, slices: Sequence[SliceRequest],
                    scheme: AllocationScheme) -> ValidationReport:
    """Check a scheme against every constraint family of the placement model.

    ``topology`` is the state before the batch is placed; its link delays
    are the constants used by the end-to-end delay check.
    """
    report = ValidationReport()
    known_vnfs = {v.id for s in slices for v in s.vnfs}
    for vid in scheme.assignments:
        if vid not in known_vnfs:
            raise MalformedScheme(f"unknown VNF {vid!r}")
    for key, path in scheme.routes.items():
        for e, f in path:
            topology.link(e, f)
    for s in slices:
        for v in s.vnfs:
            for h in scheme.hosts_of(v.id):
                topology.node(h)

    # single assignment
    for s in slices:
        for v in s.vnfs:
            hosts = scheme.hosts_of(v.id)
            if len(hosts) != 1:
                report.add("2", f"{v.id} assigned to {len(hosts)} nodes")

    cpu, bw = _demands(topology, slices, scheme, strict=False)
    for n in topology.nodes:
        if cpu.get(n.id, 0.0) and n.cpu_allocated_ghz + cpu[n.id] > n.cpu_capacity_ghz + _TOL:
            report.add("3", f"{n.id}: {n.cpu_allocated_ghz + cpu[n.id]:.6g} > {n.cpu_capacity_ghz:.6g}")
    for link in topology.links:
        d = bw.get(link.key, 0.0)
        if d and link.bw_allocated_mbps + d > link.bw_capacity_mbps + _TOL:
            report.add("4", f"{'-'.join(link.endpoints)}: {link.bw_allocated_mbps + d:.6g} > "
                            f"{link.bw_capacity_mbps:.6g}")
    demand = sum(v.cpu_demand_ghz for s in slices for v in s.vnfs)
    residual = sum(n.cpu_residual_ghz for n in topology.nodes)
    if demand > residual + _TOL:
        report.add("5", f"total demand {demand:.6g} > residual {residual:.6g}")

    # route connectivity (flow conservation)
    for s in slices:
        for vl in s.vlinks:
            hs, hd = scheme.hosts_of(vl.src), scheme.hosts_of(vl.dst)
            if len(hs) != 1 or len(hd) != 1:
                continue
            path = scheme.route(vl.src, vl.dst)
            if hs[0] == hd[0]:
                if path:
                    report.add("6", f"{vl.src}->{vl.dst}: co-hosted but routed over {len(path)} links")
                continue
            at = hs[0]
            broken = not path
            for e, f in path:
                if e != at:
                    broken = True
                    break
                at = f
            if broken or at != hd[0]:
                report.add("6", f"{vl.src}->{vl.dst}: route does not connect {hs[0]} to {hd[0]}")

    # intra-slice isolation
    for s in slices:
        for plane, tag in ((Plane.CONTROL, "10a"), (Plane.DATA, "10b")):
            bound = s.isolation_bound(plane)
            count: dict[str, int] = defaultdict(int)
            for v in s.vnfs:
                if v.plane is plane:
                    for h in scheme.hosts_of(v.id):
                        count[h] += 1
            for h, c in count.items():
                if c > bound:
                    report.add(tag, f"{s.id}: {c} {plane.value} VNFs on {h} > {bound}")

    # inter-slice isolation: pre-loaded nodes, then other slices of the batch
    owner = {v.id: s.id for s in slices for v in s.vnfs}
    slices_on: dict[str, set[str]] = defaultdict(set)
    for vid, sid in owner.items():
        for h in scheme.hosts_of(vid):
            slices_on[h].add(sid)
    for s in slices:
        for plane, tag in ((Plane.CONTROL, "11a"), (Plane.DATA, "11b")):
            if not s.inter_isolated(plane):
                continue
            for v in s.vnfs:
                if v.plane is not plane:
                    continue
                for h in scheme.hosts_of(v.id):
                    if topology.node(h).cpu_allocated_ghz > 0:
                        report.add(tag, f"{s.id}: {v.id} on pre-loaded node {h}")
                    others = slices_on[h] - {s.id}
                    if others:
                        report.add(tag, f"{s.id}: {v.id} shares {h} with {sorted(others)}")

    for s in slices:
        if any(len(scheme.hosts_of(v.id)) != 1 for v in s.vnfs):
            continue
        delay = slice_delay(topology, s, scheme)
        if delay > s.e2e_delay_budget_ms + _TOL:
            report.add("12", f"{s.id}: delay {delay:.6g} ms > budget {s.e2e_delay_budget_ms:.6g}")
    return report
