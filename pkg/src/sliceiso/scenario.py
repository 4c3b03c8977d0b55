"""Reference scenario generation and campaign settings."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .solvers import Budget, Status, solve_exact, solve_greedy
from .topology import (PhysicalLink, PhysicalNode, PhysicalTopology, Plane, SliceRequest,
                       VirtualLink, Vnf)

# Experiment parameters of the reference testbed.
SERVERS = 3
SERVER_CPU_GHZ = 10.0
LINK_MBPS = 100.0
NODE_DELAY_MS = 0.5
T_INIT_MS = 0.15
DELTA_MS = 16.85
N_SLICES = 12
VNF_NAMES = ("seaf", "ausf", "hss")
CPU_RANGE = (0.4, 1.4)
BW_RANGE = (5.0, 12.0)
VNF_DELAY_RANGE = (0.1, 1.0)
S1_BW_MBPS = 10.0
BUDGET_FACTOR = 1.5


@dataclass(frozen=True)
class Setting:
    """One isolation level of a campaign sweep."""
    label: str
    solver: str  # "greedy" or "exact"
    k_control: int = 3
    k_data: int = 3
    gamma_control: int = 0
    gamma_data: int = 0

    def apply(self, slices):
        if self.solver == "greedy":
            return list(slices)
        return [s.with_isolation(self.k_control, self.k_data, self.gamma_control, self.gamma_data)
                for s in slices]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_SWEEP = (
    Setting("NoIsolation", "greedy"),
    Setting("K_rel=1", "exact", 1, 1),
    Setting("K_rel=2", "exact", 2, 2),
    Setting("K_rel=3", "exact", 3, 3),
)


def reference_topology() -> PhysicalTopology:
    """Three fully meshed servers."""
    nodes = tuple(PhysicalNode(f"ps{i + 1}", SERVER_CPU_GHZ, 0.0, NODE_DELAY_MS)
                  for i in range(SERVERS))
    links = tuple(PhysicalLink((a.id, b.id), LINK_MBPS, 0.0, T_INIT_MS, DELTA_MS)
                  for i, a in enumerate(nodes) for b in nodes[i + 1:])
    return PhysicalTopology(nodes, links)


def spread_delay_ms(topology: PhysicalTopology, vnfs, vlinks) -> float:
    """Unloaded delay of a slice whose VNFs sit on distinct servers (one hop per vlink)."""
    return (len(vlinks) * T_INIT_MS + sum(v.vnf_processing_delay_ms for v in vnfs)
            + len(vnfs) * NODE_DELAY_MS)


def _draw(rng: np.random.Generator, topology: PhysicalTopology) -> list[SliceRequest]:
    slices = []
    for i in range(N_SLICES):
        sid = f"S{i + 1}"
        vnfs = tuple(Vnf(f"{sid}.{name}", Plane.CONTROL,
                         round(float(rng.uniform(*CPU_RANGE)), 3),
                         round(float(rng.uniform(*VNF_DELAY_RANGE)), 3)) for name in VNF_NAMES)
        vlinks = tuple(VirtualLink(vnfs[j].id, vnfs[j + 1].id, round(float(rng.uniform(*BW_RANGE)), 3))
                       for j in range(len(vnfs) - 1))
        budget = round(BUDGET_FACTOR * spread_delay_ms(topology, vnfs, vlinks), 6)
        bw = S1_BW_MBPS if i == 0 else max(vl.bw_demand_mbps for vl in vlinks)
        slices.append(SliceRequest(sid, vnfs, vlinks, budget, 3, 3, 0, 0, bw))
    return slices


def _hosts(scheme, slice_):
    return {scheme.host(v.id) for v in slice_.vnfs}


def check_reference(topology, slices, sweep=DEFAULT_SWEEP, budget: Budget | None = None):
    """Return a reason string if the draw lacks a property of the reference testbed.

    The draw must admit all slices under every sweep setting; greedy packing
    must put slices S1 and S4 wholly on one server, and the ``K_rel=3``
    optimum must put them on disjoint servers.
    """
    budget = budget or Budget(max_nodes=200_000)
    s1, s4 = slices[0], slices[3]
    for setting in sweep:
        batch = setting.apply(slices)
        res = solve_greedy(topology, batch) if setting.solver == "greedy" \
            else solve_exact(topology, batch, budget)
        if res.status not in (Status.OPTIMAL, Status.HEURISTIC):
            return f"{setting.label}: {res.status.value}"
        h1, h4 = _hosts(res.scheme, s1), _hosts(res.scheme, s4)
        if setting.solver == "greedy" and not (len(h1) == 1 and h1 == h4):
            return "greedy does not co-host S1 and S4"
        if setting.label == "K_rel=3" and h1 & h4:
            return "K_rel=3 optimum does not separate S1 and S4"
    return None


def default_campaign(master_seed: int) -> dict:
    return {
        "master_seed": master_seed,
        "repetitions": 3,
        "observed_slice": "S1",
        "sweep": [s.to_dict() for s in DEFAULT_SWEEP],
        "attacks": [
            {"kind": "none"},
            {"kind": "flood", "target_slice": "S4", "start_s": 30.0, "stop_s": 130.0,
             "flood_rate_mbps": 200.0},
            {"kind": "cpu_starve", "target_slice": "S4", "start_s": 30.0, "stop_s": 130.0,
             "cpu_load_fraction": 1.0},
        ],
        "sim": {"duration_s": 150.0},
        "max_seconds": 60.0,
    }


def gen_scenario(template: str = "table2", master_seed: int = 0, max_attempts: int = 10_000):
    """Draw the reference scenario; returns ``(topology, slices, campaign, meta)``.

    Draws are repeated from a stream derived from ``master_seed`` until one
    passes :func:`check_reference`; the attempt index is recorded in ``meta``.
    """
    if template != "table2":
        raise ValueError(f"unknown template {template!r}")
    topology = reference_topology()
    capacity = SERVERS * SERVER_CPU_GHZ
    rejected: dict[str, int] = {}
    for attempt in range(max_attempts):
        rng = np.random.default_rng([master_seed, attempt])
        slices = _draw(rng, topology)
        if sum(v.cpu_demand_ghz for s in slices for v in s.vnfs) > capacity:
            rejected["cpu"] = rejected.get("cpu", 0) + 1
            continue
        reason = check_reference(topology, slices)
        if reason is None:
            meta = {"template": template, "master_seed": master_seed, "attempt": attempt,
                    "rejected": dict(sorted(rejected.items()))}
            return topology, slices, default_campaign(master_seed), meta
        rejected[reason] = rejected.get(reason, 0) + 1
    raise RuntimeError(f"no admissible draw in {max_attempts} attempts: {rejected}")
