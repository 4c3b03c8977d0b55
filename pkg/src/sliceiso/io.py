"""JSON encoding of topologies, slice requests and allocation schemes."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

from .topology import (AllocationScheme, PhysicalLink, PhysicalNode, PhysicalTopology,
                       SliceRequest, TopologyError, VirtualLink, Vnf, check_batch)


class ScenarioFormatError(ValueError):
    pass


NODE_KEYS = {"id", "cpu_capacity_ghz", "cpu_allocated_ghz", "node_processing_delay_ms"}
LINK_KEYS = {"endpoints", "bw_capacity_mbps", "bw_allocated_mbps", "initial_delay_ms",
             "max_delay_increase_ms"}
VNF_KEYS = {"id", "plane", "cpu_demand_ghz", "vnf_processing_delay_ms"}
VLINK_KEYS = {"src", "dst", "bw_demand_mbps"}
SLICE_KEYS = {"id", "vnfs", "vlinks", "e2e_delay_budget_ms", "intra_isolation_control",
              "intra_isolation_data", "inter_isolation_control", "inter_isolation_data",
              "allocated_bw_mbps"}
TOP_KEYS = {"nodes", "links", "slices", "campaign", "meta"}


def _check_keys(obj: Any, allowed: set[str], where: str, required: Sequence[str] = ()) -> None:
    if not isinstance(obj, dict):
        raise ScenarioFormatError(f"{where}: expected an object")
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioFormatError(f"{where}: unknown keys {sorted(unknown)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise ScenarioFormatError(f"{where}: missing keys {missing}")


def topology_from_dict(data: dict) -> PhysicalTopology:
    nodes = []
    for i, n in enumerate(data.get("nodes", [])):
        _check_keys(n, NODE_KEYS, f"nodes[{i}]", ("id", "cpu_capacity_ghz"))
        nodes.append(PhysicalNode(**n))
    links = []
    for i, l in enumerate(data.get("links", [])):
        _check_keys(l, LINK_KEYS, f"links[{i}]", ("endpoints", "bw_capacity_mbps"))
        if len(l["endpoints"]) != 2:
            raise ScenarioFormatError(f"links[{i}]: endpoints must be a pair")
        links.append(PhysicalLink(**{**l, "endpoints": tuple(l["endpoints"])}))
    return PhysicalTopology(tuple(nodes), tuple(links))


def slice_from_dict(s: dict, where: str = "slice") -> SliceRequest:
    _check_keys(s, SLICE_KEYS, where, ("id", "vnfs", "vlinks", "e2e_delay_budget_ms"))
    vnfs = []
    for j, v in enumerate(s["vnfs"]):
        _check_keys(v, VNF_KEYS, f"{where}.vnfs[{j}]", ("id", "plane", "cpu_demand_ghz"))
        vnfs.append(Vnf(**v))
    vlinks = []
    for j, vl in enumerate(s["vlinks"]):
        _check_keys(vl, VLINK_KEYS, f"{where}.vlinks[{j}]", tuple(VLINK_KEYS))
        vlinks.append(VirtualLink(**vl))
    return SliceRequest(**{**s, "vnfs": tuple(vnfs), "vlinks": tuple(vlinks)})


def parse_scenario(data: dict) -> tuple[PhysicalTopology, list[SliceRequest], dict, dict]:
    """Return ``(topology, slices, campaign, meta)`` from a scenario document."""
    _check_keys(data, TOP_KEYS, "scenario", ("nodes", "links", "slices"))
    try:
        topology = topology_from_dict(data)
        slices = [slice_from_dict(s, f"slices[{i}]") for i, s in enumerate(data["slices"])]
        check_batch(slices)
    except (TypeError, TopologyError) as exc:
        raise ScenarioFormatError(str(exc)) from exc
    return topology, slices, data.get("campaign", {}), data.get("meta", {})


def load_scenario(path: str | Path):
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioFormatError(f"{path}: {exc}") from exc
    return parse_scenario(data)


def topology_to_dict(topology: PhysicalTopology) -> dict:
    return {
        "nodes": [{"id": n.id, "cpu_capacity_ghz": n.cpu_capacity_ghz,
                   "cpu_allocated_ghz": n.cpu_allocated_ghz,
                   "node_processing_delay_ms": n.node_processing_delay_ms} for n in topology.nodes],
        "links": [{"endpoints": list(l.endpoints), "bw_capacity_mbps": l.bw_capacity_mbps,
                   "bw_allocated_mbps": l.bw_allocated_mbps,
                   "initial_delay_ms": l.initial_delay_ms,
                   "max_delay_increase_ms": l.max_delay_increase_ms} for l in topology.links],
    }


def slice_to_dict(s: SliceRequest) -> dict:
    return {
        "id": s.id,
        "vnfs": [{"id": v.id, "plane": v.plane.value, "cpu_demand_ghz": v.cpu_demand_ghz,
                  "vnf_processing_delay_ms": v.vnf_processing_delay_ms} for v in s.vnfs],
        "vlinks": [{"src": vl.src, "dst": vl.dst, "bw_demand_mbps": vl.bw_demand_mbps}
                   for vl in s.vlinks],
        "e2e_delay_budget_ms": s.e2e_delay_budget_ms,
        "intra_isolation_control": s.intra_isolation_control,
        "intra_isolation_data": s.intra_isolation_data,
        "inter_isolation_control": s.inter_isolation_control,
        "inter_isolation_data": s.inter_isolation_data,
        "allocated_bw_mbps": s.allocated_bw_mbps,
    }


def scenario_to_dict(topology, slices, campaign=None, meta=None) -> dict:
    out = topology_to_dict(topology)
    out["slices"] = [slice_to_dict(s) for s in slices]
    if campaign is not None:
        out["campaign"] = campaign
    if meta is not None:
        out["meta"] = meta
    return out


def dumps(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=False) + "\n"


def scheme_to_dict(scheme: AllocationScheme) -> dict:
    return {
        "assignments": dict(scheme.assignments),
        "routes": [{"src": s, "dst": d, "path": [list(hop) for hop in path]}
                   for (s, d), path in scheme.routes.items()],
        "objective_value": scheme.objective_value,
        "per_slice_delay_ms": dict(scheme.per_slice_delay_ms),
    }


def scheme_from_dict(data: dict) -> AllocationScheme:
    _check_keys(data, {"assignments", "routes", "objective_value", "per_slice_delay_ms"},
                "scheme", ("assignments",))
    routes = {(r["src"], r["dst"]): [tuple(hop) for hop in r["path"]]
              for r in data.get("routes", [])}
    return AllocationScheme(dict(data["assignments"]), routes,
                            float(data.get("objective_value", float("nan"))),
                            dict(data.get("per_slice_delay_ms", {})))
