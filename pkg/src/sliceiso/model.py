"""MILP construction for batch slice placement and LP-format export.

Variables are ``u_<vnf>_<node>`` (binary placement) and
``y_<src>_<dst>_<e>_<f>`` (non-negative flow of virtual link src->dst on the
directed arc e->f). Link delays are evaluated once, on the topology state
before the batch, and enter the model as constants.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Sequence

from .topology import (AllocationScheme, PhysicalTopology, Plane, SliceRequest,
                       current_link_delay)

TAGS = ("2", "3", "4", "5", "6", "7", "8", "10a", "10b", "11a", "11b", "12")
_TAG_ORDER = {t: i for i, t in enumerate(TAGS)}
_NAME_RE = re.compile(r"[^A-Za-z0-9_.]")


class TriviallyInfeasible(ValueError):
    """Total CPU demand of the batch exceeds the residual CPU of the system."""


def _n(ident: str) -> str:
    return _NAME_RE.sub("_", ident)


def u_name(vnf: str, node: str) -> str:
    return f"u_{_n(vnf)}_{_n(node)}"


def y_name(src: str, dst: str, e: str, f: str) -> str:
    return f"y_{_n(src)}_{_n(dst)}_{_n(e)}_{_n(f)}"


@dataclass
class Constraint:
    tag: str
    name: str
    terms: dict[str, float]
    sense: str  # one of "<=", "=", ">="
    rhs: float

    def __post_init__(self):
        if self.tag not in _TAG_ORDER:
            raise ValueError(f"unknown constraint tag {self.tag!r}")
        if self.sense not in ("<=", "=", ">="):
            raise ValueError(f"unknown sense {self.sense!r}")

    def holds(self, point: dict[str, float], tol: float = 1e-9) -> bool:
        lhs = sum(c * point.get(v, 0.0) for v, c in self.terms.items())
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass
class MilpInstance:
    binary_vars: list[str] = field(default_factory=list)
    flow_vars: list[str] = field(default_factory=list)
    objective: dict[str, float] = field(default_factory=dict)
    constraints: list[Constraint] = field(default_factory=list)

    def count(self, tag: str) -> int:
        return sum(1 for c in self.constraints if c.tag == tag)

    def objective_at(self, point: dict[str, float]) -> float:
        return sum(c * point.get(v, 0.0) for v, c in self.objective.items())

    def violated(self, point: dict[str, float], tol: float = 1e-9) -> list[Constraint]:
        return [c for c in self.constraints if not c.holds(point, tol)]

    def variables(self) -> list[str]:
        return self.binary_vars + self.flow_vars


def _arcs(topology: PhysicalTopology):
    for link in topology.links:
        e, f = link.endpoints
        yield e, f, link
        yield f, e, link


def build_objective(topology: PhysicalTopology, slices: Sequence[SliceRequest]) -> dict[str, float]:
    expr: dict[str, float] = {}
    for s in slices:
        for v in s.vnfs:
            for n in topology.nodes:
                expr[u_name(v.id, n.id)] = n.cpu_allocated_ghz + v.cpu_demand_ghz
        for vl in s.vlinks:
            for e, f, link in _arcs(topology):
                expr[y_name(vl.src, vl.dst, e, f)] = current_link_delay(link)
    return expr


def build_constraints(topology: PhysicalTopology,
                      slices: Sequence[SliceRequest]) -> list[Constraint]:
    vnfs = [(s, v) for s in slices for v in s.vnfs]
    demand = sum(v.cpu_demand_ghz for _, v in vnfs)
    residual = sum(n.cpu_residual_ghz for n in topology.nodes)
    if demand > residual + 1e-9:
        raise TriviallyInfeasible(f"batch demands {demand:.6g} GHz, {residual:.6g} GHz left")
    out: list[Constraint] = []

    for _, v in vnfs:
        out.append(Constraint("2", f"assign_{_n(v.id)}",
                              {u_name(v.id, n.id): 1.0 for n in topology.nodes}, "=", 1.0))

    for n in topology.nodes:
        out.append(Constraint("3", f"cpu_{_n(n.id)}",
                              {u_name(v.id, n.id): v.cpu_demand_ghz for _, v in vnfs},
                              "<=", n.cpu_capacity_ghz - n.cpu_allocated_ghz))

    for link in topology.links:
        e, f = link.endpoints
        terms = {}
        for s in slices:
            for vl in s.vlinks:
                terms[y_name(vl.src, vl.dst, e, f)] = vl.bw_demand_mbps
                terms[y_name(vl.src, vl.dst, f, e)] = vl.bw_demand_mbps
        out.append(Constraint("4", f"bw_{_n(e)}_{_n(f)}", terms,
                              "<=", link.bw_capacity_mbps - link.bw_allocated_mbps))

    if vnfs:
        out.append(Constraint("5", "system_cpu",
                              {u_name(v.id, n.id): v.cpu_demand_ghz
                               for _, v in vnfs for n in topology.nodes}, "<=", residual))

    for s in slices:
        for vl in s.vlinks:
            for n in topology.nodes:
                terms: dict[str, float] = {}
                for nbr in topology.neighbors(n.id):
                    terms[y_name(vl.src, vl.dst, n.id, nbr)] = 1.0
                    terms[y_name(vl.src, vl.dst, nbr, n.id)] = -1.0
                terms[u_name(vl.src, n.id)] = -1.0
                terms[u_name(vl.dst, n.id)] = 1.0
                out.append(Constraint("6", f"flow_{_n(vl.src)}_{_n(vl.dst)}_{_n(n.id)}",
                                      terms, "=", 0.0))

    for s in slices:
        for plane, tag in ((Plane.CONTROL, "10a"), (Plane.DATA, "10b")):
            members = [v for v in s.vnfs if v.plane is plane]
            if not members:
                continue
            for n in topology.nodes:
                out.append(Constraint(tag, f"intra_{_n(s.id)}_{_n(n.id)}",
                                      {u_name(v.id, n.id): 1.0 for v in members},
                                      "<=", float(s.isolation_bound(plane))))

    for s in slices:
        for plane, tag in ((Plane.CONTROL, "11a"), (Plane.DATA, "11b")):
            if not s.inter_isolated(plane):
                continue
            members = [v for v in s.vnfs if v.plane is plane]
            others = [v for o in slices if o is not s for v in o.vnfs]
            for n in topology.nodes:
                for v in members:
                    if n.cpu_allocated_ghz > 0:
                        out.append(Constraint(tag, f"preload_{u_name(v.id, n.id)}",
                                              {u_name(v.id, n.id): 1.0}, "=", 0.0))
                        continue
                    for w in others:
                        out.append(Constraint(tag, f"sep_{u_name(v.id, n.id)}_{_n(w.id)}",
                                              {u_name(v.id, n.id): 1.0, u_name(w.id, n.id): 1.0},
                                              "<=", 1.0))

    for s in slices:
        terms = {}
        for vl in s.vlinks:
            for e, f, link in _arcs(topology):
                terms[y_name(vl.src, vl.dst, e, f)] = current_link_delay(link)
        for v in s.vnfs:
            for n in topology.nodes:
                if n.node_processing_delay_ms:
                    terms[u_name(v.id, n.id)] = n.node_processing_delay_ms
        budget = s.e2e_delay_budget_ms - sum(v.vnf_processing_delay_ms for v in s.vnfs)
        out.append(Constraint("12", f"e2e_{_n(s.id)}", terms, "<=", budget))
    return out


def build_instance(topology: PhysicalTopology, slices: Sequence[SliceRequest]) -> MilpInstance:
    binaries = [u_name(v.id, n.id) for s in slices for v in s.vnfs for n in topology.nodes]
    flows = [y_name(vl.src, vl.dst, e, f) for s in slices for vl in s.vlinks
             for e, f, _ in _arcs(topology)]
    names = binaries + flows
    if len(set(names)) != len(names):
        raise ValueError("identifier sanitization produced clashing variable names")
    return MilpInstance(binaries, flows, build_objective(topology, slices),
                        build_constraints(topology, slices))


def scheme_point(topology: PhysicalTopology, slices: Sequence[SliceRequest],
                 scheme: AllocationScheme) -> dict[str, float]:
    """Map a scheme onto model variables (unit flow along each route)."""
    point: dict[str, float] = {}
    for s in slices:
        for v in s.vnfs:
            for h in scheme.hosts_of(v.id):
                point[u_name(v.id, h)] = point.get(u_name(v.id, h), 0.0) + 1.0
        for vl in s.vlinks:
            for e, f in scheme.route(vl.src, vl.dst):
                key = y_name(vl.src, vl.dst, e, f)
                point[key] = point.get(key, 0.0) + 1.0
    return point


def _fmt(x: float) -> str:
    if x == 0:
        x = 0.0  # no negative zero
    return format(x, ".17g")


def _expr(terms: dict[str, float], per_line: int = 6) -> list[str]:
    chunks = []
    for i, (var, coef) in enumerate(terms.items()):
        sign = "-" if coef < 0 else "+"
        if i == 0:
            chunks.append(f"{'- ' if coef < 0 else ''}{_fmt(abs(coef))} {var}")
        else:
            chunks.append(f"{sign} {_fmt(abs(coef))} {var}")
    lines = []
    for i in range(0, len(chunks), per_line):
        lines.append(" ".join(chunks[i:i + per_line]))
    return lines or ["0"]


def export_lp(instance: MilpInstance) -> str:
    """Render the instance in CPLEX LP text format (deterministic)."""
    out = ["\\ slice placement model", "Minimize"]
    obj = _expr(instance.objective)
    out.append(" obj: " + obj[0])
    out.extend("   " + line for line in obj[1:])
    out.append("Subject To")
    ordered = sorted(enumerate(instance.constraints), key=lambda ic: (_TAG_ORDER[ic[1].tag], ic[0]))
    for _, c in ordered:
        body = _expr(c.terms)
        if body == ["0"]:
            continue
        out.append(f" eq{c.tag}_{c.name}: " + body[0])
        out.extend("   " + line for line in body[1:])
        out.append(f"   {c.sense} {_fmt(c.rhs)}")
    out.append("Bounds")
    for v in instance.flow_vars:
        out.append(f" {v} >= 0")
    if instance.binary_vars:
        out.append("Binaries")
        for v in instance.binary_vars:
            out.append(f" {v}")
    out.append("End")
    return "\n".join(out) + "\n"
