"""Exact branch-and-bound placement, FCFS greedy baseline and brute-force oracle.

All three share one routing rule: virtual links are routed one at a time, in
batch order, on the minimum-delay path among links whose residual bandwidth
still covers the demand. Link delays are the pre-batch constants.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .topology import (AllocationScheme, PhysicalTopology, Plane, SliceRequest,
                       ValidationReport, current_link_delay, slice_delay, validate_scheme)

log = logging.getLogger(__name__)

EPS = 1e-9


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    TIMEOUT = "timeout"
    HEURISTIC = "heuristic"  # greedy result; may violate isolation and delay families


class SearchSpaceTooLarge(ValueError):
    pass


@dataclass
class SolveResult:
    status: Status
    scheme: AllocationScheme | None = None
    objective_value: float = float("inf")
    nodes_explored: int = 0
    wall_time: float = 0.0
    report: ValidationReport | None = None
    message: str = ""


@dataclass
class Budget:
    max_nodes: int | None = None
    max_seconds: float | None = None


def min_delay_route(topology: PhysicalTopology, host_src: str, host_dst: str,
                    bw_demand: float, residual: dict | None = None):
    """Minimum-delay path with enough residual bandwidth, as a list of hops.

    Returns ``[]`` for co-hosted endpoints and ``None`` when no path
    qualifies. Equal-delay paths are resolved towards the lexicographically
    smallest sequence of node positions.
    """
    if host_src == host_dst:
        return []
    order = topology.node_order
    best = {}
    heap = [(0.0, (order(host_src),), host_src, ())]
    while heap:
        dist, key, node, hops = heapq.heappop(heap)
        if node in best:
            continue
        best[node] = dist
        if node == host_dst:
            return list(hops)
        for nbr in topology.neighbors(node):
            if nbr in best:
                continue
            link = topology.link(node, nbr)
            free = residual[link.key] if residual is not None else link.bw_residual_mbps
            if free + EPS < bw_demand:
                continue
            heapq.heappush(heap, (dist + current_link_delay(link), key + (order(nbr),), nbr,
                                  hops + ((node, nbr),)))
    return None


def _route_delay(topology, path):
    return sum(current_link_delay(topology.link(e, f)) for e, f in path)


def route_slices(topology: PhysicalTopology, slices: Sequence[SliceRequest],
                 assignment: dict[str, str], residual: dict | None = None):
    """Route every virtual link in batch order; ``None`` if one cannot be routed.

    ``residual`` (link key -> Mb/s) is updated in place when given.
    """
    if residual is None:
        residual = {l.key: l.bw_residual_mbps for l in topology.links}
    routes = {}
    for s in slices:
        for vl in s.vlinks:
            path = min_delay_route(topology, assignment[vl.src], assignment[vl.dst],
                                   vl.bw_demand_mbps, residual)
            if path is None:
                return None
            for e, f in path:
                residual[frozenset((e, f))] -= vl.bw_demand_mbps
            routes[vl.key] = path
    return routes


def scheme_objective(topology: PhysicalTopology, slices: Sequence[SliceRequest],
                     scheme: AllocationScheme) -> float:
    total = 0.0
    for s in slices:
        for v in s.vnfs:
            host = topology.node(scheme.host(v.id))
            total += host.cpu_allocated_ghz + v.cpu_demand_ghz
        for vl in s.vlinks:
            total += _route_delay(topology, scheme.route(vl.src, vl.dst))
    return total


def _finish(topology, slices, assignment, routes) -> AllocationScheme:
    scheme = AllocationScheme(dict(assignment), dict(routes))
    scheme.objective_value = scheme_objective(topology, slices, scheme)
    scheme.per_slice_delay_ms = {s.id: slice_delay(topology, s, scheme) for s in slices}
    return scheme


# --------------------------------------------------------------------------
# exact solver


@dataclass
class _Candidate:
    nodes: tuple[int, ...]
    bound: float          # node term + unconstrained routing delay
    node_term: float
    per_node_cpu: dict[int, float]
    locks: frozenset      # node positions hosting an inter-isolated plane of the slice


@dataclass
class _Search:
    topology: PhysicalTopology
    slices: Sequence[SliceRequest]
    candidates: list[list[_Candidate]]
    suffix: list[float]
    budget: Budget
    start: float
    nodes_explored: int = 0
    best_obj: float = float("inf")
    best_vec: tuple = ()
    best: tuple | None = None
    timed_out: bool = False
    cpu_free: list[float] = field(default_factory=list)
    residual: dict = field(default_factory=dict)
    owners: list[set] = field(default_factory=list)
    locked: list[int | None] = field(default_factory=list)


def _slice_candidates(topology: PhysicalTopology, s: SliceRequest) -> list[_Candidate]:
    nodes = topology.nodes
    ids = [n.id for n in nodes]
    out = []
    for combo in itertools.product(range(len(nodes)), repeat=len(s.vnfs)):
        per_plane: dict[tuple, int] = {}
        cpu: dict[int, float] = {}
        ok = True
        locks = set()
        for v, k in zip(s.vnfs, combo):
            key = (v.plane, k)
            per_plane[key] = per_plane.get(key, 0) + 1
            if per_plane[key] > s.isolation_bound(v.plane):
                ok = False
                break
            if s.inter_isolated(v.plane):
                if nodes[k].cpu_allocated_ghz > 0:
                    ok = False
                    break
                locks.add(k)
            cpu[k] = cpu.get(k, 0.0) + v.cpu_demand_ghz
            if cpu[k] > nodes[k].cpu_residual_ghz + EPS:
                ok = False
                break
        if not ok:
            continue
        assignment = {v.id: ids[k] for v, k in zip(s.vnfs, combo)}
        routes = route_slices(topology, [s], assignment)
        if routes is None:
            continue
        scheme = AllocationScheme(assignment, routes)
        if slice_delay(topology, s, scheme) > s.e2e_delay_budget_ms + EPS:
            continue
        node_term = sum(nodes[k].cpu_allocated_ghz + v.cpu_demand_ghz
                        for v, k in zip(s.vnfs, combo))
        routing = sum(_route_delay(topology, p) for p in routes.values())
        out.append(_Candidate(combo, node_term + routing, node_term, cpu, frozenset(locks)))
    # cheapest first; lexicographic among equal bounds
    out.sort(key=lambda c: (c.bound, c.nodes))
    return out


def solve_exact(topology: PhysicalTopology, slices: Sequence[SliceRequest],
                budget: Budget | None = None) -> SolveResult:
    """Optimal placement by depth-first branch and bound over slices.

    Each level fixes the placement of one slice. A subtree is pruned when
    its bound (committed cost plus the cheapest standalone placement of each
    remaining slice) cannot beat the incumbent, or when it can only tie with
    a lexicographically larger assignment vector.
    """
    budget = budget or Budget()
    t0 = time.perf_counter()
    slices = list(slices)
    demand = sum(v.cpu_demand_ghz for s in slices for v in s.vnfs)
    if demand > sum(n.cpu_residual_ghz for n in topology.nodes) + EPS:
        return SolveResult(Status.INFEASIBLE, wall_time=time.perf_counter() - t0,
                           message="total CPU demand exceeds residual capacity")
    candidates = [_slice_candidates(topology, s) for s in slices]
    if any(not c for c in candidates):
        return SolveResult(Status.INFEASIBLE, wall_time=time.perf_counter() - t0,
                           message="a slice has no standalone-feasible placement")
    suffix = [0.0] * (len(slices) + 1)
    for i in range(len(slices) - 1, -1, -1):
        suffix[i] = suffix[i + 1] + candidates[i][0].bound
    remaining_demand = [0.0] * (len(slices) + 1)
    for i in range(len(slices) - 1, -1, -1):
        remaining_demand[i] = remaining_demand[i + 1] + sum(v.cpu_demand_ghz for v in slices[i].vnfs)

    # least CPU that each group of nodes must still absorb from slices level..
    n_nodes = len(topology.nodes)
    if n_nodes <= 10:
        groups = [tuple(k for k in range(n_nodes) if m >> k & 1) for m in range(1, 1 << n_nodes)]
    else:
        groups = [(k,) for k in range(n_nodes)]
    group_floor = [[0.0] * len(groups) for _ in range(len(slices) + 1)]
    for i in range(len(slices) - 1, -1, -1):
        for g, grp in enumerate(groups):
            least = min(sum(c.per_node_cpu.get(k, 0.0) for k in grp) for c in candidates[i])
            group_floor[i][g] = group_floor[i + 1][g] + least

    st = _Search(topology, slices, candidates, suffix, budget, t0)
    st.cpu_free = [n.cpu_residual_ghz for n in topology.nodes]
    st.residual = {l.key: l.bw_residual_mbps for l in topology.links}
    st.owners = [set() for _ in topology.nodes]
    st.locked = [None] * len(topology.nodes)
    ids = topology.node_ids

    def out_of_budget() -> bool:
        if budget.max_nodes is not None and st.nodes_explored >= budget.max_nodes:
            return True
        if budget.max_seconds is not None and time.perf_counter() - t0 > budget.max_seconds:
            return True
        return False

    def dfs(level: int, acc: float, vec: tuple, routes: dict) -> None:
        if level == len(slices):
            better = acc < st.best_obj - EPS
            tie = abs(acc - st.best_obj) <= EPS and vec < st.best_vec
            if better or tie:
                st.best_obj, st.best_vec, st.best = acc, vec, dict(routes)
                log.info("incumbent %.9g after %d nodes (%.3fs)", acc, st.nodes_explored,
                         time.perf_counter() - t0)
            return
        if sum(st.cpu_free) + EPS < remaining_demand[level]:
            return
        free = st.cpu_free
        for grp, need in zip(groups, group_floor[level]):
            if sum(free[k] for k in grp) + EPS < need:
                return
        s = slices[level]
        for cand in candidates[level]:
            if st.timed_out:
                return
            lower = acc + cand.bound + suffix[level + 1]
            if lower > st.best_obj + EPS:
                break  # candidates are sorted by bound
            prefix = vec + cand.nodes
            if lower >= st.best_obj - EPS and prefix > st.best_vec[:len(prefix)]:
                continue
            st.nodes_explored += 1
            if out_of_budget():
                st.timed_out = True
                return
            if any(st.cpu_free[k] + EPS < d for k, d in cand.per_node_cpu.items()):
                continue
            blocked = False
            for k in cand.per_node_cpu:
                if st.locked[k] is not None and st.locked[k] != level:
                    blocked = True
                    break
                if k in cand.locks and st.owners[k] - {level}:
                    blocked = True
                    break
            if blocked:
                continue
            assignment = {v.id: ids[k] for v, k in zip(s.vnfs, cand.nodes)}
            saved = dict(st.residual)
            placed = route_slices(topology, [s], assignment, st.residual)
            if placed is None:
                st.residual = saved
                continue
            routing = sum(_route_delay(topology, p) for p in placed.values())
            scheme = AllocationScheme(assignment, placed)
            if slice_delay(topology, s, scheme) > s.e2e_delay_budget_ms + EPS:
                st.residual = saved
                continue
            cost = cand.node_term + routing
            if acc + cost + suffix[level + 1] > st.best_obj + EPS:
                st.residual = saved
                continue
            for k, d in cand.per_node_cpu.items():
                st.cpu_free[k] -= d
                st.owners[k].add(level)
            for k in cand.locks:
                st.locked[k] = level
            merged = dict(routes)
            merged.update(placed)
            dfs(level + 1, acc + cost, prefix, merged)
            for k, d in cand.per_node_cpu.items():
                st.cpu_free[k] += d
                st.owners[k].discard(level)
            for k in cand.locks:
                st.locked[k] = None
            st.residual = saved

    dfs(0, 0.0, (), {})
    elapsed = time.perf_counter() - t0
    if st.best is None:
        status = Status.TIMEOUT if st.timed_out else Status.INFEASIBLE
        return SolveResult(status, nodes_explored=st.nodes_explored, wall_time=elapsed)
    assignment = {v.id: ids[k] for v, k in zip((v for s in slices for v in s.vnfs), st.best_vec)}
    scheme = _finish(topology, slices, assignment, st.best)
    status = Status.TIMEOUT if st.timed_out else Status.OPTIMAL
    return SolveResult(status, scheme, scheme.objective_value, st.nodes_explored, elapsed,
                       validate_scheme(topology, slices, scheme))


# --------------------------------------------------------------------------
# greedy baseline


def solve_greedy(topology: PhysicalTopology, slices: Sequence[SliceRequest]) -> SolveResult:
    """First-come-first-serve packing that ignores isolation and delay budgets.

    VNFs are taken in arrival order and placed on the current node until it
    cannot hold the next one, after which the next node is opened.
    """
    t0 = time.perf_counter()
    free = [n.cpu_residual_ghz for n in topology.nodes]
    ids = topology.node_ids
    assignment = {}
    k = 0
    for s in slices:
        for v in s.vnfs:
            while k < len(ids) and free[k] + EPS < v.cpu_demand_ghz:
                k += 1
            if k == len(ids):
                return SolveResult(Status.INFEASIBLE, wall_time=time.perf_counter() - t0,
                                   message=f"no CPU left for {v.id}")
            free[k] -= v.cpu_demand_ghz
            assignment[v.id] = ids[k]
    routes = route_slices(topology, slices, assignment)
    if routes is None:
        return SolveResult(Status.INFEASIBLE, wall_time=time.perf_counter() - t0,
                           message="a virtual link could not be routed")
    scheme = _finish(topology, slices, assignment, routes)
    report = validate_scheme(topology, slices, scheme)
    return SolveResult(Status.HEURISTIC, scheme, scheme.objective_value, len(assignment),
                       time.perf_counter() - t0, report)


# --------------------------------------------------------------------------
# brute-force oracle


def _all_pairs_delay(topology: PhysicalTopology) -> np.ndarray:
    n = len(topology.nodes)
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for link in topology.links:
        a, b = (topology.node_order(x) for x in link.endpoints)
        dist[a, b] = dist[b, a] = min(dist[a, b], current_link_delay(link))
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def brute_force_oracle(topology: PhysicalTopology, slices: Sequence[SliceRequest],
                       limit: int = 10**7) -> SolveResult:
    """Enumerate every complete assignment and keep the best valid one.

    Assignment-only constraints are screened with vectorized masks; each
    survivor that could still beat the incumbent is routed and then checked
    with :func:`validate_scheme`.
    """
    t0 = time.perf_counter()
    slices = list(slices)
    vnfs = [v for s in slices for v in s.vnfs]
    owner = [i for i, s in enumerate(slices) for _ in s.vnfs]
    n_nodes, n_vnfs = len(topology.nodes), len(vnfs)
    space = n_nodes ** n_vnfs
    if space > limit:
        raise SearchSpaceTooLarge(f"{space} assignments exceed the limit of {limit}")
    demand = sum(v.cpu_demand_ghz for v in vnfs)
    if demand > sum(n.cpu_residual_ghz for n in topology.nodes) + EPS:
        return SolveResult(Status.INFEASIBLE, wall_time=time.perf_counter() - t0,
                           message="total CPU demand exceeds residual capacity")

    idx = np.arange(space, dtype=np.int64)
    powers = n_nodes ** np.arange(n_vnfs - 1, -1, -1, dtype=np.int64)
    grid = (idx[:, None] // powers[None, :]) % n_nodes  # row i = i-th vector in lex order
    sigma = np.array([n.cpu_allocated_ghz for n in topology.nodes])
    req = np.array([v.cpu_demand_ghz for v in vnfs])
    node_cost = (sigma[grid] + req[None, :]).sum(axis=1)

    keep = np.ones(space, dtype=bool)
    for k, n in enumerate(topology.nodes):
        load = ((grid == k) * req[None, :]).sum(axis=1)
        keep &= load <= n.cpu_residual_ghz + EPS
    for si, s in enumerate(slices):
        cols = [j for j in range(n_vnfs) if owner[j] == si]
        for plane in Plane:
            pc = [j for j in cols if vnfs[j].plane is plane]
            if not pc:
                continue
            bound = s.isolation_bound(plane)
            for k in range(n_nodes):
                keep &= (grid[:, pc] == k).sum(axis=1) <= bound
            if s.inter_isolated(plane):
                others = [j for j in range(n_vnfs) if owner[j] != si]
                for k, n in enumerate(topology.nodes):
                    here = (grid[:, pc] == k).any(axis=1)
                    if n.cpu_allocated_ghz > 0:
                        keep &= ~here
                    elif others:
                        keep &= ~(here & (grid[:, others] == k).any(axis=1))

    # Bandwidth-free shortest delays bound every route from below.
    dist = _all_pairs_delay(topology)
    vidx = {v.id: j for j, v in enumerate(vnfs)}
    routing_lb = np.zeros(space)
    delay_lb = {si: np.full(space, sum(v.vnf_processing_delay_ms for v in s.vnfs))
                for si, s in enumerate(slices)}
    node_delay = np.array([n.node_processing_delay_ms for n in topology.nodes])
    for j in range(n_vnfs):
        delay_lb[owner[j]] = delay_lb[owner[j]] + node_delay[grid[:, j]]
    for si, s in enumerate(slices):
        for vl in s.vlinks:
            d = dist[grid[:, vidx[vl.src]], grid[:, vidx[vl.dst]]]
            routing_lb += d
            delay_lb[si] = delay_lb[si] + d
        keep &= delay_lb[si] <= s.e2e_delay_budget_ms + EPS
    keep &= np.isfinite(routing_lb)
    lower = node_cost + routing_lb

    survivors = np.flatnonzero(keep)
    order = survivors[np.argsort(lower[survivors], kind="stable")]
    ids = topology.node_ids
    best_obj, best_idx, best_scheme = float("inf"), None, None
    for i in order:
        if lower[i] > best_obj + EPS:
            break
        assignment = {v.id: ids[k] for v, k in zip(vnfs, grid[i])}
        routes = route_slices(topology, slices, assignment)
        if routes is None:
            continue
        scheme = AllocationScheme(assignment, routes)
        if not validate_scheme(topology, slices, scheme).ok:
            continue
        obj = scheme_objective(topology, slices, scheme)
        if obj < best_obj - EPS or (abs(obj - best_obj) <= EPS and i < best_idx):
            best_obj, best_idx, best_scheme = obj, i, scheme
    elapsed = time.perf_counter() - t0
    if best_scheme is None:
        return SolveResult(Status.INFEASIBLE, nodes_explored=space, wall_time=elapsed)
    scheme = _finish(topology, slices, best_scheme.assignments, best_scheme.routes)
    return SolveResult(Status.OPTIMAL, scheme, scheme.objective_value, space, elapsed,
                       validate_scheme(topology, slices, scheme))
