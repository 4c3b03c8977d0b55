import numpy as np
import pytest

from sliceiso.instances import random_instance
from sliceiso.solvers import (Budget, SearchSpaceTooLarge, Status, brute_force_oracle,
                              min_delay_route, solve_exact, solve_greedy)
from sliceiso.topology import (PhysicalLink, PhysicalNode, PhysicalTopology, Plane, SliceRequest,
                               VirtualLink, Vnf)


def chain(sid, demands, k=3, gamma=0, budget=100.0):
    vnfs = tuple(Vnf(f"{sid}.{i}", Plane.CONTROL, d, 0.5) for i, d in enumerate(demands))
    vlinks = tuple(VirtualLink(vnfs[i].id, vnfs[i + 1].id, 1.0) for i in range(len(vnfs) - 1))
    return SliceRequest(sid, vnfs, vlinks, budget, k, k, gamma, gamma)


def star(n, cpu=10.0, preload=()):
    preload = dict(preload)
    nodes = tuple(PhysicalNode(f"n{i}", cpu, preload.get(f"n{i}", 0.0)) for i in range(n))
    links = tuple(PhysicalLink(("n0", f"n{i}"), 100.0, 0.0, 0.15, 16.85) for i in range(1, n))
    return PhysicalTopology(nodes, links)


def test_exact_prefers_unloaded_node():
    topo = star(2, preload={"n0": 5.0})
    res = solve_exact(topo, [chain("s", [1.0])])
    assert res.status is Status.OPTIMAL
    assert res.scheme.assignments == {"s.0": "n1"}
    assert res.objective_value == pytest.approx(1.0)


def test_route_prefers_two_cheap_hops():
    nodes = tuple(PhysicalNode(x, 10.0) for x in "abc")
    links = (PhysicalLink(("a", "b"), 100.0, 0.0, 0.15, 0.0),
             PhysicalLink(("b", "c"), 100.0, 0.0, 0.15, 0.0),
             PhysicalLink(("a", "c"), 100.0, 0.0, 17.0, 0.0))
    topo = PhysicalTopology(nodes, links)
    path = min_delay_route(topo, "a", "c", 1.0)
    assert path == [("a", "b"), ("b", "c")]
    assert sum(topo.link(*h).initial_delay_ms for h in path) == pytest.approx(0.30)


def test_route_line_graph_and_same_host():
    nodes = tuple(PhysicalNode(x, 10.0) for x in "abc")
    links = (PhysicalLink(("a", "b"), 100.0, 0.0, 0.15, 16.85),
             PhysicalLink(("b", "c"), 100.0, 0.0, 0.15, 16.85))
    topo = PhysicalTopology(nodes, links)
    assert min_delay_route(topo, "a", "c", 1.0) == [("a", "b"), ("b", "c")]
    assert min_delay_route(topo, "b", "b", 1.0) == []
    assert min_delay_route(topo, "a", "c", 101.0) is None


def test_greedy_walk_matches_cumulative_sum():
    rng = np.random.default_rng(12)
    demands = np.round(rng.uniform(0.4, 1.4, 36), 3)
    slices = [chain(f"S{i + 1}", demands[3 * i:3 * i + 3]) for i in range(12)]
    nodes = tuple(PhysicalNode(f"ps{i}", 10.0) for i in range(1, 6))
    links = tuple(PhysicalLink((f"ps{i}", f"ps{i + 1}"), 1000.0, 0.0, 0.15, 16.85)
                  for i in range(1, 5))
    res = solve_greedy(PhysicalTopology(nodes, links), slices)
    assert res.status is Status.HEURISTIC
    on_first = sum(1 for h in res.scheme.assignments.values() if h == "ps1")
    expected = int(np.searchsorted(np.cumsum(demands), 10.0 + 1e-9, side="right"))
    assert on_first == expected
    assert 9 <= on_first <= 14


def test_greedy_single_slice_cohosts_and_is_deterministic():
    topo = star(3)
    s = chain("s", [0.5, 0.7, 0.9], k=1)
    res = solve_greedy(topo, [s])
    assert set(res.scheme.assignments.values()) == {"n0"}
    assert not res.report.ok  # greedy ignores the isolation bound
    again = solve_greedy(topo, [s])
    assert again.scheme.assignments == res.scheme.assignments
    assert again.scheme.routes == res.scheme.routes


def test_oracle_infeasible_and_inter_isolation():
    topo = star(2, cpu=1.0)
    assert brute_force_oracle(topo, [chain("s", [0.8, 0.8, 0.8])]).status is Status.INFEASIBLE
    topo = star(3, preload={"n1": 0.5})
    s = chain("s", [0.4, 0.4], k=1, gamma=1)
    res = brute_force_oracle(topo, [s])
    assert res.status is Status.OPTIMAL
    assert "n1" not in res.scheme.assignments.values()
    assert solve_exact(topo, [s]).objective_value == pytest.approx(res.objective_value, abs=1e-9)


def test_oracle_refuses_huge_spaces():
    topo = star(4)
    with pytest.raises(SearchSpaceTooLarge):
        brute_force_oracle(topo, [chain(f"s{i}", [0.1] * 3) for i in range(4)], limit=1000)


def test_exact_matches_oracle_on_small_instances():
    for seed in range(40):
        topo, slices = random_instance(seed, max_nodes=3, max_slices=2)
        a, b = solve_exact(topo, slices), brute_force_oracle(topo, slices)
        assert a.status is b.status
        if a.status is Status.OPTIMAL:
            assert a.objective_value == pytest.approx(b.objective_value, abs=1e-6)
            assert a.report.ok


def test_exact_reports_timeout():
    topo, slices = random_instance(0)
    res = solve_exact(topo, slices, Budget(max_nodes=2))
    assert res.status is Status.TIMEOUT
    assert solve_exact(topo, slices).status is Status.OPTIMAL


def test_reference_k3_respects_the_bound(reference_schemes):
    batch, res = reference_schemes["K_rel=3"]
    assert res.status is Status.OPTIMAL and res.report.ok
    for s in batch:
        hosts = [res.scheme.host(v.id) for v in s.vnfs]
        assert max(hosts.count(h) for h in hosts) <= 3


def test_tightening_isolation_never_lowers_the_optimum(reference_schemes):
    objs = [reference_schemes[f"K_rel={k}"][1].objective_value for k in (1, 2, 3)]
    assert objs[0] >= objs[1] - 1e-9 >= objs[2] - 2e-9
