import json

import pytest

from sliceiso.io import (ScenarioFormatError, dumps, parse_scenario, scenario_to_dict,
                         scheme_from_dict, scheme_to_dict)
from sliceiso.topology import (AllocationScheme, InfeasibleCommit, MalformedScheme,
                               PhysicalLink, PhysicalNode, PhysicalTopology, Plane, SliceRequest,
                               TopologyError, VirtualLink, Vnf, check_batch, commit_allocation,
                               current_link_delay, uncommit_allocation, validate_scheme)


def link(a="a", b="b", cap=100.0, alloc=0.0):
    return PhysicalLink((a, b), cap, alloc, 0.15, 16.85)


def pair(cpu=10.0):
    return PhysicalTopology((PhysicalNode("a", cpu), PhysicalNode("b", cpu)), (link(),))


def slice_(sid="s", demands=(0.4,), planes=None, k=3, gamma=0, vbw=5.0):
    planes = planes or [Plane.CONTROL] * len(demands)
    vnfs = tuple(Vnf(f"{sid}{i}", p, d, 0.1) for i, (p, d) in enumerate(zip(planes, demands)))
    vlinks = tuple(VirtualLink(vnfs[i].id, vnfs[i + 1].id, vbw) for i in range(len(vnfs) - 1))
    return SliceRequest(sid, vnfs, vlinks, 100.0, k, k, gamma, gamma)


@pytest.mark.parametrize("alloc,expected", [(0.0, 0.15), (100.0, 17.0), (50.0, 8.575)])
def test_link_delay_is_linear_in_utilization(alloc, expected):
    assert current_link_delay(link(alloc=alloc)) == pytest.approx(expected, abs=1e-12)


def test_commit_empty_scheme_is_identity():
    topo = pair()
    assert commit_allocation(topo, [], AllocationScheme({})) == topo


def test_commit_single_vnf_adds_its_demand():
    s = slice_(demands=(0.4,))
    out = commit_allocation(pair(), [s], AllocationScheme({"s0": "a"}))
    assert out.node("a").cpu_allocated_ghz == pytest.approx(0.4)
    assert out.node("b").cpu_allocated_ghz == 0.0


def test_commit_two_vlinks_on_one_link_add_up():
    vnfs = (Vnf("x", "control", 0.5), Vnf("y", "control", 0.5), Vnf("z", "control", 0.5))
    s = SliceRequest("s", vnfs, (VirtualLink("x", "y", 5.0), VirtualLink("z", "y", 7.0)), 100.0)
    scheme = AllocationScheme({"x": "a", "y": "b", "z": "a"},
                              {("x", "y"): [("a", "b")], ("z", "y"): [("a", "b")]})
    out = commit_allocation(pair(), [s], scheme)
    assert out.link("a", "b").bw_allocated_mbps == pytest.approx(12.0)
    back = uncommit_allocation(out, [s], scheme)
    assert back == pair()


def test_commit_over_capacity_raises():
    s = slice_(demands=(0.4,))
    with pytest.raises(InfeasibleCommit):
        commit_allocation(pair(cpu=0.3), [s], AllocationScheme({"s0": "a"}))


def test_validate_flags_double_assignment():
    s = slice_(demands=(0.4,))
    report = validate_scheme(pair(), [s], AllocationScheme({"s0": ["a", "b"]}))
    assert report.failing() == ["2"]
    assert report.lines()[0].startswith("eq2: FAIL")


def test_validate_flags_intra_isolation():
    s = slice_(demands=(0.4, 0.4), k=1)
    scheme = AllocationScheme({"s0": "a", "s1": "a"})
    assert validate_scheme(pair(), [s], scheme).failing() == ["10a"]
    data = slice_(demands=(0.4, 0.4), planes=[Plane.DATA, Plane.DATA], k=1)
    assert validate_scheme(pair(), [data], scheme).failing() == ["10b"]


def test_validate_flags_inter_isolation():
    s1 = slice_("p", demands=(0.4,), gamma=1)
    s2 = slice_("q", demands=(0.4,))
    shared = AllocationScheme({"p0": "a", "q0": "a"})
    assert validate_scheme(pair(), [s1, s2], shared).failing() == ["11a"]
    apart = AllocationScheme({"p0": "a", "q0": "b"})
    assert validate_scheme(pair(), [s1, s2], apart).ok


def test_validate_flags_broken_route_and_capacity():
    s = slice_(demands=(0.4, 0.4), vbw=150.0)
    no_route = AllocationScheme({"s0": "a", "s1": "b"})
    assert "6" in validate_scheme(pair(), [s], no_route).failing()
    over = AllocationScheme({"s0": "a", "s1": "b"}, {("s0", "s1"): [("a", "b")]})
    assert validate_scheme(pair(), [s], over).failing() == ["4"]


def test_validate_unknown_ids():
    s = slice_(demands=(0.4,))
    with pytest.raises(MalformedScheme):
        validate_scheme(pair(), [s], AllocationScheme({"ghost": "a"}))
    with pytest.raises((MalformedScheme, TopologyError)):
        validate_scheme(pair(), [s], AllocationScheme({"s0": "zz"}))


def test_topology_errors():
    nodes = (PhysicalNode("a", 1.0), PhysicalNode("b", 1.0), PhysicalNode("c", 1.0))
    with pytest.raises(TopologyError, match="connect|disconnected"):
        PhysicalTopology(nodes, (link(),))
    with pytest.raises(TopologyError):
        PhysicalTopology(nodes[:2], (link(), link("b", "a")))
    with pytest.raises(TopologyError):
        PhysicalNode("a", 1.0, 2.0)
    with pytest.raises(TopologyError):
        check_batch([slice_("s"), slice_("s")])


def test_scenario_round_trip_and_unknown_keys():
    s = slice_(demands=(0.4, 0.6))
    doc = scenario_to_dict(pair(), [s])
    topo, slices, _, _ = parse_scenario(json.loads(dumps(doc)))
    assert topo == pair() and slices == [s]
    doc["nodes"][0]["colour"] = "red"
    with pytest.raises(ScenarioFormatError):
        parse_scenario(doc)


def test_scheme_round_trip():
    scheme = AllocationScheme({"x": "a", "y": "b"}, {("x", "y"): [("a", "b")]})
    back = scheme_from_dict(json.loads(dumps(scheme_to_dict(scheme))))
    assert back.assignments == scheme.assignments and back.routes == scheme.routes
