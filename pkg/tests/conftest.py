import pytest

from sliceiso.scenario import DEFAULT_SWEEP, gen_scenario
from sliceiso.solvers import Status
from sliceiso.campaign import solve_setting


@pytest.fixture(scope="session")
def reference():
    """Reference scenario for master seed 0: (topology, slices, campaign, meta)."""
    return gen_scenario("table2", 0)


@pytest.fixture(scope="session")
def reference_schemes(reference):
    """Label -> (batch, SolveResult) for every setting of the default sweep."""
    topology, slices, _, _ = reference
    out = {}
    for setting in DEFAULT_SWEEP:
        batch, res = solve_setting(topology, slices, setting)
        assert res.status in (Status.OPTIMAL, Status.HEURISTIC), setting.label
        out[setting.label] = (batch, res)
    return out


def make_config(reference, reference_schemes, label, attack=None, **kw):
    """Simulation config for one sweep setting, on the committed topology."""
    from sliceiso.sim import AttackSpec, SimConfig
    from sliceiso.topology import commit_allocation

    topology = reference[0]
    batch, res = reference_schemes[label]
    return SimConfig(res.scheme, commit_allocation(topology, batch, res.scheme), tuple(batch),
                     attack=attack or AttackSpec(), cpu_reservations=label != "NoIsolation", **kw)


@pytest.fixture(scope="session")
def config_for(reference, reference_schemes):
    def build(label, attack=None, **kw):
        return make_config(reference, reference_schemes, label, attack, **kw)
    return build


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
