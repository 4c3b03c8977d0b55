"""The ten acceptance criteria, one test each.

Every test records a one-line verdict that is printed in the terminal
summary (and to stdout with ``-s``) before its assertion runs.
"""
import os
import re
import tempfile
import time

import pytest

from conftest import ACCEPTANCE
from sliceiso.campaign import Campaign, read_summary, run_campaign
from sliceiso.instances import random_instance
from sliceiso.model import TriviallyInfeasible, build_instance, export_lp
from sliceiso.sim import calibrate_delay_params, mean
from sliceiso.solvers import Status, brute_force_oracle, solve_exact
from sliceiso.topology import FAMILIES

N_INSTANCES = 240
SETTINGS = ("NoIsolation", "K_rel=1", "K_rel=2", "K_rel=3")


def record(k: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[k] = (ok, detail)
    print(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="module")
def suite():
    """Exact and oracle results for the seeded random instance suite."""
    t0 = time.perf_counter()
    rows = []
    for seed in range(N_INSTANCES):
        topo, slices = random_instance(seed, max_nodes=4, max_slices=3)
        rows.append((seed, topo, slices, solve_exact(topo, slices),
                     brute_force_oracle(topo, slices)))
    return rows, time.perf_counter() - t0


def test_c1_oracle_optimality(suite):
    rows, elapsed = suite
    bad = [seed for seed, _, _, a, b in rows if a.status is not b.status
           or (a.status is Status.OPTIMAL and abs(a.objective_value - b.objective_value) > 1e-6)]
    kinds = {(s.intra_isolation_control, s.intra_isolation_data, s.inter_isolation_control,
              s.inter_isolation_data) for _, _, slices, _, _ in rows for s in slices}
    covered = ({k[0] for k in kinds} == {1, 2, 3} and {k[1] for k in kinds} == {1, 2, 3}
               and {k[2] for k in kinds} == {0, 1} and {k[3] for k in kinds} == {0, 1})
    n_opt = sum(1 for r in rows if r[3].status is Status.OPTIMAL)
    ok = not bad and covered and elapsed < 60 and len(rows) >= 200
    record(1, ok, f"{len(rows)} instances ({n_opt} optimal), {len(bad)} mismatches, "
                  f"{elapsed:.1f}s")
    assert ok, bad


def test_c2_constraint_soundness(suite):
    rows, _ = suite
    failing = [(seed, r.report.failing()) for seed, _, _, r, _ in rows
               if r.status is Status.OPTIMAL and not r.report.ok]
    n = sum(1 for r in rows if r[3].status is Status.OPTIMAL)
    record(2, not failing, f"{n} optimal schemes checked on {len(FAMILIES)} families, "
                           f"{len(failing)} with violations")
    assert not failing


def test_c3_isolation_monotonicity(suite):
    rows, _ = suite
    checked, bad = 0, []
    for seed, topo, slices, _, _ in rows:
        objs = []
        for k in (1, 2, 3):
            batch = [s.with_isolation(k, k, s.inter_isolation_control, s.inter_isolation_data)
                     for s in slices]
            res = solve_exact(topo, batch)
            objs.append(res.objective_value if res.status is Status.OPTIMAL else float("inf"))
        if objs[2] == float("inf"):
            continue
        checked += 1
        if not objs[0] >= objs[1] - 1e-9 >= objs[2] - 2e-9:
            bad.append(seed)
    record(3, not bad and checked > 0, f"{checked} feasible instances, {len(bad)} violations")
    assert not bad and checked > 0


@pytest.fixture(scope="module")
def campaign_out(reference, tmp_path_factory):
    topo, slices, campaign, _ = reference
    out = tmp_path_factory.mktemp("campaign")
    t0 = time.perf_counter()
    run_campaign(topo, slices, Campaign.from_dict(campaign), out)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def summary(campaign_out):
    out, _ = campaign_out
    return {(r["setting"], r["attack"]): r for r in read_summary(out / "summary.csv")}


def _resp(summary, setting, attack):
    return summary[(setting, attack)]["window_mean_response_ms"]


def test_c4_flood_ordering(campaign_out, summary):
    _, elapsed = campaign_out
    none = {s: _resp(summary, s, "none") for s in SETTINGS}
    flood = {s: _resp(summary, s, "flood") for s in SETTINGS}
    ok = (flood["NoIsolation"] > flood["K_rel=1"] and flood["NoIsolation"] > flood["K_rel=2"]
          and abs(flood["K_rel=3"] - none["K_rel=3"]) <= 0.10 * none["K_rel=3"]
          and flood["NoIsolation"] >= 3 * none["NoIsolation"]
          and all(summary[(s, "flood")]["runs"] == 3 for s in SETTINGS) and elapsed < 300)
    detail = ", ".join(f"{s} {none[s]:.2f}->{flood[s]:.2f} ms" for s in SETTINGS)
    record(4, ok, f"{detail}; campaign {elapsed:.1f}s")
    assert ok


def test_c5_bandwidth_collapse(summary):
    no_iso = summary[("NoIsolation", "flood")]["window_mean_bw_mbps"]
    iso = summary[("K_rel=3", "flood")]["window_mean_bw_mbps"]
    ok = no_iso < 0.2 * 10.0 and iso >= 0.8 * 10.0
    record(5, ok, f"NoIsolation {no_iso:.2f} Mb/s, K_rel=3 {iso:.2f} Mb/s of 10")
    assert ok


def _run_means(path):
    with open(path) as fh:
        next(fh)
        vals = [float(line.split(",")[1]) for line in fh if line.split(",")[2].strip() == "ok"]
    return mean(vals)


def test_c6_rtt_below_response(campaign_out):
    out, _ = campaign_out
    runs = sorted(p.parent for p in out.glob("*/*/rep*/auth.csv"))
    bad = [str(r.relative_to(out)) for r in runs
           if not _run_means(r / "rtt.csv") < _run_means(r / "auth.csv")]
    record(6, bool(runs) and not bad, f"{len(runs)} runs, {len(bad)} with mean RTT >= response")
    assert runs and not bad


def test_c7_cpu_starvation_ordering(summary):
    none = {s: _resp(summary, s, "none") for s in SETTINGS}
    starve = {s: _resp(summary, s, "cpu_starve") for s in SETTINGS}
    k_levels = SETTINGS[1:]
    ok = (all(starve["NoIsolation"] > starve[s] for s in k_levels)
          and all(abs(starve[s] - none[s]) <= 0.25 * none[s] for s in k_levels))
    detail = ", ".join(f"{s} {none[s]:.2f}->{starve[s]:.2f} ms" for s in SETTINGS)
    record(7, ok, detail)
    assert ok


def test_c8_calibration_closure(config_for):
    init, delta = calibrate_delay_params(config_for("K_rel=1"))
    ok = abs(init - 0.15) <= 0.15 * 0.15 and abs(delta - 16.85) <= 0.15 * 16.85
    record(8, ok, f"T_init {init:.4f} ms (0.15), delta {delta:.3f} ms (16.85)")
    assert ok


def test_c9_campaign_determinism(reference, campaign_out, tmp_path):
    out, _ = campaign_out
    topo, slices, campaign, _ = reference
    run_campaign(topo, slices, Campaign.from_dict(campaign), tmp_path)
    files = sorted(p.relative_to(out) for p in out.rglob("*.csv"))
    differ = [str(f) for f in files if (out / f).read_bytes() != (tmp_path / f).read_bytes()]
    again = sorted(p.relative_to(tmp_path) for p in tmp_path.rglob("*.csv"))
    ok = files == again and not differ
    record(9, ok, f"{len(files)} CSV files compared, {len(differ)} differ")
    assert ok


LP_LINE = re.compile(r"^(\\.*|Minimize|Subject To|Bounds|Binaries|End|"
                     r" obj: .*| eq[0-9]+[ab]?_\S+: .*|   .*| \S+ >= 0| \S+)$")


def test_c10_lp_export(tmp_path):
    highspy = pytest.importorskip("highspy", reason="HiGHS not installed")
    n, bad = 0, []
    for seed in range(200):
        if n == 20:
            break
        topo, slices = random_instance(seed, max_nodes=3, max_slices=2)
        try:
            inst = build_instance(topo, slices)
        except TriviallyInfeasible:
            continue
        text = export_lp(inst)
        if text != export_lp(build_instance(topo, slices)):
            bad.append((seed, "not deterministic"))
        if not all(LP_LINE.match(line) for line in text.splitlines()):
            bad.append((seed, "unexpected line"))
        path = tmp_path / f"m{seed}.lp"
        path.write_text(text)
        h = highspy.Highs()
        h.silent()
        if h.readModel(str(path)) != highspy.HighsStatus.kOk:
            bad.append((seed, "rejected by reader"))
            continue
        h.setOptionValue("mip_rel_gap", 0.0)
        h.setOptionValue("mip_abs_gap", 1e-9)
        h.run()
        res = solve_exact(topo, slices)
        if h.getModelStatus() == highspy.HighsModelStatus.kOptimal:
            obj = h.getInfo().objective_function_value
            if res.status is not Status.OPTIMAL or abs(obj - res.objective_value) > 1e-6:
                bad.append((seed, f"objective {obj} vs {res.objective_value}"))
        elif res.status is not Status.INFEASIBLE:
            bad.append((seed, "feasibility disagrees"))
        n += 1
    ok = n == 20 and not bad
    record(10, ok, f"{n} exports byte-deterministic and parsed; objectives vs HiGHS, "
                   f"{len(bad)} problems")
    assert ok, bad
