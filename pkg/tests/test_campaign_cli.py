import json

import numpy as np
import pytest

from sliceiso.campaign import Campaign, derive_seed, read_summary, run_campaign
from sliceiso.cli import main
from sliceiso.io import ScenarioFormatError, load_scenario
from sliceiso.scenario import CPU_RANGE, _draw, gen_scenario, reference_topology
from sliceiso.sim import mean

SHORT = {"duration_s": 40.0}
FLOOD = {"kind": "flood", "target_slice": "S4", "start_s": 10.0, "stop_s": 30.0}


def short_campaign(attacks, repetitions=3, seed=0):
    return Campaign.from_dict({"master_seed": seed, "repetitions": repetitions,
                               "attacks": attacks, "sim": SHORT})


@pytest.fixture(scope="module")
def flood_run(reference, tmp_path_factory):
    topo, slices, _, _ = reference
    out = tmp_path_factory.mktemp("flood")
    run_campaign(topo, slices, short_campaign([FLOOD]), out)
    return out


def test_flood_sweep_makes_twelve_run_dirs(flood_run):
    runs = sorted(p.parent for p in flood_run.glob("*/flood/rep*/auth.csv"))
    assert len(runs) == 12
    assert {p.parent.parent.name for p in runs} == {"NoIsolation", "K_rel_1", "K_rel_2", "K_rel_3"}
    assert (flood_run / "K_rel_1" / "validation.txt").read_text().count("PASS") == 10


def test_summary_is_recomputable_from_run_csvs(flood_run):
    rows = read_summary(flood_run / "summary.csv")
    assert [r["setting"] for r in rows] == ["NoIsolation", "K_rel=1", "K_rel=2", "K_rel=3"]
    row = rows[0]
    values = []
    for rep in range(3):
        with open(flood_run / "NoIsolation" / "flood" / f"rep{rep}" / "auth.csv") as fh:
            next(fh)
            for line in fh:
                i, resp, outcome = line.strip().split(",")
                if outcome == "ok" and 10 <= int(i) < 30:
                    values.append(float(resp))
    assert row["window_mean_response_ms"] == pytest.approx(mean(values), rel=1e-9)


def test_empty_attack_list_gives_baseline_only(reference, tmp_path):
    topo, slices, _, _ = reference
    run_campaign(topo, slices, short_campaign([], repetitions=1), tmp_path)
    rows = read_summary(tmp_path / "summary.csv")
    assert {r["attack"] for r in rows} == {"none"}
    assert len(list(tmp_path.glob("*/none/rep0/auth.csv"))) == 4


def test_campaign_rerun_is_byte_identical(reference, tmp_path):
    topo, slices, _, _ = reference
    c = short_campaign([FLOOD], repetitions=1, seed=5)
    run_campaign(topo, slices, c, tmp_path / "a")
    run_campaign(topo, slices, c, tmp_path / "b")
    for f in sorted((tmp_path / "a").rglob("*.csv")):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_campaign_rejects_unknown_keys():
    with pytest.raises(ScenarioFormatError):
        Campaign.from_dict({"repetitons": 2})
    with pytest.raises(ScenarioFormatError):
        Campaign.from_dict({"sim": {"duration": 10}})
    with pytest.raises(ScenarioFormatError):
        Campaign.from_dict({"repetitions": 0})


def test_derived_seeds_differ_per_repetition():
    seeds = {derive_seed(0, s, r) for s in range(4) for r in range(3)}
    assert len(seeds) == 12 and all(0 <= x < 2**63 for x in seeds)


def test_reference_scenario_shape(reference):
    topo, slices, campaign, meta = reference
    assert len(slices) == 12 and sum(len(s.vnfs) for s in slices) == 36
    assert len(topo.nodes) == 3 and len(topo.links) == 3
    assert slices[0].allocated_bw_mbps == 10.0
    assert meta["master_seed"] == 0


def test_sampler_respects_cpu_range():
    topo = reference_topology()
    demands = []
    for k in range(280):
        slices = _draw(np.random.default_rng([99, k]), topo)
        demands.extend(v.cpu_demand_ghz for s in slices for v in s.vnfs)
    assert len(demands) >= 10_000
    assert CPU_RANGE[0] <= min(demands) and max(demands) <= CPU_RANGE[1]


def test_gen_is_deterministic(tmp_path, capsys):
    assert main(["gen", "--seed", "1"]) == 0
    first = capsys.readouterr().out
    assert main(["--seed", "1", "gen"]) == 0
    assert capsys.readouterr().out == first
    assert json.loads(first)["meta"]["master_seed"] == 1


@pytest.fixture(scope="module")
def scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "scenario.json"
    assert main(["gen", "--out-dir", str(path.parent)]) == 0
    return path


def test_cli_exit_codes(scenario_file, tmp_path):
    d = str(tmp_path)
    assert main(["solve", str(scenario_file), "--solver", "greedy", "--out-dir", d]) == 0
    scheme = str(tmp_path / "scheme.json")
    assert main(["validate", str(scenario_file), scheme]) == 0
    assert main(["validate", str(scenario_file), scheme, "--k-rel", "1"]) == 2
    assert main(["solve", str(scenario_file), "--k-rel", "1", "--max-seconds", "0"]) == 3
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": 3}')
    assert main(["solve", str(bad)]) == 4
    assert main(["solve", str(tmp_path / "missing.json")]) == 4


def test_cli_export_and_simulate(scenario_file, tmp_path):
    assert main(["export-lp", str(scenario_file), "--k-rel", "2", "--out-dir", str(tmp_path)]) == 0
    text = (tmp_path / "model.lp").read_text()
    assert text.startswith("\\") and "Binaries" in text
    out = tmp_path / "sim"
    assert main(["simulate", str(scenario_file), "--k-rel", "3", "--attack", "flood",
                 "--start", "10", "--stop", "20", "--duration", "25", "--out-dir", str(out)]) == 0
    assert (out / "auth.csv").read_text().startswith("request,response_ms,outcome")
    assert "K_rel=3" in (out / "run.meta").read_text()


def test_load_scenario_round_trip(scenario_file, reference):
    topo, slices, campaign, meta = load_scenario(scenario_file)
    assert topo == reference[0] and slices == list(reference[1])
    assert Campaign.from_dict(campaign).repetitions == 3
