"""Sweep isolation settings, simulate attacks and aggregate the metrics."""
from __future__ import annotations

import csv
import hashlib
import logging
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .io import ScenarioFormatError, dumps, scheme_to_dict
from .scenario import DEFAULT_SWEEP, Setting
from .sim.config import AttackSpec, SimConfig, mean
from .sim.engine import run
from .solvers import Budget, Status, solve_exact, solve_greedy
from .topology import PhysicalTopology, SliceRequest, commit_allocation

log = logging.getLogger(__name__)

SUMMARY_FIELDS = ["setting", "solver", "attack", "status", "runs", "mean_response_ms",
                  "p95_response_ms", "mean_rtt_ms", "mean_bw_mbps", "timeouts",
                  "window_mean_response_ms", "window_mean_rtt_ms", "window_mean_bw_mbps"]
LONG_FIELDS = ["setting", "attack", "rep", "metric", "index", "t_s", "value"]
SIM_KEYS = set(SimConfig.__dataclass_fields__) - {"scheme", "topology", "slices", "seed",
                                                  "attack", "labels", "background",
                                                  "cpu_reservations"}


def derive_seed(master_seed: int, setting_index: int, repetition: int) -> int:
    digest = hashlib.sha256(f"{master_seed}:{setting_index}:{repetition}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def dir_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_") or "setting"


@dataclass(frozen=True)
class Campaign:
    master_seed: int = 0
    repetitions: int = 3
    observed_slice: str = "S1"
    sweep: tuple[Setting, ...] = DEFAULT_SWEEP
    attacks: tuple[AttackSpec, ...] = ()
    sim: tuple[tuple[str, object], ...] = ()
    max_seconds: float | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "Campaign":
        known = {"master_seed", "repetitions", "observed_slice", "sweep", "attacks", "sim",
                 "max_seconds"}
        unknown = set(d) - known
        if unknown:
            raise ScenarioFormatError(f"campaign: unknown keys {sorted(unknown)}")
        try:
            sweep = tuple(Setting(**s) for s in d.get("sweep", [x.to_dict() for x in DEFAULT_SWEEP]))
            attacks = tuple(AttackSpec.from_dict(a) for a in d.get("attacks", []))
        except (TypeError, ValueError) as exc:
            raise ScenarioFormatError(f"campaign: {exc}") from exc
        sim = d.get("sim", {})
        bad = set(sim) - SIM_KEYS
        if bad:
            raise ScenarioFormatError(f"campaign.sim: unknown keys {sorted(bad)}")
        c = cls(int(d.get("master_seed", 0)), int(d.get("repetitions", 3)),
                d.get("observed_slice", "S1"), sweep, attacks, tuple(sorted(sim.items())),
                d.get("max_seconds"))
        if c.repetitions < 1:
            raise ScenarioFormatError("campaign: repetitions must be at least 1")
        if not c.sweep:
            raise ScenarioFormatError("campaign: sweep must not be empty")
        for s in c.sweep:
            if s.solver not in ("exact", "greedy"):
                raise ScenarioFormatError(f"campaign: unknown solver {s.solver!r}")
        return c

    def window(self) -> tuple[float, float]:
        """Attack window used for in-attack statistics (and the matching baseline)."""
        for a in self.attacks:
            if a.kind != "none":
                return a.start_s, a.stop_s
        return 30.0, 130.0


def solve_setting(topology: PhysicalTopology, slices: Sequence[SliceRequest], setting: Setting,
                  max_seconds: float | None = None):
    batch = setting.apply(slices)
    if setting.solver == "greedy":
        return batch, solve_greedy(topology, batch)
    return batch, solve_exact(topology, batch, Budget(max_seconds=max_seconds))


def _run_one(job) -> None:
    cfg, out_dir = job
    run(cfg).write(out_dir)


def _k_label(setting: Setting) -> str:
    if setting.solver == "greedy":
        return "none"
    return f"{setting.k_control}/{setting.k_data}"


def run_campaign(topology: PhysicalTopology, slices: Sequence[SliceRequest], campaign: Campaign,
                 out_dir: str | Path, workers: int = 1) -> Path:
    """Solve every sweep setting, simulate each attack and repetition, aggregate.

    Settings that come back infeasible or timed out are recorded in the
    summary and skipped; the remaining settings still run.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    attacks = campaign.attacks or (AttackSpec(),)
    jobs = []
    statuses = {}
    for si, setting in enumerate(campaign.sweep):
        sdir = out / dir_name(setting.label)
        sdir.mkdir(parents=True, exist_ok=True)
        batch, res = solve_setting(topology, slices, setting, campaign.max_seconds)
        statuses[setting.label] = res.status.value
        log.info("%s: %s (%d nodes, %.3fs)", setting.label, res.status.value,
                 res.nodes_explored, res.wall_time)
        if res.status not in (Status.OPTIMAL, Status.HEURISTIC):
            (sdir / "status.txt").write_text(f"{res.status.value}\n{res.message}\n")
            continue
        (sdir / "scheme.json").write_text(dumps(scheme_to_dict(res.scheme)))
        (sdir / "validation.txt").write_text("\n".join(res.report.lines()) + "\n")
        committed = commit_allocation(topology, batch, res.scheme)
        for attack in attacks:
            for rep in range(campaign.repetitions):
                cfg = SimConfig(res.scheme, committed, tuple(batch),
                                observed_slice=campaign.observed_slice,
                                seed=derive_seed(campaign.master_seed, si, rep), attack=attack,
                                cpu_reservations=setting.solver != "greedy",
                                labels=(("setting", setting.label), ("solver", setting.solver),
                                        ("K_rel", _k_label(setting))),
                                **dict(campaign.sim))
                jobs.append((cfg, sdir / attack.kind / f"rep{rep}"))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            list(pool.map(_run_one, jobs))
    else:
        for job in jobs:
            _run_one(job)
    aggregate(out, campaign, statuses)
    return out


# -- aggregation ---------------------------------------------------------------


def _read(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def load_run(run_dir: Path, sim: dict) -> dict:
    """Per-run samples as (index, issue time s, value or None) lists."""
    rate = float(sim.get("auth_request_rate_hz", 1.0))
    ping_rate = float(sim.get("ping_rate_hz", 1.0))
    offset = float(sim.get("ping_offset_s", 0.5))
    auth = [(int(r["request"]), int(r["request"]) / rate,
             float(r["response_ms"]) if r["outcome"] == "ok" else None)
            for r in _read(run_dir / "auth.csv")]
    rtt = [(int(r["ping"]), offset + int(r["ping"]) / ping_rate,
            float(r["rtt_ms"]) if r["outcome"] == "ok" else None)
           for r in _read(run_dir / "rtt.csv")]
    bw = [(i, float(r["t_s"]), float(r["avg_bw_mbps"])) for i, r in enumerate(_read(run_dir / "bw.csv"))]
    return {"response": auth, "rtt": rtt, "bw": bw}


def _vals(rows, lo, hi):
    return [v for _, t, v in rows if lo <= t < hi and v is not None]


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if x != x else format(x, ".17g")
    return str(x)


def aggregate(out: Path, campaign: Campaign, statuses: dict | None = None) -> Path:
    """Write ``summary.csv`` and ``long.csv`` from the per-run CSV files."""
    sim = dict(campaign.sim)
    warm = float(sim.get("warmup_s", 5.0))
    horizon = float("inf")
    w_lo, w_hi = campaign.window()
    attacks = campaign.attacks or (AttackSpec(),)
    statuses = statuses or {}
    summary, long_rows = [], []
    for setting in campaign.sweep:
        sdir = out / dir_name(setting.label)
        for attack in attacks:
            runs = []
            for rep in range(campaign.repetitions):
                rdir = sdir / attack.kind / f"rep{rep}"
                if (rdir / "auth.csv").exists():
                    runs.append((rep, load_run(rdir, sim)))
            row = {"setting": setting.label, "solver": setting.solver, "attack": attack.kind,
                   "status": statuses.get(setting.label, "ok" if runs else "missing"),
                   "runs": len(runs)}
            resp = [v for _, r in runs for v in _vals(r["response"], warm, horizon)]
            rtt = [v for _, r in runs for v in _vals(r["rtt"], warm, horizon)]
            bw = [v for _, r in runs for v in _vals(r["bw"], warm, horizon)]
            row["mean_response_ms"] = mean(resp)
            row["p95_response_ms"] = float(np.percentile(resp, 95)) if resp else float("nan")
            row["mean_rtt_ms"] = mean(rtt)
            row["mean_bw_mbps"] = mean(bw)
            row["timeouts"] = sum(1 for _, r in runs for _, _, v in r["response"] if v is None)
            lo = max(w_lo, warm)
            row["window_mean_response_ms"] = mean([v for _, r in runs for v in _vals(r["response"], lo, w_hi)])
            row["window_mean_rtt_ms"] = mean([v for _, r in runs for v in _vals(r["rtt"], lo, w_hi)])
            row["window_mean_bw_mbps"] = mean([v for _, r in runs for v in _vals(r["bw"], lo, w_hi)])
            summary.append(row)
            for rep, r in runs:
                for metric in ("response", "rtt", "bw"):
                    for idx, t, v in r[metric]:
                        long_rows.append([setting.label, attack.kind, rep, metric, idx,
                                          format(t, ".6g"), "" if v is None else format(v, ".6g")])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_FIELDS)
        for row in summary:
            w.writerow([_fmt(row[k]) for k in SUMMARY_FIELDS])
    with open(out / "long.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_FIELDS)
        w.writerows(long_rows)
    return out / "summary.csv"


def read_summary(path: str | Path) -> list[dict]:
    rows = _read(Path(path))
    for r in rows:
        for k in SUMMARY_FIELDS[5:]:
            r[k] = float(r[k]) if r[k] != "" else float("nan")
        r["runs"] = int(r["runs"])
        r["timeouts"] = int(r["timeouts"])
    return rows
