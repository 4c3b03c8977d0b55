"""Simulation configuration, attack description and metric logs."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from ..io import scheme_to_dict, slice_to_dict, topology_to_dict
from ..topology import AllocationScheme, PhysicalTopology, SliceRequest

ATTACK_KINDS = ("none", "flood", "cpu_starve")


class SimulationDivergence(RuntimeError):
    """The event queue outgrew its cap, which means the run is overloaded."""


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    target_slice: str = ""
    start_s: float = 30.0
    stop_s: float = 130.0
    flood_rate_mbps: float = 200.0
    cpu_load_fraction: float = 1.0

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if self.kind != "none":
            if not self.target_slice:
                raise ValueError("attack needs a target slice")
            if not self.start_s < self.stop_s:
                raise ValueError("attack must start before it stops")
        if not 0.0 <= self.cpu_load_fraction <= 1.0:
            raise ValueError("cpu_load_fraction must lie in [0, 1]")
        if self.flood_rate_mbps < 0:
            raise ValueError("flood rate must be non-negative")

    def active(self, t_s: float) -> bool:
        return self.kind != "none" and self.start_s <= t_s < self.stop_s

    @classmethod
    def from_dict(cls, d: dict) -> "AttackSpec":
        return cls(**d)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "target_slice": self.target_slice, "start_s": self.start_s,
                "stop_s": self.stop_s, "flood_rate_mbps": self.flood_rate_mbps,
                "cpu_load_fraction": self.cpu_load_fraction}


@dataclass(frozen=True)
class SimConfig:
    scheme: AllocationScheme
    topology: PhysicalTopology
    slices: tuple[SliceRequest, ...]
    observed_slice: str = "S1"
    duration_s: float = 150.0
    seed: int = 0
    auth_request_rate_hz: float = 1.0
    ping_rate_hz: float = 1.0
    ping_offset_s: float = 0.5
    bw_probe_interval_s: float = 1.0
    hss_records: int = 1000
    hss_unit_ms: float = 0.05
    packet_size_bytes: int = 1250  # flood and background packets
    message_bytes: int = 200
    ping_bytes: int = 64
    attack: AttackSpec = AttackSpec()
    # dedicated access link from external endpoints to each host
    access_bw_mbps: float = 100.0
    access_initial_delay_ms: float = 0.15
    access_max_delay_increase_ms: float = 16.85
    buffer_pkts: int = 64
    auth_timeout_s: float = 1.0
    cpu_eps: float = 0.05
    # containers capped at their CPU reservation (isolation-aware schemes)
    cpu_reservations: bool = True
    service_jitter: float = 0.05
    warmup_s: float = 5.0
    event_cap: int = 1_000_000
    # constant-rate background load: (port name, rate Mb/s)
    background: tuple[tuple[str, float], ...] = ()
    labels: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration_s must be positive")
        for name in ("auth_request_rate_hz", "ping_rate_hz", "bw_probe_interval_s",
                     "access_bw_mbps"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.attack.kind != "none" and self.attack.stop_s > self.duration_s:
            raise ValueError("attack must stop within the run")
        if self.hss_records < 1:
            raise ValueError("hss_records must be at least 1")
        object.__setattr__(self, "slices", tuple(self.slices))

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for k in self.__dataclass_fields__:
            v = getattr(self, k)
            if k == "scheme":
                v = scheme_to_dict(v)
            elif k == "topology":
                v = topology_to_dict(v)
            elif k == "slices":
                v = [slice_to_dict(s) for s in v]
            elif k == "attack":
                v = v.to_dict()
            elif isinstance(v, tuple):
                v = [list(x) if isinstance(x, tuple) else x for x in v]
            out[k] = v
        return out

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def cpu_contention(load_fraction: float, eps: float = 0.05) -> float:
    """Service-time multiplier for a VNF sharing its host with an attacker."""
    return 1.0 / max(eps, 1.0 - load_fraction)


def _g(x: float | None) -> str:
    return "" if x is None else format(x, ".6g")


@dataclass
class MetricsLog:
    # (request #, issue time s, response ms or None, outcome)
    auth: list[tuple[int, float, float | None, str]] = field(default_factory=list)
    rtt: list[tuple[int, float, float | None, str]] = field(default_factory=list)
    bw: list[tuple[float, float]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    ports: dict = field(default_factory=dict)
    messages_sent: int = 0
    messages_delivered: int = 0

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "auth.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["request", "response_ms", "outcome"])
            w.writerows((i, _g(r), o) for i, _, r, o in self.auth)
        with open(out / "rtt.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["ping", "rtt_ms", "outcome"])
            w.writerows((i, _g(r), o) for i, _, r, o in self.rtt)
        with open(out / "bw.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s", "avg_bw_mbps"])
            w.writerows((_g(t), _g(b)) for t, b in self.bw)
        with open(out / "run.meta", "w") as fh:
            for k, v in self.meta.items():
                fh.write(f"{k}={v}\n")


def window_values(series: Sequence[tuple], start_s: float, stop_s: float,
                  warmup_s: float = 0.0) -> list[float]:
    """Successful sample values issued in ``[start_s, stop_s)`` and after warm-up."""
    lo = max(start_s, warmup_s)
    return [row[2] for row in series if lo <= row[1] < stop_s and row[3] == "ok"]


def mean(values: Sequence[float]) -> float:
    return math.fsum(values) / len(values) if values else float("nan")


def read_series(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
