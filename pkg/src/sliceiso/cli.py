"""Command line entry point.

Exit codes: 0 success, 2 infeasible, 3 timeout, 4 invalid input.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .campaign import Campaign, run_campaign
from .io import (ScenarioFormatError, dumps, load_scenario, scenario_to_dict, scheme_from_dict,
                 scheme_to_dict)
from .model import TriviallyInfeasible, build_instance, export_lp
from .scenario import Setting, gen_scenario
from .sim.config import AttackSpec, SimConfig
from .sim.engine import run
from .solvers import Budget, Status, solve_exact, solve_greedy
from .topology import MalformedScheme, TopologyError, validate_scheme

EXIT_OK, EXIT_INFEASIBLE, EXIT_TIMEOUT, EXIT_INVALID = 0, 2, 3, 4
log = logging.getLogger("sliceiso")


class InvalidInput(Exception):
    pass


def _load(path):
    try:
        return load_scenario(path)
    except OSError as exc:
        raise InvalidInput(str(exc)) from exc


def _setting(args) -> Setting:
    if args.solver == "greedy":
        return Setting("NoIsolation", "greedy")
    k = args.k_rel
    return Setting(f"K_rel={k}" if k else "as-specified", "exact", k or 0, k or 0,
                   args.gamma, args.gamma)


def _batch(slices, setting: Setting):
    if setting.solver == "exact" and setting.k_control == 0:
        return list(slices)  # keep the per-slice isolation from the scenario file
    return setting.apply(slices)


def _solve(args, topology, slices):
    setting = _setting(args)
    batch = _batch(slices, setting)
    if setting.solver == "greedy":
        return batch, solve_greedy(topology, batch)
    return batch, solve_exact(topology, batch, Budget(max_seconds=args.max_seconds))


def _status_code(status: Status) -> int:
    return {Status.INFEASIBLE: EXIT_INFEASIBLE, Status.TIMEOUT: EXIT_TIMEOUT}.get(status, EXIT_OK)


def _emit(text: str, out_dir: str | None, name: str) -> None:
    if out_dir:
        path = Path(out_dir)
        path.mkdir(parents=True, exist_ok=True)
        (path / name).write_text(text)
        log.info("wrote %s", path / name)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    topology, slices, campaign, meta = gen_scenario(args.template, args.seed)
    _emit(dumps(scenario_to_dict(topology, slices, campaign, meta)), args.out_dir, "scenario.json")
    return EXIT_OK


def cmd_solve(args) -> int:
    topology, slices, _, _ = _load(args.scenario)
    _, res = _solve(args, topology, slices)
    log.info("%s after %d nodes in %.3fs", res.status.value, res.nodes_explored, res.wall_time)
    if res.scheme is not None:
        _emit(dumps(scheme_to_dict(res.scheme)), args.out_dir, "scheme.json")
    if res.report is not None and not res.report.ok:
        for line in res.report.lines():
            log.warning("%s", line)
    return _status_code(res.status)


def cmd_export_lp(args) -> int:
    topology, slices, _, _ = _load(args.scenario)
    batch = _batch(slices, _setting(args))
    try:
        text = export_lp(build_instance(topology, batch))
    except TriviallyInfeasible as exc:
        log.error("%s", exc)
        return EXIT_INFEASIBLE
    _emit(text, args.out_dir, "model.lp")
    return EXIT_OK


def _read_scheme(path):
    try:
        with open(path) as fh:
            return scheme_from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InvalidInput(f"{path}: {exc}") from exc


def cmd_validate(args) -> int:
    topology, slices, _, _ = _load(args.scenario)
    batch = _batch(slices, _setting(args))
    report = validate_scheme(topology, batch, _read_scheme(args.scheme))
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_INFEASIBLE


def cmd_simulate(args) -> int:
    topology, slices, _, _ = _load(args.scenario)
    setting = _setting(args)
    batch = _batch(slices, setting)
    if args.scheme:
        scheme = _read_scheme(args.scheme)
    else:
        _, res = _solve(args, topology, slices)
        if res.scheme is None:
            log.error("no placement: %s", res.status.value)
            return _status_code(res.status)
        scheme = res.scheme
    try:
        attack = AttackSpec(args.attack, args.target or "", args.start, args.stop,
                            args.flood_rate, args.cpu_load)
        cfg = SimConfig(scheme, topology, tuple(batch), observed_slice=args.observe,
                        duration_s=args.duration, seed=args.seed, attack=attack,
                        cpu_reservations=setting.solver != "greedy",
                        labels=(("setting", setting.label), ("solver", setting.solver),
                                ("K_rel", str(args.k_rel or ""))))
    except ValueError as exc:
        raise InvalidInput(str(exc)) from exc
    out = args.out_dir or "."
    run(cfg).write(out)
    log.info("wrote metrics to %s", out)
    return EXIT_OK


def cmd_campaign(args) -> int:
    topology, slices, campaign, _ = _load(args.scenario)
    campaign = dict(campaign)
    if args.seed_given:
        campaign["master_seed"] = args.seed
    if args.max_seconds is not None:
        campaign["max_seconds"] = args.max_seconds
    if args.repetitions is not None:
        campaign["repetitions"] = args.repetitions
    c = Campaign.from_dict(campaign)
    out = run_campaign(topology, slices, c, args.out_dir or "campaign-out", workers=args.workers)
    log.info("summary at %s", out / "summary.csv")
    return EXIT_OK


class _SeedAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        namespace.seed = values
        namespace.seed_given = True


GLOBAL_DEFAULTS = {"seed": 0, "seed_given": False, "out_dir": None, "max_seconds": None,
                   "verbose": False}


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; defaults are
    # filled in after parsing so neither position overwrites the other
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, action=_SeedAction,
                        help="master seed (default 0)")
    common.add_argument("--out-dir", default=argparse.SUPPRESS,
                        help="output directory (default: stdout or .)")
    common.add_argument("--max-seconds", type=float, default=argparse.SUPPRESS,
                        help="wall-clock budget for the exact solver")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    placement = argparse.ArgumentParser(add_help=False)
    placement.add_argument("--solver", choices=("exact", "greedy"), default="exact")
    placement.add_argument("--k-rel", type=int, default=None,
                           help="override intra-slice isolation of every slice")
    placement.add_argument("--gamma", type=int, choices=(0, 1), default=0,
                           help="inter-slice isolation when --k-rel is given")

    p = argparse.ArgumentParser(prog="sliceiso", parents=[common],
                                description="Isolation-aware slice placement and attack simulation")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="emit the reference scenario")
    g.add_argument("--template", choices=("table2",), default="table2")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", parents=[common, placement], help="place a scenario's slices")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("export-lp", parents=[common, placement], help="write the MILP in LP format")
    e.add_argument("scenario")
    e.set_defaults(func=cmd_export_lp)

    v = sub.add_parser("validate", parents=[common, placement],
                       help="check a scheme against every constraint family")
    v.add_argument("scenario")
    v.add_argument("scheme")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("simulate", parents=[common, placement], help="simulate one run")
    m.add_argument("scenario")
    m.add_argument("--scheme", default=None, help="scheme JSON (default: solve first)")
    m.add_argument("--attack", choices=("none", "flood", "cpu_starve"), default="none")
    m.add_argument("--target", default="S4")
    m.add_argument("--observe", default="S1")
    m.add_argument("--start", type=float, default=30.0)
    m.add_argument("--stop", type=float, default=130.0)
    m.add_argument("--flood-rate", type=float, default=200.0)
    m.add_argument("--cpu-load", type=float, default=1.0)
    m.add_argument("--duration", type=float, default=150.0)
    m.set_defaults(func=cmd_simulate)

    c = sub.add_parser("campaign", parents=[common], help="run the scenario's campaign")
    c.add_argument("scenario")
    c.add_argument("--repetitions", type=int, default=None)
    c.add_argument("--workers", type=int, default=1)
    c.set_defaults(func=cmd_campaign)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, key):
            setattr(args, key, value)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (InvalidInput, ScenarioFormatError, TopologyError, MalformedScheme) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
