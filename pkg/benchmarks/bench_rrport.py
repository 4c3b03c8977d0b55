"""Compare the compiled and pure-Python port kernels.

    python3 benchmarks/bench_rrport.py [--seconds 20]

Runs the same flooded port through both kernels, checks that the outputs
agree exactly and prints the timings. A second section times a whole
flood simulation under each backend in a subprocess.
"""
import argparse
import os
import subprocess
import sys
import time

from sliceiso.sim import kernel


def drive(cls, seconds: float, step_ms: int = 1):
    port = cls(6, 100e6, 64, 2024)
    end = int(seconds * 1e9)
    port.add_source(2, 200e6, 10_000, 0, end)
    port.add_source(4, 20e6, 10_000, 0, end)
    trace = []
    t0 = time.perf_counter()
    for k in range(1, int(seconds * 1000 / step_ms) + 1):
        port.advance(k * step_ms * 1_000_000)
        trace.append((port.fg_delay_ns(0, 1600), port.throughput_bps()))
    return time.perf_counter() - t0, trace, port.stats()


E2E = """
import time
from sliceiso.scenario import gen_scenario
from sliceiso.solvers import solve_greedy
from sliceiso.sim import AttackSpec, SimConfig, run, BACKEND
topo, slices, _, _ = gen_scenario(master_seed=0)
res = solve_greedy(topo, slices)
cfg = SimConfig(res.scheme, topo, tuple(slices), attack=AttackSpec("flood", "S4"),
                cpu_reservations=False)
t0 = time.perf_counter()
log = run(cfg)
print(BACKEND, time.perf_counter() - t0, cfg.config_hash(), sum(r[2] or 0 for r in log.auth))
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seconds", type=float, default=20.0)
    args = ap.parse_args()
    if kernel.BACKEND != "cython":
        sys.exit("compiled kernel not built; run `pip install -e . --no-build-isolation`")
    tc, trace_c, stats_c = drive(kernel.RRPort, args.seconds)
    tp, trace_p, stats_p = drive(kernel.PyRRPort, args.seconds)
    same = trace_c == trace_p and stats_c == stats_p
    print(f"port kernel, {args.seconds:g} s of 220 Mb/s offered load")
    print(f"  cython  {tc:8.3f} s")
    print(f"  python  {tp:8.3f} s")
    print(f"  speedup {tp / tc:8.1f}x   identical output: {same}")

    print("full flood run (150 s simulated, greedy placement)")
    outs = {}
    for pure in ("0", "1"):
        env = dict(os.environ, SLICEISO_PURE=pure)
        out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True,
                             text=True, check=True).stdout.split()
        outs[out[0]] = out
        print(f"  {out[0]:7s} {float(out[1]):8.3f} s")
    print(f"  identical output: {outs['cython'][2:] == outs['python'][2:]}")
    if not same:
        sys.exit(1)


if __name__ == "__main__":
    main()
