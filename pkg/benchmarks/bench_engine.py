"""Benchmark the compiled event-loop kernel against the pure-Python twin.

Runs the same workloads through both lanes, checks the outputs are
bit-identical, and reports events per second and the speedup.

Usage: python benchmarks/bench_engine.py [--events 2000000]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from logifv import _engine_py
from logifv.offspring import make_explicit, make_zeta

try:
    from logifv import _engine_cy
except ImportError:
    _engine_cy = None


def workload(name: str):
    if name == "finite_variance":
        law = make_explicit([0.0, 1.0])  # always two children
        return law, 2.0, 1.0, 1.0 / 2000, np.full(4, 500, dtype=np.int64)
    if name == "stable":
        law = make_zeta(1.5)
        return law, 1.0 / law.m, 0.0, 1.0 / 2000, np.full(4, 500, dtype=np.int64)
    law = make_zeta(1.0)  # neveu
    return law, 1.0, 0.0, 1.0 / 2000, np.full(4, 3000, dtype=np.int64)


def run(engine, law, b, d, c_K, counts0, horizon: float, seed: int):
    is_zeta = law.kind == "zeta"
    alpha = law.alpha if is_zeta else 1.0
    obs = np.linspace(horizon / 50, horizon, 50)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(0, 0))
    t0 = time.perf_counter()
    out, events, t_final = engine.run_sim(
        counts0, b, d, c_K, law.head_cum, is_zeta, alpha,
        law.tail_start - 1, obs, np.random.Philox(ss), 0,
    )
    return out, events, t_final, time.perf_counter() - t0


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--events", type=int, default=2_000_000,
                    help="approximate events per workload (default 2e6)")
    ap.add_argument("--seed", type=int, default=20260819)
    args = ap.parse_args()

    if _engine_cy is None:
        print("compiled kernel not built; nothing to compare")
        return

    print(f"{'workload':>16} {'events':>10} {'python ev/s':>12} "
          f"{'compiled ev/s':>14} {'speedup':>8}")
    for name in ("finite_variance", "stable", "neveu"):
        law, b, d, c_K, counts0 = workload(name)
        # calibrate horizon: event rate near equilibrium is roughly
        # (b*m + d + c*n) * N, so pick horizon = target / (rate)
        n0 = int(counts0.sum())
        rate = (b + d + c_K * n0) * n0
        horizon = args.events / rate
        out_p, ev_p, tf_p, sec_p = run(_engine_py, law, b, d, c_K, counts0,
                                       horizon, args.seed)
        out_c, ev_c, tf_c, sec_c = run(_engine_cy, law, b, d, c_K, counts0,
                                       horizon, args.seed)
        if not (np.array_equal(out_p, out_c) and ev_p == ev_c
                and tf_p == tf_c):
            raise SystemExit(f"{name}: lanes disagree, bit-identity broken")
        print(f"{name:>16} {ev_p:>10} {ev_p / sec_p:>12.0f} "
              f"{ev_c / sec_c:>14.0f} {sec_p / sec_c:>7.1f}x")


if __name__ == "__main__":
    main()
