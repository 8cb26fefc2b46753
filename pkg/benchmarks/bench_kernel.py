"""Compare the compiled and pure-Python trial kernels on one desk-scale arm.

    python3 benchmarks/bench_kernel.py [--trials N] [--policy chernoff|nj1|phidelta]

Prints wall time per backend, the speedup, and whether both produced the
same records.
"""
import argparse
import hashlib
import time

from casht.engine import Arm, available_backends, prepare_arm, run_trials
from casht.experiments import benchmark_scenario
from casht.policies import PolicyConfig


def digest(records):
    return hashlib.sha256(repr(records).encode()).hexdigest()[:16]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--policy", default="chernoff", choices=("chernoff", "nj1", "phidelta"))
    ap.add_argument("--delta", type=float, default=1e-2)
    ap.add_argument("--family", default="pareto", choices=("pareto", "loglogistic"))
    args = ap.parse_args()

    s = benchmark_scenario(args.family)
    costs = s.cost_models()
    arm = Arm(PolicyConfig(args.policy, args.delta), s.observation_model(), costs, s.plan(costs))
    prepared = prepare_arm(arm)  # policy tables are shared; only the trial loop is timed
    times, hashes = {}, {}
    for backend in available_backends():
        t0 = time.perf_counter()
        recs = run_trials(arm, args.trials, seed=11, backend=backend, prepared=prepared)
        times[backend] = time.perf_counter() - t0
        hashes[backend] = digest(recs)
        print(f"{backend:>7}: {times[backend]:8.3f} s  ({args.trials} trials, records {hashes[backend]})")
    if len(times) == 2:
        print(f"speedup: {times['python'] / times['cython']:.1f}x  identical: {len(set(hashes.values())) == 1}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
