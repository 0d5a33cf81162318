"""Compare the compiled and pure-Python simulator loops.

Usage: python benchmarks/bench_simulator.py [--horizon 2e5] [--reps 2] [--repeat 3]
"""
import argparse
import time

import numpy as np

from polling_lab import Exponential, Pareto, PollingModel
from polling_lab.perturbation import ExpModel
from polling_lab.simulator import SimConfig, available_backends, simulate, simulate_queue_lengths


def best_of(fn, repeat):
    times, result = [], None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--horizon", type=float, default=2e5)
    parser.add_argument("--reps", type=int, default=2)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)

    backends = available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the python backend is available")
    cfg = SimConfig(horizon=args.horizon, warmup=0.0, seed=1, replications=args.reps, tail_levels=(1.0, 10.0))
    cases = {
        "workload/exp": lambda b: simulate(
            PollingModel.from_params(0.1, Exponential(1.0), 1.0, 0.1, Exponential(1.0), 1.0), cfg, backend=b
        ).per_replication,
        "workload/pareto": lambda b: simulate(
            PollingModel.from_params(0.1, Pareto(1.5, 1.0), 1.0, 0.1, Exponential(1.0), 1.0), cfg, backend=b
        ).per_replication,
        "queue-lengths": lambda b: {
            "table": simulate_queue_lengths(ExpModel(0.05, 0.05, 0.2, 0.2, 0.3, 0.3), 1.0, cfg, backend=b).table
        },
    }
    print(f"horizon {args.horizon:g}, {args.reps} replications, best of {args.repeat}")
    print(f"{'case':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}{'identical':>11}")
    for name, fn in cases.items():
        timings, results = {}, {}
        for b in backends:
            timings[b], results[b] = best_of(lambda: fn(b), args.repeat)
        line = f"{name:<18}" + "".join(f"{timings[b]:>11.3f}s" for b in backends)
        if len(backends) == 2:
            same = all(np.array_equal(results["compiled"][k], results["python"][k]) for k in results["python"])
            line += f"{timings['python'] / timings['compiled']:>9.1f}x{str(same):>11}"
        print(line)


if __name__ == "__main__":
    main()
