"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each row runs the same workload under both backends and reports the best
wall time over ``--repeat`` runs plus the speedup.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from linpro_tal import kernels
from linpro_tal.core import ActionInstance, Tcam
from linpro_tal.fusion import FusionConfig, gaussian_weighted_fusion
from linpro_tal.linpro import build_constraints, solve_l1_lp
from linpro_tal.proposals import ProposalConfig, build_candidate_pool
from linpro_tal.synthtrain import SynthConfig, TrainSchedule, generate_dataset, train


def lp_workload(rng):
    systems = []
    for _ in range(300):
        l, n = int(rng.integers(40, 120)), int(rng.integers(2, 8))
        insts = []
        for _ in range(n):
            s = int(rng.integers(0, l - 5))
            insts.append(ActionInstance.make(0, float(rng.uniform(0.1, 1)), s, min(l - 1, s + int(rng.integers(2, 20)))))
        systems.append(build_constraints(insts, l))
    return lambda: [solve_l1_lp(cs) for cs in systems]


def fusion_workload(rng):
    pools = []
    for _ in range(50):
        n = 300
        s = rng.integers(0, 500, n)
        pools.append([ActionInstance.make(int(c), float(q), int(a), int(a + w))
                      for c, q, a, w in zip(rng.integers(0, 3, n), rng.uniform(0, 1, n), s, rng.integers(1, 30, n))])
    cfg = FusionConfig()
    return lambda: [gaussian_weighted_fusion(p, cfg) for p in pools]


def proposal_workload(rng):
    tcams = [Tcam(np.cumsum(rng.normal(size=(400, 4)), axis=0)) for _ in range(40)]
    cfg = ProposalConfig()
    return lambda: [build_candidate_pool(t, np.ones(4), cfg) for t in tcams]


def training_workload(rng):
    data = generate_dataset(SynthConfig(num_videos=16))
    sched = TrainSchedule(total_epochs=20, pseudo_start_epoch=8, renewal_epochs=(12, 16))
    return lambda: train(data, sched)


WORKLOADS = {
    "simplex (300 LPs)": lp_workload,
    "fusion grouping (50 pools x 300)": fusion_workload,
    "proposals + contrast (40 TCAMs)": proposal_workload,
    "self-training (16 videos, 20 epochs)": training_workload,
}


def best_time(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if not kernels.HAVE_EXTENSION:
        raise SystemExit("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
    print(f"{'workload':40s} {'python':>10s} {'cython':>10s} {'speedup':>8s}")
    for name, make in WORKLOADS.items():
        fn = make(np.random.default_rng(0))
        timings = {}
        for backend in ("python", "cython"):
            kernels.set_backend(backend)
            timings[backend] = best_time(fn, args.repeat)
        kernels.set_backend("cython")
        print(f"{name:40s} {timings['python']:9.3f}s {timings['cython']:9.3f}s "
              f"{timings['python'] / timings['cython']:7.1f}x")


if __name__ == "__main__":
    main()
