#!/usr/bin/env python3
"""
Measures wall time of the core operations on the reference channel:
model assembly, CIR, equilibrium solve and the particle simulation.
Run from the repo root:
    python3 benchmarks/bench_propagation.py
"""

import sys
import time
from pathlib import Path
from statistics import mean, median, stdev

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO))

from mfmc.channel_config import REFERENCE_CHANNEL
from mfmc.cli import build_model
from mfmc.particle_oracle import PbsConfig, run_pbs
from mfmc.state_space import cir, equilibrium_gain

CIR_STEPS = 50_000
PBS_PARTICLES = 20_000
PBS_STEPS = 1_000


def timed(fn, n: int) -> dict:
    times = []
    for _ in range(n):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return {
        "n": n,
        "mean_ms": mean(times) * 1000,
        "median_ms": median(times) * 1000,
        "stdev_ms": (stdev(times) if n > 1 else 0.0) * 1000,
        "p95_ms": sorted(times)[int(n * 0.95)] * 1000 if n > 1 else times[0] * 1000,
        "max_ms": max(times) * 1000,
    }


def report(label: str, stats: dict) -> None:
    print(f"\n{label} ({stats['n']} runs)")
    print(f"  mean={stats['mean_ms']:.1f}ms  median={stats['median_ms']:.1f}ms  "
          f"stdev={stats['stdev_ms']:.1f}ms  p95={stats['p95_ms']:.1f}ms  max={stats['max_ms']:.1f}ms")


def main():
    model = build_model(REFERENCE_CHANNEL)
    near = build_model(REFERENCE_CHANNEL.with_value("r", 20).with_value("v", 6e-5))

    print("Warming up...")
    cir(model, 100)
    equilibrium_gain(model)

    report("assembly, N = 301", timed(lambda: build_model(REFERENCE_CHANNEL), 50))
    report(f"CIR, K = {CIR_STEPS}", timed(lambda: cir(model, CIR_STEPS), 5))
    report("equilibrium gain (splu)", timed(lambda: equilibrium_gain(model), 50))

    for partitions in (1, 4):
        cfg = PbsConfig.pulse(near, PBS_PARTICLES, PBS_STEPS, seed=1, partitions=partitions)
        stats = timed(lambda: run_pbs(cfg), 3)
        report(f"PBS, M = {PBS_PARTICLES}, K = {PBS_STEPS}, P = {partitions}", stats)
        steps_per_s = PBS_PARTICLES * PBS_STEPS / (stats["mean_ms"] / 1000)
        print(f"  ~{steps_per_s / 1e6:.1f}M particle-steps/s")


if __name__ == "__main__":
    main()
