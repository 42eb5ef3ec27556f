"""Benchmark: numba kernel vs pure-numpy fallback.

Times the posterior quadrature on synthetic observation batches and a full
replicate batch. Run once per backend:

    python benchmarks/bench_backends.py
    TITEPROG_BACKEND=numpy python benchmarks/bench_backends.py
"""

import math
import time

import numpy as np

from titeprog.core import Observation, build_skeleton, posterior_beta_mean
from titeprog.engine import Strategy
from titeprog.presets import reference_design
from titeprog.quadrature import backend_name, warmup
from titeprog.scenarios import find_scenario
from titeprog.simulate import replicate_seed, run_replicate

SD = math.sqrt(1.34)


def synthetic_observations(rng, n):
    obs = []
    for _ in range(n):
        dose = int(rng.integers(1, 6))
        tox = bool(rng.random() < 0.25)
        w = 1.0 if tox else float(rng.uniform(0.1, 1.0))
        obs.append(Observation(dose, tox, w))
    return obs


def bench_posterior(calls=2000):
    sk = build_skeleton(0.25, 0.10, 3, 5)
    rng = np.random.default_rng(0)
    batches = [synthetic_observations(rng, n) for n in rng.integers(5, 30, calls)]
    t0 = time.perf_counter()
    acc = 0.0
    for obs in batches:
        acc += posterior_beta_mean(obs, sk, SD)
    dt = time.perf_counter() - t0
    return calls / dt, acc


def bench_replicates(reps=100):
    design = reference_design(24, 0.5)
    scn = find_scenario("tox3-const60")
    t0 = time.perf_counter()
    for rep in range(reps):
        run_replicate(design, scn, Strategy.C, replicate_seed(1, 0, rep), True)
    dt = time.perf_counter() - t0
    return reps / dt


def main():
    warmup()
    print(f"backend: {backend_name()}")
    rate, _ = bench_posterior()
    print(f"posterior quadrature: {rate:,.0f} calls/s")
    trial_rate = bench_replicates()
    print(f"full replicates:      {trial_rate:,.1f} trials/s")


if __name__ == "__main__":
    main()
