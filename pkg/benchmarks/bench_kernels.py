"""Compare the compiled and NumPy kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from cfasync import kernels
from cfasync.expcli.config import default_config
from cfasync.expcli.experiments import make_scenario, make_scene
from cfasync.mcsim import McConfig, run_monte_carlo

SHAPES = {"desk": (256, 10, 4, 3), "network": (32, 100, 20, 5)}


def _inputs(B, L, K, M, seed=0):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((B, L, K, K)) + 1j * rng.standard_normal((B, L, K, K))
    c = rng.standard_normal((B, L, K, M)) + 1j * rng.standard_normal((B, L, K, M))
    return G, c, rng.uniform(0.5, 1.5, L)


def time_call(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_accumulate(backend, shape, repeat):
    G, c, mu = _inputs(*shape)
    B, L, K, M = shape

    def run():
        out = (np.zeros((K, L, M), complex), np.zeros((K, K, M)), np.zeros((K, K, L)))
        kernels.accumulate_inner(G, c, mu, *out, backend=backend)

    return time_call(run, repeat)


def bench_pair_traces(backend, repeat):
    rng = np.random.default_rng(1)
    Q = rng.standard_normal((200, 20, 4, 4)) + 1j * rng.standard_normal((200, 20, 4, 4))
    return time_call(lambda: kernels.pair_traces(Q, Q, backend=backend), repeat)


def bench_mc(backend, trials):
    cfg = default_config("validate")
    scen = make_scenario(cfg, make_scene(cfg, 0), cfg.phase_params())
    t0 = time.perf_counter()
    run_monte_carlo(scen, McConfig(trials=trials, seed=0, instants=(3, 13, 50)), backend=backend)
    return time.perf_counter() - t0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--trials", type=int, default=4000)
    args = ap.parse_args()

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default: {kernels.BACKEND})")
    print(f"{'kernel':<28}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")

    def row(label, times):
        sp = times[0] / times[-1] if len(times) > 1 else 1.0
        print(f"{label:<28}" + "".join(f"{t * 1e3:>10.2f}ms" for t in times) + f"{sp:>9.1f}x")

    for name, shape in SHAPES.items():
        row(f"accumulate_inner[{name}]", [bench_accumulate(b, shape, args.repeat) for b in backends])
    row("pair_traces[L200,K20,N4]", [bench_pair_traces(b, args.repeat) for b in backends])
    row(f"monte_carlo[desk,{args.trials}]", [bench_mc(b, args.trials) for b in backends])


if __name__ == "__main__":
    main()
