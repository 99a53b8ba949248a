"""Time the numba and numpy builds of the hot kernels.

    python bench/bench_kernels.py [--repeat 5]

Prints best-of-``repeat`` wall time per call for each backend and the speedup.
The first numba call (compilation or cache load) is excluded.
"""

import argparse
import time

import numpy as np

from edapnc import kernels
from edapnc.channel import generate_channel, power_config
from edapnc.linalg import gram_inverse


def _best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(seed):
    rng = np.random.default_rng(seed)
    cs = generate_channel(2, 2, rng_seed=seed)
    ga, gb = gram_inverse(cs.h_ar), gram_inverse(cs.h_br)
    th = np.pi * np.arange(48) / 48
    i, j = np.triu_indices(th.size, 1)
    costs = kernels.pair_costs(ga, gb, th[i], th[j])
    p_t = power_config(20).p_t

    hs = rng.standard_normal((2, 4, 4))
    w = np.array([0.3, 0.7])
    q0 = np.eye(4)

    return {
        "rotation_values (1128 rotations, coarse)": lambda b: kernels.rotation_values(costs, p_t, 0.5, 8, 0, b),
        "rotation_values (1128 rotations, golden)": lambda b: kernels.rotation_values(costs, p_t, 0.5, 8, 6, b),
        "pga_logdet (4x4, 2 channels)": lambda b: kernels.pga_logdet(hs, w, 40.0, q0, backend=b),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)
    print(f"{'kernel':44s} {'numba [ms]':>11s} {'numpy [ms]':>11s} {'speedup':>8s}")
    for name, fn in _cases(args.seed).items():
        fn("numba")  # compile or load from cache
        t_nb = _best_time(lambda: fn("numba"), args.repeat)
        t_np = _best_time(lambda: fn("numpy"), args.repeat)
        print(f"{name:44s} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
