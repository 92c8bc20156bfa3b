"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from stagegame import kernels
from stagegame.coverage import RoiGaussian, build_grid
from stagegame.game import EnergyTables

LINK = (16.02, 46.67, 2.0, 1.0)


def cases(rng):
    grid = build_grid(RoiGaussian(), 40)
    cands = np.ascontiguousarray(rng.uniform(-300, 300, (27, 3)))
    ctx = np.ascontiguousarray(rng.uniform(-300, 300, (4, 3)))

    m, a = 5, 27
    tables = EnergyTables.from_blocks(
        [rng.normal(size=a) for _ in range(m)],
        {(j, k): rng.normal(size=(a, a)) for j in range(m) for k in range(j + 1, m)},
    )
    q0 = np.full((m, a), 1.0 / a)
    order = np.arange(m, dtype=np.int64)

    upper = np.triu(rng.random((60, 60)) < 0.08, 1)
    adj = np.ascontiguousarray(upper | upper.T, dtype=np.uint8)

    def coverage(k):
        floor = k.max_power_field(ctx, grid.points, *LINK)
        return k.coverage_sums(cands, grid.points, grid.weights, floor, *LINK)

    def sweeps(k):
        q = q0.copy()
        for _ in range(20):
            k.mf_sweep(tables.unary, tables.pairwise, tables.n_actions, q, order)
        return k.free_energy(tables.unary, tables.pairwise, tables.n_actions, q)

    return {
        f"coverage unary, 27 candidates x {len(grid)} grid points": coverage,
        "20 mean-field sweeps, 5 members x 27 actions": sweeps,
        "all-pairs BFS hops, 60 nodes": lambda k: k.bfs_hops(adj),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=50)
    args = parser.parse_args()
    backends = {name: kernels.get_backend(name) for name in kernels.available_backends()}
    if len(backends) < 2:
        print("compiled extension not built; only the numpy backend is available")
    print(f"{'kernel':<52}" + "".join(f"{name:>12}" for name in backends) + "   speedup")
    for label, fn in cases(np.random.default_rng(0)).items():
        times = {name: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat))
                 for name, k in backends.items()}
        cols = "".join(f"{t * 1e3:>10.3f}ms" for t in times.values())
        speedup = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{label:<52}{cols}   {speedup:6.1f}x")


if __name__ == "__main__":
    main()
