"""Benchmark the spherical k-means kernels: numba JIT vs pure numpy.

Run:
    python benchmarks/bench_kmeans.py [n_statements] [dim] [k]

The JIT path is what the package uses by default; export
NEWSIMPACT_DISABLE_NUMBA=1 to force the numpy path at runtime.
"""

import sys
import time

import numpy as np

from newsimpact import _kernels
from newsimpact._kernels import (
    NUMBA_ENABLED,
    accumulate_clusters_numpy,
    assign_nearest_numpy,
)


def time_fn(fn, *args, repeats=20):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> None:
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 40_000
    dim = int(sys.argv[2]) if len(sys.argv) > 2 else 64
    k = int(sys.argv[3]) if len(sys.argv) > 3 else 10

    rng = np.random.RandomState(0)
    embeddings = rng.standard_normal((n, dim))
    embeddings /= np.linalg.norm(embeddings, axis=1, keepdims=True)
    centroids = rng.standard_normal((k, dim))
    centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)

    print(f"n={n} dim={dim} k={k}  numba available: {NUMBA_ENABLED}")
    if NUMBA_ENABLED:
        # Warm the JIT before timing.
        labels_warm, _ = _kernels.assign_nearest_numba(embeddings[:64], centroids)
        _kernels.accumulate_clusters_numba(embeddings[:64], labels_warm, k)

    t_np, (labels_np, _) = time_fn(assign_nearest_numpy, embeddings, centroids)
    print(f"assign   numpy : {t_np * 1e3:8.2f} ms   <- active path (BLAS)")
    if NUMBA_ENABLED:
        t_nb, (labels_nb, _) = time_fn(_kernels.assign_nearest_numba, embeddings, centroids)
        agreement = float(np.mean(labels_nb == labels_np))
        print(f"assign   numba : {t_nb * 1e3:8.2f} ms  ({t_np / t_nb:4.1f}x, agreement {agreement:.4f})")

    t_np, _ = time_fn(accumulate_clusters_numpy, embeddings, labels_np, k)
    print(f"update   numpy : {t_np * 1e3:8.2f} ms")
    if NUMBA_ENABLED:
        t_nb, _ = time_fn(_kernels.accumulate_clusters_numba, embeddings, labels_np, k)
        print(f"update   numba : {t_nb * 1e3:8.2f} ms  ({t_np / t_nb:4.1f}x)   <- active path")


if __name__ == "__main__":
    main()
