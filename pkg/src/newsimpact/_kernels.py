"""Numeric kernels for spherical k-means: cosine assignment and
centroid accumulation.

These are the pipeline's only hot inner loops (everything else is I/O
and HTTP bound). Assignment is a dense matmul + argmax, which BLAS
already does best, so the active path keeps numpy there; centroid
accumulation is scatter-add, where ``np.add.at`` is slow and the numba
JIT wins by an order of magnitude (see ``benchmarks/bench_kmeans.py``
for the numbers behind this split). Setting
``NEWSIMPACT_DISABLE_NUMBA=1`` (or a failed numba import) selects the
pure-numpy path for everything. Both assignment variants use
first-max-wins argmax so cluster membership agrees between them.
"""

import os

import numpy as np

_DISABLED = os.environ.get("NEWSIMPACT_DISABLE_NUMBA", "") not in ("", "0", "false")

try:
    if _DISABLED:
        raise ImportError("numba disabled by NEWSIMPACT_DISABLE_NUMBA")
    from numba import njit

    NUMBA_ENABLED = True
except ImportError:
    NUMBA_ENABLED = False


def assign_nearest_numpy(embeddings: np.ndarray, centroids: np.ndarray):
    sims = embeddings @ centroids.T
    labels = np.argmax(sims, axis=1)
    best = sims[np.arange(sims.shape[0]), labels]
    return labels.astype(np.int64), best.astype(np.float64)


def accumulate_clusters_numpy(embeddings: np.ndarray, labels: np.ndarray, k: int):
    dim = embeddings.shape[1]
    sums = np.zeros((k, dim), dtype=np.float64)
    counts = np.zeros(k, dtype=np.int64)
    np.add.at(sums, labels, embeddings)
    np.add.at(counts, labels, 1)
    return sums, counts


if NUMBA_ENABLED:

    @njit(cache=True)
    def assign_nearest_numba(embeddings, centroids):  # pragma: no cover - jitted
        n, dim = embeddings.shape
        k = centroids.shape[0]
        labels = np.empty(n, dtype=np.int64)
        best = np.empty(n, dtype=np.float64)
        for i in range(n):
            best_sim = -2.0
            best_j = 0
            for j in range(k):
                s = 0.0
                for d in range(dim):
                    s += embeddings[i, d] * centroids[j, d]
                if s > best_sim:
                    best_sim = s
                    best_j = j
            labels[i] = best_j
            best[i] = best_sim
        return labels, best

    @njit(cache=True)
    def accumulate_clusters_numba(embeddings, labels, k):  # pragma: no cover - jitted
        n, dim = embeddings.shape
        sums = np.zeros((k, dim), dtype=np.float64)
        counts = np.zeros(k, dtype=np.int64)
        for i in range(n):
            j = labels[i]
            counts[j] += 1
            for d in range(dim):
                sums[j, d] += embeddings[i, d]
        return sums, counts

    assign_nearest = assign_nearest_numpy  # BLAS wins this one
    accumulate_clusters = accumulate_clusters_numba
else:
    assign_nearest = assign_nearest_numpy
    accumulate_clusters = accumulate_clusters_numpy
