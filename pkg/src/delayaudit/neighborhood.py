"""k-nearest-neighbor queries with Theiler temporal exclusion.

A static kd-tree is built once per state matrix (brute force below 2000
points). Ties are broken toward the smaller index so results are bit-stable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .embedding import EmbeddingSpec, ReconstructedStates

BRUTE_FORCE_BELOW = 2000


@dataclass
class NeighborConfig:
    """Neighborhood query configuration.

    ``candidate_limit`` is the largest admissible state index (inclusive);
    None means the full series. It is what guarantees pushed-forward futures
    exist.
    """

    k: int
    theiler_w: int
    candidate_limit: int | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.theiler_w < 0:
            raise ValueError("theiler_w must be >= 0")


def default_theiler(spec: EmbeddingSpec) -> int:
    """Default exclusion window: tau*(m-1) for delay maps, 20 otherwise."""
    if spec.kind == "delay":
        return spec.tau * (spec.m - 1)
    return 20


def _as_matrix(states) -> np.ndarray:
    if isinstance(states, ReconstructedStates):
        return states.states
    return np.asarray(states, dtype=float)


def _get_tree(states) -> cKDTree:
    if isinstance(states, ReconstructedStates):
        if states._tree_cache is None:
            states._tree_cache = cKDTree(states.states)
        return states._tree_cache
    return cKDTree(_as_matrix(states))


def _admissible_count(n: int, q: int, w: int, limit: int) -> int:
    lo = max(0, q - w)
    hi = min(limit, q + w)
    excluded = max(0, hi - lo + 1)
    return (limit + 1) - excluded


def _select(dist: np.ndarray, idx: np.ndarray, q: int, k: int, w: int,
            limit: int):
    """Filter a candidate list and keep the k nearest admissible, ties to
    the smaller index."""
    keep = (np.abs(idx - q) > w) & (idx <= limit)
    dist = dist[keep]
    idx = idx[keep]
    if idx.shape[0] < k:
        return None
    order = np.lexsort((idx, dist))
    return idx[order[:k]], dist[order[:k]]


def query_neighbors(states, queries, cfg: NeighborConfig, workers: int = 1):
    """Neighbor sets for many queries at once.

    Returns (indices, distances) with shape (Q, k), each row sorted by
    ascending distance (ties by smaller index).
    """
    X = _as_matrix(states)
    n = X.shape[0]
    limit = n - 1 if cfg.candidate_limit is None else int(cfg.candidate_limit)
    if not 0 <= limit <= n - 1:
        raise ValueError("candidate_limit outside the state range")
    queries = np.asarray(queries, dtype=np.int64).reshape(-1)
    nq = queries.shape[0]
    for q in queries:
        avail = _admissible_count(n, int(q), cfg.theiler_w, limit)
        if avail < cfg.k:
            raise ValueError(
                f"query {int(q)}: only {avail} admissible candidates for "
                f"k={cfg.k} (theiler_w={cfg.theiler_w}, "
                f"candidate_limit={limit})")

    out_idx = np.empty((nq, cfg.k), dtype=np.int64)
    out_dist = np.empty((nq, cfg.k))

    if n < BRUTE_FORCE_BELOW:
        all_idx = np.arange(n)
        for row, q in enumerate(queries):
            d = np.sqrt(((X - X[q]) ** 2).sum(1))
            picked = _select(d, all_idx, int(q), cfg.k, cfg.theiler_w, limit)
            out_idx[row], out_dist[row] = picked
        return out_idx, out_dist

    tree = _get_tree(states)
    # worst case exclusions: the Theiler band plus the tail beyond the limit
    slack = 2 * cfg.theiler_w + 1 + (n - 1 - limit) + 8
    k_raw = min(n, cfg.k + slack)
    dists, idxs = tree.query(X[queries], k=k_raw, workers=workers)
    for row, q in enumerate(queries):
        d, i = dists[row], idxs[row]
        kk = k_raw
        while True:
            picked = _select(d, i, int(q), cfg.k, cfg.theiler_w, limit)
            if kk >= n:
                break  # full scan; the pre-check guarantees picked is filled
            # escalate when short, or when the k-th distance ties the fetch
            # boundary (a smaller-index tie could still lie outside the fetch)
            if picked is not None and picked[1][-1] < d[-1]:
                break
            kk = min(n, 2 * kk)
            d, i = tree.query(X[q], k=kk)
        out_idx[row], out_dist[row] = picked
    return out_idx, out_dist


def knn_theiler(states, q: int, cfg: NeighborConfig):
    """The k nearest neighbors of state q under temporal exclusion.

    Candidates satisfy |t - q| > theiler_w and t <= candidate_limit; exactly
    k indices are returned, sorted by ascending distance.
    """
    idx, dist = query_neighbors(states, [q], cfg)
    return idx[0], dist[0]


def radius_stats(states, queries, cfg: NeighborConfig, workers: int = 1) -> dict:
    """Median and 0.9-quantile (linear interpolation) of the k-th neighbor
    distance over the query set."""
    _, dist = query_neighbors(states, queries, cfg, workers=workers)
    r_k = dist[:, -1]
    return {
        "r_k_median": float(np.quantile(r_k, 0.5)),
        "r_k_q90": float(np.quantile(r_k, 0.9)),
    }
