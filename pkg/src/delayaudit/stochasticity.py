"""The intrinsic-stochasticity estimator.

Empirical push-forward kernels over Theiler-excluded neighborhoods, the
weighted Frechet median (Weiszfeld iteration, compiled kernel when
available), and the per-horizon aggregation over sampled queries.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .neighborhood import NeighborConfig, query_neighbors

# RNG stream tags, combined with the user seed so every stochastic choice is
# reproducible and independent of the others.
STREAM_QUERIES = 1
STREAM_KMEANS = 2
STREAM_CCM = 3
STREAM_DIAMETER = 4

DEFAULT_TOL_REL = 1e-9
DEFAULT_MAX_ITER = 200


def rng_for(seed: int, stream: int, *extra: int) -> np.random.Generator:
    """Deterministic generator for one named stream of a run."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence([int(seed), int(stream), *map(int, extra)])))


@dataclass
class EmpiricalKernel:
    """Weighted point cloud approximating one conditional future law."""

    points: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        self.points = np.ascontiguousarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] < 1:
            raise ValueError("kernel needs a (k, m) point matrix with k >= 1")
        k = self.points.shape[0]
        if self.weights is None:
            self.weights = np.full(k, 1.0 / k)
        else:
            self.weights = np.ascontiguousarray(self.weights, dtype=float)
            if self.weights.shape != (k,):
                raise ValueError("weights must match the point count")
            if (self.weights < 0).any():
                raise ValueError("weights must be nonnegative")
            if abs(float(self.weights.sum()) - 1.0) > 1e-12:
                raise ValueError("weights must sum to 1")

    @property
    def k(self) -> int:
        return self.points.shape[0]

    @property
    def m(self) -> int:
        return self.points.shape[1]

    def diameter(self) -> float:
        diffs = self.points[:, None, :] - self.points[None, :, :]
        return float(np.sqrt((diffs ** 2).sum(-1)).max())


@dataclass
class GeometricMedianResult:
    point: np.ndarray
    m_hat: float
    iters: int
    converged: bool


@dataclass
class StochasticityReport:
    """Per-query median costs and their aggregate for one horizon."""

    estar: float
    per_query: list
    config: dict
    m_std: float
    m_stderr: float
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "estar": self.estar,
            "m_std": self.m_std,
            "m_stderr": self.m_stderr,
            "config": self.config,
            "per_query": self.per_query,
            "warnings": self.warnings,
        }


def push_forward_cloud(states, q: int, n: int, cfg: NeighborConfig) -> EmpiricalKernel:
    """Uniform kernel of the n-step futures of the neighbors of state q.

    The candidate limit is tightened to T - n - 1 so every neighbor has an
    n-step future.
    """
    X = states.states if hasattr(states, "states") else np.asarray(states, dtype=float)
    t_total = X.shape[0]
    limit = t_total - n - 1
    if cfg.candidate_limit is not None:
        limit = min(limit, cfg.candidate_limit)
    eff = NeighborConfig(k=cfg.k, theiler_w=cfg.theiler_w, candidate_limit=limit)
    idx, _ = query_neighbors(states, [q], eff)
    return EmpiricalKernel(points=X[idx[0] + n])


def pointwise_risk(kernel: EmpiricalKernel, y) -> float:
    """Weighted mean distance from y to the kernel atoms.

    This is exactly the Wasserstein-1 distance between the kernel and the
    Dirac mass at y (every transport plan moves all mass to y).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (kernel.m,):
        raise ValueError(f"y has dimension {y.shape}, kernel has m={kernel.m}")
    return float(kernel.weights @ np.sqrt(((kernel.points - y) ** 2).sum(1)))


def geometric_median(kernel: EmpiricalKernel, tol: float | None = None,
                     max_iter: int = DEFAULT_MAX_ITER) -> GeometricMedianResult:
    """Weighted geometric median of the kernel by Weiszfeld iteration.

    ``tol`` is an absolute step tolerance; the default is 1e-9 times the
    cloud diameter. Always returns; non-convergence is flagged with
    iters == max_iter.
    """
    if tol is None:
        tol = DEFAULT_TOL_REL * kernel.diameter()
    point, m_hat, iters, converged = kernels.weiszfeld_single(
        kernel.points, kernel.weights, float(tol), int(max_iter))
    return GeometricMedianResult(point=point, m_hat=float(m_hat),
                                 iters=int(iters), converged=bool(converged))


def _admissible_query_count(t_total: int, n: int) -> int:
    return t_total - n


def sample_queries(t_total: int, n: int, n_queries: int, seed: int) -> np.ndarray:
    """Uniform sample without replacement from {0, ..., T-n-1}, sorted."""
    pool = _admissible_query_count(t_total, n)
    if n_queries > pool:
        raise ValueError(f"cannot draw {n_queries} queries from {pool} "
                         "admissible indices")
    rng = rng_for(seed, STREAM_QUERIES)
    queries = rng.choice(pool, size=n_queries, replace=False)
    return np.sort(queries)


def estar_at_queries(states, n: int, cfg: NeighborConfig, queries,
                     workers: int = 1, max_iter: int = DEFAULT_MAX_ITER):
    """Median costs for fixed queries; deterministic reduction in query order.

    Returns (costs, medians, r_k, converged) aligned with the sorted query
    array.
    """
    X = states.states if hasattr(states, "states") else np.asarray(states, dtype=float)
    t_total = X.shape[0]
    queries = np.sort(np.asarray(queries, dtype=np.int64))
    limit = t_total - n - 1
    if cfg.candidate_limit is not None:
        limit = min(limit, cfg.candidate_limit)
    eff = NeighborConfig(k=cfg.k, theiler_w=cfg.theiler_w, candidate_limit=limit)
    idx, dist = query_neighbors(states, queries, eff, workers=workers)
    clouds = X[idx + n]
    medians, costs, _, converged = kernels.weiszfeld_batch(
        clouds, None, DEFAULT_TOL_REL, max_iter)
    r_k = dist[:, -1]
    return costs, medians, r_k, converged


def estimate_estar(states, n: int, cfg: NeighborConfig, n_queries: int,
                   seed: int, workers: int = 1) -> StochasticityReport:
    """Mean Frechet-median cost of empirical n-step kernels.

    Queries are drawn without replacement by the seeded generator; per-query
    results are reduced in sorted query order, so the report is bit-identical
    for identical inputs and seed regardless of worker count.
    """
    X = states.states if hasattr(states, "states") else np.asarray(states, dtype=float)
    t_total = X.shape[0]
    if n < 0:
        raise ValueError("horizon n must be >= 0")
    if _admissible_query_count(t_total, n) < 1:
        raise ValueError(f"series too short for horizon n={n}")
    queries = sample_queries(t_total, n, n_queries, seed)
    costs, medians, r_k, converged = estar_at_queries(
        states, n, cfg, queries, workers=workers)
    estar = float(np.mean(costs))
    std = float(np.std(costs, ddof=1)) if n_queries > 1 else 0.0
    per_query = [
        {
            "query": int(q),
            "m_hat": float(c),
            "median": [float(v) for v in med],
            "r_k": float(r),
        }
        for q, c, med, r in zip(queries, costs, medians, r_k)
    ]
    warn = []
    n_bad = int((~converged).sum())
    if n_bad:
        warn.append(f"{n_bad} of {n_queries} median iterations hit max_iter")
    return StochasticityReport(
        estar=estar,
        per_query=per_query,
        config={
            "n": int(n), "k": int(cfg.k), "theiler_w": int(cfg.theiler_w),
            "n_queries": int(n_queries), "seed": int(seed),
        },
        m_std=std,
        m_stderr=std / np.sqrt(n_queries) if n_queries > 1 else 0.0,
        warnings=warn,
    )


def estar_curve(states, horizons, cfg: NeighborConfig, n_queries: int,
                seed: int, workers: int = 1) -> list:
    """(horizon, estar) pairs over a shared query sample.

    Queries are drawn once, admissible for the largest horizon, and reused
    at every horizon so curves are comparable point by point.
    """
    X = states.states if hasattr(states, "states") else np.asarray(states, dtype=float)
    t_total = X.shape[0]
    horizons = [int(h) for h in horizons]
    n_max = max(horizons)
    queries = sample_queries(t_total, n_max, n_queries, seed)
    out = []
    for n in horizons:
        costs, _, _, _ = estar_at_queries(states, n, cfg, queries, workers=workers)
        out.append((n, float(np.mean(costs))))
    return out
