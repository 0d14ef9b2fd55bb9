"""Supervised fold diagnostics and the transform improvement metric."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .dynamics import Trajectory
from .embedding import ReconstructedStates
from .neighborhood import NeighborConfig, query_neighbors
from .stochasticity import STREAM_DIAMETER, rng_for


@dataclass
class FoldFracConfig:
    """Configuration for the supervised false-neighbor fraction."""

    k: int
    theiler_w: int
    delta_tol_fraction: float = 0.05
    diameter_subsample: int = 2000
    diameter_seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.delta_tol_fraction < 1.0:
            raise ValueError("delta_tol_fraction must lie in (0, 1)")


def latent_diameter(latent: Trajectory, subsample: int = 2000,
                    seed: int = 0) -> float:
    """Max pairwise distance over a seeded subsample of the latent states."""
    Z = latent.states
    n = Z.shape[0]
    if n > subsample:
        rng = rng_for(seed, STREAM_DIAMETER)
        pick = np.sort(rng.choice(n, size=subsample, replace=False))
        Z = Z[pick]
    if Z.shape[0] < 2:
        return 0.0
    return float(pdist(Z).max())


def fold_frac(recon: ReconstructedStates, latent: Trajectory, queries,
              cfg: FoldFracConfig, candidate_limit: int | None = None) -> float:
    """Mean fraction of reconstruction-space neighbors that are far in
    latent space.

    A neighbor t of query q counts as false when ||z_q - z_t|| exceeds
    delta_tol_fraction times the latent attractor diameter. Passing the
    ``candidate_limit`` used by the estimator makes the neighbor sets
    identical to the ones behind the stochasticity estimate.
    """
    offset = recon.sample_offset
    if len(latent) < len(recon) + offset:
        raise ValueError("latent trajectory shorter than the reconstruction "
                         "alignment requires")
    diam = latent_diameter(latent, cfg.diameter_subsample, cfg.diameter_seed)
    if diam <= 0:
        raise ValueError("latent attractor diameter is zero")
    delta_tol = cfg.delta_tol_fraction * diam
    ncfg = NeighborConfig(k=cfg.k, theiler_w=cfg.theiler_w,
                          candidate_limit=candidate_limit)
    queries = np.asarray(queries, dtype=np.int64)
    idx, _ = query_neighbors(recon, queries, ncfg)
    zq = latent.states[queries + offset]
    zt = latent.states[idx + offset]
    far = np.sqrt(((zt - zq[:, None, :]) ** 2).sum(-1)) > delta_tol
    return float(far.mean())


def improvement_pct(e_raw: float, e_transformed: float) -> float:
    """Percentage reduction of the stochasticity after a transform."""
    if e_raw <= 0:
        raise ValueError("e_raw must be positive")
    return (e_raw - e_transformed) / e_raw * 100.0
