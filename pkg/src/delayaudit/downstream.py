"""Downstream impact experiments: simplex cross mapping and polynomial EDMD."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .bounds import pearson
from .embedding import ReconstructedStates, delay_embed
from .stochasticity import STREAM_CCM, rng_for


@dataclass
class CcmResult:
    """Cross-map skill per library size, both directions.

    rho_ab[i] is the skill of estimating series_b from the shadow manifold
    of series_a at library size library_sizes[i]; rho_ba is the reverse.
    """

    library_sizes: list
    rho_ab: list
    rho_ba: list

    def to_dict(self) -> dict:
        return {"library_sizes": self.library_sizes, "rho_ab": self.rho_ab,
                "rho_ba": self.rho_ba}


def _cross_map_direction(manifold_series, target_series, m, tau,
                         library_sizes, seed, stream_tag, max_queries):
    recon = delay_embed(manifold_series, m, tau)
    rows = recon.states
    offset = recon.sample_offset
    n_rows = rows.shape[0]
    targets = np.asarray(target_series, dtype=float)[offset:offset + n_rows]
    if max_queries is not None and n_rows > max_queries:
        stride = n_rows // max_queries
        query_rows = np.arange(0, n_rows, stride)[:max_queries]
    else:
        query_rows = np.arange(n_rows)
    truth = targets[query_rows]
    rhos = []
    for size_idx, lib_size in enumerate(library_sizes):
        if lib_size > n_rows:
            raise ValueError(f"library size {lib_size} exceeds the "
                             f"{n_rows} available states")
        if lib_size < m + 3:
            raise ValueError(f"library size {lib_size} too small for "
                             f"{m + 1}-neighbor prediction")
        rng = rng_for(seed, STREAM_CCM, stream_tag, size_idx)
        library = np.sort(rng.choice(n_rows, size=lib_size, replace=False))
        tree = cKDTree(rows[library])
        k_q = min(m + 2, lib_size)
        dist, nn = tree.query(rows[query_rows], k=k_q)
        preds = np.empty(query_rows.shape[0])
        for r, q in enumerate(query_rows):
            glob = library[nn[r]]
            d = dist[r]
            keep = glob != q  # self-match exclusion
            glob = glob[keep][:m + 1]
            d = d[keep][:m + 1]
            if d[0] < 1e-12:
                w = (d < 1e-12).astype(float)
            else:
                w = np.exp(-d / d[0])
            w = w / w.sum()
            preds[r] = w @ targets[glob]
        rhos.append(pearson(preds, truth))
    return rhos


def ccm(series_a, series_b, m: int, tau: int, library_sizes, seed: int,
        max_queries: int | None = 1000) -> CcmResult:
    """Simplex cross mapping between two simultaneous series.

    Embeds each series with (m, tau) backward delays; for every library size
    a seeded subsample of manifold points predicts the other series at the
    contemporaneous index through m+1 nearest neighbors with exponential
    weights, and the skill is the Pearson correlation of prediction vs truth.
    """
    series_a = np.asarray(series_a, dtype=float).reshape(-1)
    series_b = np.asarray(series_b, dtype=float).reshape(-1)
    if series_a.shape != series_b.shape:
        raise ValueError("series must have equal length")
    t_total = series_a.shape[0]
    sizes = sorted(int(s) for s in library_sizes)
    if t_total <= max(sizes) + (m - 1) * tau:
        raise ValueError("series too short for the largest library size")
    rho_ab = _cross_map_direction(series_a, series_b, m, tau, sizes, seed, 0,
                                  max_queries)
    rho_ba = _cross_map_direction(series_b, series_a, m, tau, sizes, seed, 1,
                                  max_queries)
    return CcmResult(library_sizes=sizes, rho_ab=rho_ab, rho_ba=rho_ba)


# ---------------------------------------------------------------------------
# EDMD with a cubic polynomial dictionary
# ---------------------------------------------------------------------------

def monomial_exponents(m: int, degree: int = 3) -> np.ndarray:
    """All exponent vectors of total degree <= degree, graded lex order."""
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(m), total):
            e = [0] * m
            for v in combo:
                e[v] += 1
            out.append(tuple(e))
    seen = sorted(set(out), key=lambda e: (sum(e), e))
    return np.array(seen, dtype=np.int64)


def lift(states: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    """Evaluate the monomial dictionary row-wise: (N, D) matrix."""
    n = states.shape[0]
    out = np.ones((n, exponents.shape[0]))
    for j, e in enumerate(exponents):
        for v, p in enumerate(e):
            if p:
                out[:, j] *= states[:, v] ** p
    return out


@dataclass
class EdmdModel:
    """Least-squares Koopman approximation on a cubic monomial dictionary."""

    exponents: np.ndarray
    koopman_matrix: np.ndarray
    ridge_lambda: float
    state_recovery: np.ndarray  # dictionary positions of the coordinates
    lambda_escalated: bool = False
    m: int = 0

    def lift(self, states: np.ndarray) -> np.ndarray:
        return lift(states, self.exponents)

    def recover(self, lifted: np.ndarray) -> np.ndarray:
        return lifted[:, self.state_recovery]


def edmd_fit(recon: ReconstructedStates, ridge_lambda: float = 1e-8) -> EdmdModel:
    """Fit the lifted one-step map by ridge-regularized normal equations.

    If the normal matrix is numerically unusable, the ridge is escalated
    tenfold (up to six times) and the model is flagged.
    """
    X = recon.states if isinstance(recon, ReconstructedStates) else np.asarray(recon, dtype=float)
    n, m = X.shape
    exponents = monomial_exponents(m, 3)
    d = exponents.shape[0]
    if n < d + 1:
        raise ValueError(f"need at least {d + 1} states to fit a "
                         f"{d}-monomial dictionary")
    psi = lift(X[:-1], exponents)
    psi_next = lift(X[1:], exponents)
    gram = psi.T @ psi
    cross = psi.T @ psi_next
    lam = float(ridge_lambda)
    escalated = False
    koopman = None
    for attempt in range(7):
        try:
            chol = np.linalg.cholesky(gram + lam * np.eye(d))
            koopman = np.linalg.solve(chol.T, np.linalg.solve(chol, cross))
        except np.linalg.LinAlgError:
            koopman = None
        if koopman is not None and np.isfinite(koopman).all():
            break
        lam = max(lam, 1e-12) * 10.0
        escalated = True
    if koopman is None or not np.isfinite(koopman).all():
        raise ValueError("normal matrix unusable even after ridge escalation")
    deg1 = []
    for coord in range(m):
        unit = tuple(1 if v == coord else 0 for v in range(m))
        deg1.append(int(np.flatnonzero((exponents == unit).all(axis=1))[0]))
    return EdmdModel(exponents=exponents, koopman_matrix=koopman,
                     ridge_lambda=lam, state_recovery=np.array(deg1),
                     lambda_escalated=escalated, m=m)


def edmd_rollout_nrmse(model: EdmdModel, test, horizons,
                       max_starts: int = 2000) -> dict:
    """NRMSE of lifted-space rollouts against a held-out reconstruction.

    For each start the lifted state advances h steps through the Koopman
    matrix, projects back through the coordinate rows, and errors accumulate
    per coordinate; NRMSE at h is the per-coordinate sqrt(MSE)/std averaged
    over coordinates. Non-finite rollouts yield inf.
    """
    X = test.states if isinstance(test, ReconstructedStates) else np.asarray(test, float)
    n = X.shape[0]
    horizons = sorted(int(h) for h in horizons)
    h_max = horizons[-1]
    if h_max >= n:
        raise ValueError(f"horizon {h_max} exceeds the test length {n}")
    n_starts = n - h_max
    if n_starts > max_starts:
        stride = n_starts // max_starts
        starts = np.arange(0, n_starts, stride)[:max_starts]
    else:
        starts = np.arange(n_starts)
    sigma = X.std(axis=0)
    sigma = np.where(sigma > 0, sigma, 1.0)
    psi = model.lift(X[starts])
    out = {}
    step = 0
    for h in horizons:
        while step < h:
            psi = psi @ model.koopman_matrix
            step += 1
        pred = model.recover(psi)
        truth = X[starts + h]
        if not np.isfinite(pred).all():
            out[h] = float("inf")
            continue
        mse_c = ((pred - truth) ** 2).mean(axis=0)
        out[h] = float(np.mean(np.sqrt(mse_c) / sigma))
    return out
