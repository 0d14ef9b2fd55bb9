"""Pure-Python implementations of the hot kernels.

These mirror the compiled extension in delayaudit._kernels and are selected
automatically when the extension is not built (see delayaudit.kernels).
Semantics are identical; only speed differs.
"""
from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# fixed-step RK4
# ---------------------------------------------------------------------------

def _make_rhs(system_id: str, params: dict):
    if system_id == "rossler":
        a, b, c = params["a"], params["b"], params["c"]

        def rhs(z):
            return (-z[1] - z[2], z[0] + a * z[1], b + z[2] * (z[0] - c))

        return rhs
    if system_id == "lorenz63":
        s, r, beta = params["sigma"], params["rho"], params["beta"]

        def rhs(z):
            return (s * (z[1] - z[0]), z[0] * (r - z[2]) - z[1],
                    z[0] * z[1] - beta * z[2])

        return rhs
    if system_id == "linear_test":
        rate = params["rate"]

        def rhs(z):
            return (-rate * z[0],)

        return rhs
    if system_id == "double_pendulum":
        A = params["m1"] * params["a1"] ** 2 + params["m2"] * params["l1"] ** 2 + params["I1"]
        B = params["m2"] * params["a2"] ** 2 + params["I2"]
        C = params["m2"] * params["l1"] * params["a2"]
        G1 = params["g"] * (params["m1"] * params["a1"] + params["m2"] * params["l1"])
        G2 = params["g"] * params["m2"] * params["a2"]

        def rhs(z):
            th1, th2, w1, w2 = z
            delta = th1 - th2
            cd = math.cos(delta)
            sd = math.sin(delta)
            r1 = G1 * math.sin(th1) - C * sd * w2 * w2
            r2 = G2 * math.sin(th2) + C * sd * w1 * w1
            det = A * B - (C * cd) ** 2
            return (w1, w2, (B * r1 - C * cd * r2) / det,
                    (A * r2 - C * cd * r1) / det)

        return rhs
    raise ValueError(f"unknown system_id {system_id!r}")


def rk4_integrate(system_id: str, params: dict, z0: np.ndarray, dt: float,
                  steps: int, substeps: int = 1):
    """Integrate and sample ``steps`` states (initial state included).

    ``dt`` is the sampling interval; each sample is reached by ``substeps``
    RK4 steps of size dt/substeps. Returns (states, bad_step); bad_step is
    -1 on success, otherwise the index of the first non-finite sample (rows
    from there on are undefined).
    """
    rhs = _make_rhs(system_id, params)
    d = len(z0)
    out = np.empty((steps, d))
    state = tuple(float(v) for v in z0)
    out[0] = state
    h = float(dt) / substeps
    h2 = 0.5 * h
    h6 = h / 6.0
    for i in range(1, steps):
        for _ in range(substeps):
            k1 = rhs(state)
            k2 = rhs(tuple(z + h2 * k for z, k in zip(state, k1)))
            k3 = rhs(tuple(z + h2 * k for z, k in zip(state, k2)))
            k4 = rhs(tuple(z + h * k for z, k in zip(state, k3)))
            state = tuple(z + h6 * (a + 2.0 * b + 2.0 * c + e)
                          for z, a, b, c, e in zip(state, k1, k2, k3, k4))
        if not all(math.isfinite(v) for v in state):
            return out, i
        out[i] = state
    return out, -1


# ---------------------------------------------------------------------------
# Weiszfeld geometric median
# ---------------------------------------------------------------------------

def _cloud_diameter(points: np.ndarray) -> float:
    diffs = points[:, None, :] - points[None, :, :]
    return float(np.sqrt((diffs ** 2).sum(-1)).max())


def _risk(points: np.ndarray, weights: np.ndarray, y: np.ndarray) -> float:
    return float(weights @ np.sqrt(((points - y) ** 2).sum(1)))


def weiszfeld_single(points: np.ndarray, weights: np.ndarray, tol: float,
                     max_iter: int, history: list | None = None):
    """Weighted geometric median of one point cloud by Weiszfeld iteration.

    Starts from the weighted mean and stops when the update step falls below
    ``tol`` (an absolute length). When the iterate lands within ``tol`` of a
    data point the coincident pull is capped (Vardi-Zhang rule); if the
    remaining pull does not exceed the coincident weight the data point is
    the median and the iterate snaps onto it exactly.

    Returns (point, m_hat, iters, converged).
    """
    points = np.ascontiguousarray(points, dtype=float)
    weights = np.ascontiguousarray(weights, dtype=float)
    k = points.shape[0]
    if k == 1:
        return points[0].copy(), 0.0, 0, True
    if _cloud_diameter(points) == 0.0:
        return points[0].copy(), 0.0, 0, True
    tol = max(float(tol), 1e-30)
    y = weights @ points
    iters = 0
    converged = False
    for _ in range(max_iter):
        d = np.sqrt(((points - y) ** 2).sum(1))
        if history is not None:
            history.append(float(weights @ d))
        anchored = d < tol
        if anchored.any():
            w_anchor = float(weights[anchored].sum())
            free = ~anchored
            if not free.any():
                y = points[int(np.argmin(d))].copy()
                converged = True
                break
            inv = weights[free] / d[free]
            pull = inv @ (points[free] - y)
            r = float(np.sqrt((pull ** 2).sum()))
            if r <= w_anchor:
                # coincident point is the minimizer; snap exactly
                cand = np.flatnonzero(anchored)
                y = points[cand[int(np.argmin(d[cand]))]].copy()
                converged = True
                break
            t = (inv @ points[free]) / inv.sum()
            y_next = y + (1.0 - w_anchor / r) * (t - y)
        else:
            inv = weights / d
            y_next = (inv @ points) / inv.sum()
        step = float(np.sqrt(((y_next - y) ** 2).sum()))
        y = y_next
        iters += 1
        if step < tol:
            converged = True
            break
    m_hat = _risk(points, weights, y)
    if history is not None:
        history.append(m_hat)
    return y, m_hat, iters, converged


def weiszfeld_batch(points: np.ndarray, weights: np.ndarray | None,
                    tol_rel: float, max_iter: int):
    """Geometric medians of a stack of clouds (Q, k, m).

    ``weights`` is (Q, k) or None for uniform; per-cloud tolerance is
    ``tol_rel`` times the cloud diameter. Returns (medians, costs, iters,
    converged) with leading dimension Q.
    """
    points = np.asarray(points, dtype=float)
    q, k, m = points.shape
    if weights is None:
        weights = np.full((q, k), 1.0 / k)
    medians = np.empty((q, m))
    costs = np.empty(q)
    iters = np.empty(q, dtype=np.int32)
    converged = np.empty(q, dtype=bool)
    for i in range(q):
        tol = tol_rel * _cloud_diameter(points[i])
        y, c, it, ok = weiszfeld_single(points[i], weights[i], tol, max_iter)
        medians[i] = y
        costs[i] = c
        iters[i] = it
        converged[i] = ok
    return medians, costs, iters, converged
