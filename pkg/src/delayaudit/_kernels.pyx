# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fixed-step RK4 and Weiszfeld geometric medians.

Semantics match delayaudit._kernels_py exactly; delayaudit.kernels picks
whichever backend is importable.
"""

from libc.math cimport cos, isfinite, sin, sqrt

import numpy as np

DEF MAX_DIM = 8

cdef int SYS_ROSSLER = 0
cdef int SYS_LORENZ = 1
cdef int SYS_PENDULUM = 2
cdef int SYS_LINEAR = 3


cdef inline void _rhs(int sys, const double* p, const double* z, double* out) noexcept nogil:
    cdef double delta, cd, sd, r1, r2, det
    if sys == SYS_ROSSLER:
        out[0] = -z[1] - z[2]
        out[1] = z[0] + p[0] * z[1]
        out[2] = p[1] + z[2] * (z[0] - p[2])
    elif sys == SYS_LORENZ:
        out[0] = p[0] * (z[1] - z[0])
        out[1] = z[0] * (p[1] - z[2]) - z[1]
        out[2] = z[0] * z[1] - p[2] * z[2]
    elif sys == SYS_PENDULUM:
        # p = (A, B, C, G1, G2) precomputed from the physical parameters
        delta = z[0] - z[1]
        cd = cos(delta)
        sd = sin(delta)
        r1 = p[3] * sin(z[0]) - p[2] * sd * z[3] * z[3]
        r2 = p[4] * sin(z[1]) + p[2] * sd * z[2] * z[2]
        det = p[0] * p[1] - (p[2] * cd) * (p[2] * cd)
        out[0] = z[2]
        out[1] = z[3]
        out[2] = (p[1] * r1 - p[2] * cd * r2) / det
        out[3] = (p[0] * r2 - p[2] * cd * r1) / det
    else:
        out[0] = -p[0] * z[0]


def rk4_integrate(str system_id, dict params, z0, double dt, int steps,
                  int substeps=1):
    """Sample ``steps`` states (initial included) of the chosen system.

    ``dt`` is the sampling interval; each sample is reached by ``substeps``
    RK4 steps of size dt/substeps. Returns (states, bad_step); bad_step is
    -1 on success, otherwise the index of the first non-finite sample.
    """
    cdef int sys_code
    cdef double pbuf[5]
    if system_id == "rossler":
        sys_code = SYS_ROSSLER
        pbuf[0] = params["a"]; pbuf[1] = params["b"]; pbuf[2] = params["c"]
    elif system_id == "lorenz63":
        sys_code = SYS_LORENZ
        pbuf[0] = params["sigma"]; pbuf[1] = params["rho"]; pbuf[2] = params["beta"]
    elif system_id == "double_pendulum":
        sys_code = SYS_PENDULUM
        pbuf[0] = params["m1"] * params["a1"] ** 2 + params["m2"] * params["l1"] ** 2 + params["I1"]
        pbuf[1] = params["m2"] * params["a2"] ** 2 + params["I2"]
        pbuf[2] = params["m2"] * params["l1"] * params["a2"]
        pbuf[3] = params["g"] * (params["m1"] * params["a1"] + params["m2"] * params["l1"])
        pbuf[4] = params["g"] * params["m2"] * params["a2"]
    elif system_id == "linear_test":
        sys_code = SYS_LINEAR
        pbuf[0] = params["rate"]
    else:
        raise ValueError(f"unknown system_id {system_id!r}")

    z0_arr = np.ascontiguousarray(z0, dtype=np.float64)
    cdef Py_ssize_t d = z0_arr.shape[0]
    if d > MAX_DIM:
        raise ValueError("state dimension too large for compiled kernel")
    out = np.empty((steps, d))
    cdef double[:, ::1] out_mv = out
    cdef double[::1] z0_mv = z0_arr
    cdef double state[MAX_DIM]
    cdef double k1[MAX_DIM]
    cdef double k2[MAX_DIM]
    cdef double k3[MAX_DIM]
    cdef double k4[MAX_DIM]
    cdef double tmp[MAX_DIM]
    cdef Py_ssize_t i, j, s
    cdef double h = dt / substeps
    cdef double h2 = 0.5 * h
    cdef double h6 = h / 6.0
    cdef int bad = -1
    cdef bint ok

    for j in range(d):
        state[j] = z0_mv[j]
        out_mv[0, j] = state[j]
    with nogil:
        for i in range(1, steps):
            ok = True
            for s in range(substeps):
                _rhs(sys_code, pbuf, state, k1)
                for j in range(d):
                    tmp[j] = state[j] + h2 * k1[j]
                _rhs(sys_code, pbuf, tmp, k2)
                for j in range(d):
                    tmp[j] = state[j] + h2 * k2[j]
                _rhs(sys_code, pbuf, tmp, k3)
                for j in range(d):
                    tmp[j] = state[j] + h * k3[j]
                _rhs(sys_code, pbuf, tmp, k4)
                for j in range(d):
                    state[j] = state[j] + h6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
                    if not isfinite(state[j]):
                        ok = False
            if not ok:
                bad = <int>i
                break
            for j in range(d):
                out_mv[i, j] = state[j]
    return out, bad


# ---------------------------------------------------------------------------
# Weiszfeld geometric median
# ---------------------------------------------------------------------------

cdef double _diameter(const double[:, ::1] pts) noexcept nogil:
    cdef Py_ssize_t k = pts.shape[0], m = pts.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double best = 0.0, acc, diff
    for i in range(k):
        for j in range(i + 1, k):
            acc = 0.0
            for c in range(m):
                diff = pts[i, c] - pts[j, c]
                acc += diff * diff
            if acc > best:
                best = acc
    return sqrt(best)


cdef double _risk_at(const double[:, ::1] pts, const double[::1] w,
                     const double* y) noexcept nogil:
    cdef Py_ssize_t k = pts.shape[0], m = pts.shape[1]
    cdef Py_ssize_t j, c
    cdef double total = 0.0, acc, diff
    for j in range(k):
        acc = 0.0
        for c in range(m):
            diff = pts[j, c] - y[c]
            acc += diff * diff
        total += w[j] * sqrt(acc)
    return total


cdef int _weiszfeld(const double[:, ::1] pts, const double[::1] w, double tol,
                    int max_iter, double* dbuf, double* y,
                    double* mhat_out, int* iters_out) noexcept nogil:
    """Core iteration; y must hold the start point. Returns 1 if converged."""
    cdef Py_ssize_t k = pts.shape[0], m = pts.shape[1]
    cdef Py_ssize_t j, c
    cdef double ynext[MAX_DIM]
    cdef double tcen[MAX_DIM]
    cdef double pull[MAX_DIM]
    cdef double acc, diff, w_anchor, inv, inv_sum, r, step, scale
    cdef Py_ssize_t best_anchor
    cdef double best_anchor_d
    cdef int iters = 0
    cdef bint converged = False, any_anchor, any_free

    if tol < 1e-30:
        tol = 1e-30
    while iters < max_iter:
        any_anchor = False
        any_free = False
        w_anchor = 0.0
        best_anchor = -1
        best_anchor_d = 0.0
        for j in range(k):
            acc = 0.0
            for c in range(m):
                diff = pts[j, c] - y[c]
                acc += diff * diff
            dbuf[j] = sqrt(acc)
            if dbuf[j] < tol:
                any_anchor = True
                w_anchor += w[j]
                if best_anchor < 0 or dbuf[j] < best_anchor_d:
                    best_anchor = j
                    best_anchor_d = dbuf[j]
            else:
                any_free = True
        if any_anchor:
            if not any_free:
                for c in range(m):
                    y[c] = pts[best_anchor, c]
                converged = True
                break
            inv_sum = 0.0
            for c in range(m):
                pull[c] = 0.0
                tcen[c] = 0.0
            for j in range(k):
                if dbuf[j] < tol:
                    continue
                inv = w[j] / dbuf[j]
                inv_sum += inv
                for c in range(m):
                    pull[c] += inv * (pts[j, c] - y[c])
                    tcen[c] += inv * pts[j, c]
            r = 0.0
            for c in range(m):
                r += pull[c] * pull[c]
            r = sqrt(r)
            if r <= w_anchor:
                for c in range(m):
                    y[c] = pts[best_anchor, c]
                converged = True
                break
            scale = 1.0 - w_anchor / r
            for c in range(m):
                ynext[c] = y[c] + scale * (tcen[c] / inv_sum - y[c])
        else:
            inv_sum = 0.0
            for c in range(m):
                tcen[c] = 0.0
            for j in range(k):
                inv = w[j] / dbuf[j]
                inv_sum += inv
                for c in range(m):
                    tcen[c] += inv * pts[j, c]
            for c in range(m):
                ynext[c] = tcen[c] / inv_sum
        step = 0.0
        for c in range(m):
            diff = ynext[c] - y[c]
            step += diff * diff
            y[c] = ynext[c]
        step = sqrt(step)
        iters += 1
        if step < tol:
            converged = True
            break
    mhat_out[0] = _risk_at(pts, w, y)
    iters_out[0] = iters
    return 1 if converged else 0


def weiszfeld_single(points, weights, double tol, int max_iter):
    """Weighted geometric median of one cloud; see the fallback docstring."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    wts = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t k = pts.shape[0], m = pts.shape[1]
    if m > MAX_DIM:
        from . import _kernels_py
        return _kernels_py.weiszfeld_single(pts, wts, tol, max_iter)
    cdef double[:, ::1] pts_mv = pts
    cdef double[::1] w_mv = wts
    if k == 1 or _diameter(pts_mv) == 0.0:
        return pts[0].copy(), 0.0, 0, True
    dbuf = np.empty(k)
    cdef double[::1] dbuf_mv = dbuf
    cdef double y[MAX_DIM]
    cdef Py_ssize_t c, j
    cdef double mhat = 0.0
    cdef int iters = 0, conv
    for c in range(m):
        y[c] = 0.0
    for j in range(k):
        for c in range(m):
            y[c] += w_mv[j] * pts_mv[j, c]
    conv = _weiszfeld(pts_mv, w_mv, tol, max_iter, &dbuf_mv[0], y, &mhat, &iters)
    out = np.empty(m)
    for c in range(m):
        out[c] = y[c]
    return out, float(mhat), int(iters), bool(conv)


def weiszfeld_batch(points, weights, double tol_rel, int max_iter):
    """Geometric medians of a stack of clouds (Q, k, m); see the fallback."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t q = pts.shape[0], k = pts.shape[1], m = pts.shape[2]
    if m > MAX_DIM:
        from . import _kernels_py
        return _kernels_py.weiszfeld_batch(pts, weights, tol_rel, max_iter)
    if weights is None:
        wts = np.full((q, k), 1.0 / k)
    else:
        wts = np.ascontiguousarray(weights, dtype=np.float64)
    medians = np.empty((q, m))
    costs = np.empty(q)
    iters = np.empty(q, dtype=np.int32)
    converged = np.empty(q, dtype=bool)
    dbuf = np.empty(k)
    cdef double[:, :, ::1] pts_mv = pts
    cdef double[:, ::1] w_mv = wts
    cdef double[:, ::1] med_mv = medians
    cdef double[::1] cost_mv = costs
    cdef int[::1] iter_mv = iters
    cdef char[::1] conv_mv = converged.view(np.int8)
    cdef double[::1] dbuf_mv = dbuf
    cdef double y[MAX_DIM]
    cdef Py_ssize_t i, j, c
    cdef double diam, mhat, tol
    cdef int it, conv
    with nogil:
        for i in range(q):
            diam = _diameter(pts_mv[i])
            if k == 1 or diam == 0.0:
                for c in range(m):
                    med_mv[i, c] = pts_mv[i, 0, c]
                cost_mv[i] = 0.0
                iter_mv[i] = 0
                conv_mv[i] = 1
                continue
            tol = tol_rel * diam
            for c in range(m):
                y[c] = 0.0
            for j in range(k):
                for c in range(m):
                    y[c] += w_mv[i, j] * pts_mv[i, j, c]
            conv = _weiszfeld(pts_mv[i], w_mv[i], tol, max_iter,
                              &dbuf_mv[0], y, &mhat, &it)
            for c in range(m):
                med_mv[i, c] = y[c]
            cost_mv[i] = mhat
            iter_mv[i] = it
            conv_mv[i] = <char>conv
    return medians, costs, iters, converged
