"""Benchmark dynamical systems, fixed-step RK4 integration, and tangent growth.

Systems are identified by a short id and carry their parameters in a plain
mapping, so trajectories can be regenerated from a config echo alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import kernels

SYSTEM_DIMS = {
    "rossler": 3,
    "lorenz63": 3,
    "double_pendulum": 4,
    "linear_test": 1,
}

_DEFAULT_PARAMS = {
    "rossler": {"a": 0.2, "b": 0.2, "c": 5.7},
    "lorenz63": {"sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0},
    # Uniform rods of unit mass/length, pivoted at the ends.
    "double_pendulum": {
        "m1": 1.0, "m2": 1.0, "l1": 1.0, "l2": 1.0,
        "a1": 0.5, "a2": 0.5, "I1": 1.0 / 12.0, "I2": 1.0 / 12.0,
        "g": 9.81,
    },
    "linear_test": {"rate": 1.0},
}


class DivergenceError(RuntimeError):
    """Raised when integration produces a non-finite state."""

    def __init__(self, step: int):
        super().__init__(f"non-finite state encountered at step {step}")
        self.step = step


@dataclass(frozen=True)
class SystemParams:
    """A benchmark system together with its named parameters."""

    system_id: str
    params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.system_id not in SYSTEM_DIMS:
            raise ValueError(f"unknown system_id {self.system_id!r}")
        merged = dict(_DEFAULT_PARAMS[self.system_id])
        for key, value in dict(self.params).items():
            if key not in merged:
                raise ValueError(f"unknown parameter {key!r} for {self.system_id}")
            merged[key] = float(value)
        if not all(math.isfinite(v) for v in merged.values()):
            raise ValueError("system parameters must be finite")
        object.__setattr__(self, "params", merged)

    @property
    def dim(self) -> int:
        return SYSTEM_DIMS[self.system_id]

    def to_dict(self) -> dict:
        return {"system_id": self.system_id, "params": dict(self.params)}


@dataclass
class Trajectory:
    """Uniformly sampled state sequence: row t is the state at t0 + t*dt."""

    dt: float
    t0: float
    states: np.ndarray

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim == 1:
            self.states = self.states[:, None]
        if self.states.shape[0] < 1:
            raise ValueError("trajectory must contain at least one sample")
        if not np.isfinite(self.states).all():
            raise ValueError("trajectory states must be finite")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))


def vector_field(params: SystemParams, z) -> np.ndarray:
    """Right-hand side f(z) of the chosen system.

    Accepts real or complex input (complex-step differentiation relies on
    the latter); the pendulum mass matrix is inverted explicitly.
    """
    z = np.asarray(z)
    if z.shape != (params.dim,):
        raise ValueError(f"state dimension {z.shape} does not match {params.dim}")
    p = params.params
    if params.system_id == "rossler":
        a, b, c = p["a"], p["b"], p["c"]
        return np.array([-z[1] - z[2], z[0] + a * z[1], b + z[2] * (z[0] - c)])
    if params.system_id == "lorenz63":
        s, r, beta = p["sigma"], p["rho"], p["beta"]
        return np.array([s * (z[1] - z[0]), z[0] * (r - z[2]) - z[1],
                         z[0] * z[1] - beta * z[2]])
    if params.system_id == "linear_test":
        return np.array([-p["rate"] * z[0]])
    # double pendulum: state (th1, th2, w1, w2); Euler-Lagrange equations with
    # angles measured from the vertical axis, mass matrix solved for the
    # angular accelerations.
    th1, th2, w1, w2 = z
    A = p["m1"] * p["a1"] ** 2 + p["m2"] * p["l1"] ** 2 + p["I1"]
    B = p["m2"] * p["a2"] ** 2 + p["I2"]
    C = p["m2"] * p["l1"] * p["a2"]
    G1 = p["g"] * (p["m1"] * p["a1"] + p["m2"] * p["l1"])
    G2 = p["g"] * p["m2"] * p["a2"]
    delta = th1 - th2
    cd, sd = np.cos(delta), np.sin(delta)
    rhs1 = G1 * np.sin(th1) - C * sd * w2 ** 2
    rhs2 = G2 * np.sin(th2) + C * sd * w1 ** 2
    det = A * B - (C * cd) ** 2
    if abs(det) < 1e-12:
        raise ValueError("singular pendulum mass matrix")
    acc1 = (B * rhs1 - C * cd * rhs2) / det
    acc2 = (A * rhs2 - C * cd * rhs1) / det
    return np.array([w1, w2, acc1, acc2])


def jacobian_field(params: SystemParams, z) -> np.ndarray:
    """Jacobian Df(z); analytic where cheap, complex-step for the pendulum."""
    z = np.asarray(z, dtype=float)
    p = params.params
    if params.system_id == "rossler":
        a, c = p["a"], p["c"]
        return np.array([[0.0, -1.0, -1.0],
                         [1.0, a, 0.0],
                         [z[2], 0.0, z[0] - c]])
    if params.system_id == "lorenz63":
        s, r, beta = p["sigma"], p["rho"], p["beta"]
        return np.array([[-s, s, 0.0],
                         [r - z[2], -1.0, -z[0]],
                         [z[1], z[0], -beta]])
    if params.system_id == "linear_test":
        return np.array([[-p["rate"]]])
    d = params.dim
    J = np.empty((d, d))
    h = 1e-200
    for j in range(d):
        zc = z.astype(complex)
        zc[j] += 1j * h
        J[:, j] = vector_field(params, zc).imag / h
    return J


def integrate_rk4(params: SystemParams, z0, dt: float, steps: int,
                  discard: int = 0, substeps: int = 1) -> Trajectory:
    """Classical fixed-step RK4 sampling of the flow.

    ``steps`` counts output samples including the initial state; the first
    ``discard`` samples are dropped for transient removal, so the result has
    ``steps - discard`` rows and starts at time ``discard * dt``. ``dt`` is
    the sampling interval; ``substeps`` internal RK4 steps of size
    dt/substeps separate consecutive samples (1 = plain RK4 at dt).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not 0 <= discard < steps:
        raise ValueError("discard must satisfy 0 <= discard < steps")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    z0 = np.asarray(z0, dtype=float).reshape(-1)
    if z0.shape != (params.dim,):
        raise ValueError(f"initial state dimension {z0.shape} does not match {params.dim}")
    states, bad_step = kernels.rk4_integrate(
        params.system_id, params.params, z0, float(dt), int(steps), int(substeps))
    if bad_step >= 0:
        raise DivergenceError(bad_step)
    return Trajectory(dt=float(dt), t0=discard * float(dt), states=states[discard:])


def lie_derivatives(params: SystemParams, z, coord: int, max_order: int) -> np.ndarray:
    """Successive time derivatives (h, dh/dt, ...) of a Rossler coordinate.

    The recursion differentiates the governing equations directly (Leibniz
    rule on the single quadratic term), so every order is an exact polynomial
    evaluation rather than a finite-difference estimate.
    """
    if params.system_id != "rossler":
        raise ValueError("analytic derivative chains are only available for rossler")
    if coord not in (1, 2, 3):
        raise ValueError("coord must be 1, 2 or 3")
    if not 0 <= max_order <= 4:
        raise ValueError("max_order must be between 0 and 4")
    z = np.asarray(z, dtype=float)
    derivs = rossler_time_derivatives(params, z[None, :], max_order)
    return derivs[:, 0, coord - 1].copy()


def rossler_time_derivatives(params: SystemParams, Z: np.ndarray,
                             max_order: int) -> np.ndarray:
    """Time derivatives of all three Rossler coordinates along the flow.

    Returns an array d of shape (max_order+1, N, 3) with d[k, i, j] the k-th
    time derivative of z_{j+1} at sample i. Vectorized over samples.
    """
    p = params.params
    a, b, c = p["a"], p["b"], p["c"]
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    d = np.empty((max_order + 1, n, 3))
    d[0] = Z
    for k in range(max_order):
        # z1' = -z2 - z3 ; z2' = z1 + a z2 ; z3' = b + z1 z3 - c z3
        d[k + 1, :, 0] = -d[k, :, 1] - d[k, :, 2]
        d[k + 1, :, 1] = d[k, :, 0] + a * d[k, :, 1]
        prod = np.zeros(n)
        for j in range(k + 1):
            prod += math.comb(k, j) * d[j, :, 0] * d[k - j, :, 2]
        d[k + 1, :, 2] = prod - c * d[k, :, 2]
        if k == 0:
            d[k + 1, :, 2] += b
    return d


def rossler_derivative_gradients(params: SystemParams, Z: np.ndarray,
                                 max_order: int) -> np.ndarray:
    """Gradients (w.r.t. the state) of the Rossler derivative chain.

    Returns g of shape (max_order+1, N, 3, 3) with g[k, i, j, :] the gradient
    of the k-th time derivative of z_{j+1}; forward-mode companion of
    :func:`rossler_time_derivatives`, exact to machine precision.
    """
    p = params.params
    a, c = p["a"], p["c"]
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    d = rossler_time_derivatives(params, Z, max_order)
    g = np.zeros((max_order + 1, n, 3, 3))
    g[0, :, 0, 0] = 1.0
    g[0, :, 1, 1] = 1.0
    g[0, :, 2, 2] = 1.0
    for k in range(max_order):
        g[k + 1, :, 0] = -g[k, :, 1] - g[k, :, 2]
        g[k + 1, :, 1] = g[k, :, 0] + a * g[k, :, 1]
        acc = np.zeros((n, 3))
        for j in range(k + 1):
            w = math.comb(k, j)
            acc += w * (g[j, :, 0] * d[k - j, :, 2, None]
                        + d[j, :, 0, None] * g[k - j, :, 2])
        g[k + 1, :, 2] = acc - c * g[k, :, 2]
    return g


def tangent_growth(params: SystemParams, z0, n: int, dt: float,
                   substeps: int = 1) -> float:
    """Largest singular value of the n-step tangent map along the flow.

    Integrates the variational equations dM/dt = Df(z) M jointly with the
    state by RK4 (``substeps`` internal steps per sample, as in
    integrate_rk4) and returns sigma_max of the accumulated map, the
    finite-time expansion proxy used for Pesin-style filtering.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    d = params.dim
    z = np.asarray(z0, dtype=float).reshape(d)
    M = np.eye(d)

    def rhs(state):
        zz = state[:d]
        MM = state[d:].reshape(d, d)
        dz = vector_field(params, zz)
        dM = jacobian_field(params, zz) @ MM
        return np.concatenate([dz, dM.ravel()])

    h = dt / substeps
    y = np.concatenate([z, M.ravel()])
    for step in range(n * substeps):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * h * k1)
        k3 = rhs(y + 0.5 * h * k2)
        k4 = rhs(y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.isfinite(y).all():
            raise DivergenceError(step // substeps)
    M = y[d:].reshape(d, d)
    return float(np.linalg.svd(M, compute_uv=False)[0])
