"""Reconstruction-space states from observables.

Supports backward delay embedding, analytic differential embedding of the
Rossler system (exact derivative chains), Savitzky-Golay numeric differential
embedding, elementwise signal transforms, and a small PCA for plot exports.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import savgol_filter

from .dynamics import SystemParams, Trajectory, rossler_time_derivatives

_KINDS = ("delay", "differential_analytic", "differential_numeric", "multivariate")


def _normalize_observable(obs):
    if isinstance(obs, (int, np.integer)):
        return int(obs)
    if isinstance(obs, str):
        return obs
    weights = tuple(float(w) for w in obs)
    return weights


@dataclass(frozen=True)
class EmbeddingSpec:
    """Declarative description of a reconstruction map.

    ``observables`` holds one entry per component: a 1-based coordinate
    index, or a tuple of linear-combination weights over the latent
    coordinates. Delay embeddings use a single observable with lag ``tau``
    (in samples); differential embeddings pair each observable with a
    derivative order.
    """

    kind: str
    observables: tuple = (1,)
    m: int = 3
    tau: int | None = None
    derivative_orders: tuple | None = None
    savgol_window: int = 21
    savgol_polyorder: int = 5
    name: str | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown embedding kind {self.kind!r}")
        object.__setattr__(
            self, "observables",
            tuple(_normalize_observable(o) for o in self.observables))
        if self.m < 1:
            raise ValueError("embedding dimension m must be >= 1")
        if self.kind == "delay":
            if self.tau is None or self.tau < 1:
                raise ValueError("delay embeddings require tau >= 1 samples")
            if len(self.observables) != 1:
                raise ValueError("delay embeddings use a single observable")
        else:
            orders = self.derivative_orders
            if orders is None or len(orders) != self.m:
                raise ValueError("differential embeddings need one derivative "
                                 "order per component")
            object.__setattr__(self, "derivative_orders",
                               tuple(int(o) for o in orders))
            if len(self.observables) != self.m:
                raise ValueError("component list length must equal m")
            if self.kind == "differential_numeric":
                if max(self.derivative_orders) > 3:
                    raise ValueError("numeric differentiation supports orders <= 3")
                if self.savgol_window % 2 != 1:
                    raise ValueError("smoothing window must be odd")
                if self.savgol_polyorder < max(self.derivative_orders):
                    raise ValueError("polynomial order below requested derivative")

    @staticmethod
    def delay(m: int, tau: int, observable=1, name: str | None = None) -> "EmbeddingSpec":
        return EmbeddingSpec(kind="delay", observables=(observable,), m=m,
                             tau=tau, name=name)

    @staticmethod
    def derivative_chain(observable, max_order: int,
                         kind: str = "differential_analytic",
                         name: str | None = None) -> "EmbeddingSpec":
        """(h, dh/dt, ..., d^max h/dt^max) built from one observable."""
        m = max_order + 1
        return EmbeddingSpec(kind=kind, observables=(observable,) * m, m=m,
                             derivative_orders=tuple(range(m)), name=name)

    @staticmethod
    def components(pairs: Sequence[tuple], kind: str = "multivariate",
                   name: str | None = None) -> "EmbeddingSpec":
        """Mixed components given as (observable, derivative order) pairs."""
        obs = tuple(p[0] for p in pairs)
        orders = tuple(int(p[1]) for p in pairs)
        return EmbeddingSpec(kind=kind, observables=obs, m=len(pairs),
                             derivative_orders=orders, name=name)

    def component_pairs(self) -> tuple:
        return tuple(zip(self.observables, self.derivative_orders))

    def display(self) -> str:
        if self.name:
            return self.name
        if self.kind == "delay":
            return f"delay(m={self.m}, tau={self.tau})"
        parts = []
        for obs, order in self.component_pairs():
            base = f"z{obs}" if isinstance(obs, int) else _combo_label(obs)
            parts.append(base + "'" * order)
        return "(" + ", ".join(parts) + ")"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "observables": [list(o) if isinstance(o, tuple) else o
                            for o in self.observables],
            "m": self.m,
            "tau": self.tau,
            "derivative_orders": (list(self.derivative_orders)
                                  if self.derivative_orders else None),
            "savgol_window": self.savgol_window,
            "savgol_polyorder": self.savgol_polyorder,
            "name": self.name,
        }

    @staticmethod
    def from_dict(data: dict) -> "EmbeddingSpec":
        obs = tuple(tuple(o) if isinstance(o, list) else o
                    for o in data["observables"])
        orders = data.get("derivative_orders")
        return EmbeddingSpec(
            kind=data["kind"], observables=obs, m=data["m"],
            tau=data.get("tau"),
            derivative_orders=tuple(orders) if orders else None,
            savgol_window=data.get("savgol_window", 21),
            savgol_polyorder=data.get("savgol_polyorder", 5),
            name=data.get("name"))


def _combo_label(weights: tuple) -> str:
    terms = []
    for i, w in enumerate(weights):
        if w == 0:
            continue
        coef = "" if w == 1 else f"{w:g}*"
        terms.append(f"{coef}z{i + 1}")
    return "+".join(terms) if terms else "0"


@dataclass
class ReconstructedStates:
    """Reconstruction-space states with their latent alignment.

    Row ``i`` represents latent sample ``i + sample_offset`` of the source
    series/trajectory, which is what the supervised diagnostics rely on.
    """

    states: np.ndarray
    sample_offset: int
    dt: float
    spec: EmbeddingSpec
    _tree_cache: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2:
            raise ValueError("states must be a 2-D matrix")
        if not np.isfinite(self.states).all():
            raise ValueError("reconstructed states must be finite")

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return self.states.shape[1]


def delay_embed(series, m: int, tau: int, dt: float = 1.0) -> ReconstructedStates:
    """Backward delay vectors (y_t, y_{t-tau}, ..., y_{t-(m-1)tau}).

    Row i corresponds to latent sample i + (m-1)*tau; the output has
    T - (m-1)*tau rows.
    """
    series = np.asarray(series, dtype=float).reshape(-1)
    t_total = series.shape[0]
    span = (m - 1) * tau if m > 1 else 0
    if m > 1 and tau < 1:
        raise ValueError("tau must be >= 1 sample")
    if t_total <= span:
        raise ValueError(
            f"series of length {t_total} too short for m={m}, tau={tau} "
            f"(needs > {span})")
    n = t_total - span
    cols = [series[span - j * tau: span - j * tau + n] for j in range(m)]
    states = np.column_stack(cols)
    spec = EmbeddingSpec.delay(m=m, tau=max(tau, 1))
    return ReconstructedStates(states=states, sample_offset=span, dt=dt, spec=spec)


def _observable_series(traj: Trajectory, obs) -> np.ndarray:
    if isinstance(obs, int):
        if not 1 <= obs <= traj.states.shape[1]:
            raise ValueError(f"coordinate {obs} outside trajectory dimension")
        return traj.states[:, obs - 1]
    weights = np.asarray(obs, dtype=float)
    if weights.shape[0] != traj.states.shape[1]:
        raise ValueError("combination weights must match trajectory dimension")
    return traj.states @ weights


def _observable_weights(obs, dim: int = 3) -> np.ndarray:
    if isinstance(obs, int):
        w = np.zeros(dim)
        w[obs - 1] = 1.0
        return w
    w = np.asarray(obs, dtype=float)
    if w.shape[0] != dim:
        raise ValueError("combination weights must have one entry per coordinate")
    return w


def differential_embed(traj: Trajectory, spec: EmbeddingSpec,
                       params: SystemParams | None = None) -> ReconstructedStates:
    """Differential reconstruction of a trajectory.

    Analytic kinds evaluate the exact Rossler derivative chains per sample
    (sample_offset 0). The numeric kind estimates derivatives by
    Savitzky-Golay smoothing differentiation and trims half a window from
    each end, setting sample_offset to the trim.
    """
    if spec.kind == "delay":
        raise ValueError("use delay_embed for delay reconstructions")
    if spec.kind in ("differential_analytic", "multivariate"):
        params = params or SystemParams("rossler")
        if params.system_id != "rossler":
            raise ValueError("analytic differential embeddings are only "
                             "available for rossler")
        max_order = max(spec.derivative_orders)
        derivs = rossler_time_derivatives(params, traj.states, max_order)
        cols = []
        for obs, order in spec.component_pairs():
            w = _observable_weights(obs)
            cols.append(derivs[order] @ w)
        return ReconstructedStates(states=np.column_stack(cols),
                                   sample_offset=0, dt=traj.dt, spec=spec)
    # numeric
    window = spec.savgol_window
    half = window // 2
    t_total = len(traj)
    if t_total < window:
        raise ValueError(f"series of length {t_total} shorter than smoothing "
                         f"window {window}")
    cols = []
    for obs, order in spec.component_pairs():
        series = _observable_series(traj, obs)
        smoothed = savgol_filter(series, window, spec.savgol_polyorder,
                                 deriv=order, delta=traj.dt)
        cols.append(smoothed[half:t_total - half])
    states = np.column_stack(cols)
    return ReconstructedStates(states=states, sample_offset=half, dt=traj.dt,
                               spec=spec)


def transform_series(series, transform: str) -> np.ndarray:
    """Elementwise signal transform: 'identity' or 'log1p'."""
    series = np.asarray(series, dtype=float)
    if transform == "identity":
        return series.copy()
    if transform == "log1p":
        if (series < 0).any():
            raise ValueError("log1p transform requires a nonnegative series")
        return np.log1p(series)
    raise ValueError(f"unknown transform {transform!r}")


def pca3(states) -> np.ndarray:
    """Project onto the top-3 principal directions (mean-centered).

    Components are ordered by descending variance and sign-fixed so each
    component's largest-magnitude loading is positive. Rank-deficient data
    yields zero-filled trailing components and a warning.
    """
    X = states.states if isinstance(states, ReconstructedStates) else np.asarray(states, dtype=float)
    n, m = X.shape
    if m < 3 or n < 3:
        raise ValueError("pca3 requires at least 3 samples of dimension >= 3")
    Xc = X - X.mean(axis=0)
    _, svals, vt = np.linalg.svd(Xc, full_matrices=False)
    rank = int((svals > svals[0] * 1e-12).sum()) if svals[0] > 0 else 0
    comps = np.zeros((3, m))
    take = min(3, rank)
    comps[:take] = vt[:take]
    for i in range(take):
        j = int(np.argmax(np.abs(comps[i])))
        if comps[i, j] < 0:
            comps[i] = -comps[i]
    if rank < 3:
        warnings.warn(f"pca3 input has rank {rank} < 3; trailing components "
                      "set to zero", RuntimeWarning, stacklevel=2)
    return Xc @ comps.T
