"""Analytic Jacobian machinery for the Rossler differential embeddings.

Hand-derived closed forms for det DF and its gradient over the catalog of
three-component reconstructions, singular-set classification, and the
stretching/curvature proxy fields. Only this embedding family is hard-coded;
everything else raises.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import SystemParams, Trajectory, lie_derivatives, rossler_derivative_gradients
from .embedding import EmbeddingSpec

DIFFEOMORPHISM = "diffeomorphism"
PURE_TRANSVERSE = "pure_transverse"
DEGENERATE_FOLD = "degenerate_fold"


@dataclass(frozen=True)
class SingularClass:
    """Classification of a reconstruction's singular set on a sample."""

    cls: str
    singular_set_description: str
    srb_mass_near_sigma: float

    def __post_init__(self):
        if not 0.0 <= self.srb_mass_near_sigma <= 1.0:
            raise ValueError("srb_mass_near_sigma must lie in [0, 1]")


@dataclass(frozen=True)
class CatalogEntry:
    key: str
    spec: EmbeddingSpec
    det: Callable
    grad: Callable
    classify: Callable
    singular_desc: Callable


def _abc(params: SystemParams):
    p = params.params
    return p["a"], p["b"], p["c"]


def _entry(key, pairs, det, grad, classify, singular_desc, name):
    spec = EmbeddingSpec.components(pairs, kind="differential_analytic", name=name)
    return CatalogEntry(key=key, spec=spec, det=det, grad=grad,
                        classify=classify, singular_desc=singular_desc)


def _const_det(value):
    def det(params, Z):
        return np.full(Z.shape[0], float(value))

    def grad(params, Z):
        return np.zeros_like(Z)

    return det, grad


def _det_d_z1(params, Z):
    a, _, c = _abc(params)
    return Z[:, 0] - (a + c)


def _grad_d_z1(params, Z):
    g = np.zeros_like(Z)
    g[:, 0] = 1.0
    return g


def _det_d_z3(params, Z):
    return -Z[:, 2] ** 2


def _grad_d_z3(params, Z):
    g = np.zeros_like(Z)
    g[:, 2] = -2.0 * Z[:, 2]
    return g


def _det_d_z1p2(params, Z):
    a, _, c = _abc(params)
    return (2.0 - a) * Z[:, 0] + Z[:, 2] + (a * a + a * c - 3.0 * a - 2.0 * c + 2.0)


def _grad_d_z1p2(params, Z):
    a, _, _ = _abc(params)
    g = np.zeros_like(Z)
    g[:, 0] = 2.0 - a
    g[:, 2] = 1.0
    return g


def _det_d_z1p3(params, Z):
    a, b, c = _abc(params)
    z1, z2, z3 = Z[:, 0], Z[:, 1], Z[:, 2]
    return (-a * c + a * z1 - a * z3 - a + b - c * c + 2.0 * c * z1
            - 3.0 * c * z3 - c - z1 * z1 + 3.0 * z1 * z3 + z1 + z2
            - z3 * z3 - 1.0)


def _grad_d_z1p3(params, Z):
    a, _, c = _abc(params)
    z1, z3 = Z[:, 0], Z[:, 2]
    g = np.empty_like(Z)
    g[:, 0] = a + 2.0 * c + 1.0 - 2.0 * z1 + 3.0 * z3
    g[:, 1] = 1.0
    g[:, 2] = -(a + 3.0 * c) + 3.0 * z1 - 2.0 * z3
    return g


def _det_d_z2p3(params, Z):
    a, b, c = _abc(params)
    z1, z2, z3 = Z[:, 0], Z[:, 1], Z[:, 2]
    s = z1 - (a + c)
    return (z3 * s * s + (a + b + 2.0 * c) * z1 - z1 * z1 + z2 * (1.0 + z3)
            + z3 * z3 + z3 - (a * b + a * c + b * c + c * c))


def _grad_d_z2p3(params, Z):
    a, b, c = _abc(params)
    z1, z2, z3 = Z[:, 0], Z[:, 1], Z[:, 2]
    s = z1 - (a + c)
    g = np.empty_like(Z)
    g[:, 0] = (a + b + 2.0 * c) - 2.0 * z1 + 2.0 * z3 * s
    g[:, 1] = 1.0 + z3
    g[:, 2] = s * s + z2 + 2.0 * z3 + 1.0
    return g


def _det_mv_dz3(params, Z):
    return Z[:, 2].copy()


def _grad_mv_dz3(params, Z):
    g = np.zeros_like(Z)
    g[:, 2] = 1.0
    return g


_det1, _grad0 = _const_det(1.0)
_detm1, _ = _const_det(-1.0)
_det0, _ = _const_det(0.0)


def _cls_d_z2p3(params):
    # det and grad vanish together at (a+c, 1, -1) exactly when a == b
    a, b, _ = _abc(params)
    return DEGENERATE_FOLD if abs(a - b) < 1e-12 else PURE_TRANSVERSE


CATALOG: dict[str, CatalogEntry] = {}
for _e in [
    _entry("d_z2", [(2, 0), (2, 1), (2, 2)], _det1, _grad0,
           lambda p: DIFFEOMORPHISM, lambda p: "empty (det = 1 everywhere)",
           "(z2, z2', z2'')"),
    _entry("mv_z1_z2_dz1", [(1, 0), (2, 0), (1, 1)], _detm1, _grad0,
           lambda p: DIFFEOMORPHISM, lambda p: "empty (det = -1 everywhere)",
           "(z1, z2, z1')"),
    _entry("d_z1p2", [((1, 1, 0), 0), ((1, 1, 0), 1), ((1, 1, 0), 2)],
           _det_d_z1p2, _grad_d_z1p2, lambda p: PURE_TRANSVERSE,
           lambda p: ("plane (2-a)*z1 + z3 = 2*c + 3*a - a*c - a^2 - 2; "
                      "gradient (2-a, 0, 1) never vanishes"),
           "(z1+z2, (z1+z2)', (z1+z2)'')"),
    _entry("d_z1", [(1, 0), (1, 1), (1, 2)], _det_d_z1, _grad_d_z1,
           lambda p: PURE_TRANSVERSE,
           lambda p: (f"plane z1 = a + c = {p.params['a'] + p.params['c']:g}; "
                      "gradient (1, 0, 0) never vanishes"),
           "(z1, z1', z1'')"),
    _entry("d_z2p3", [((0, 1, 1), 0), ((0, 1, 1), 1), ((0, 1, 1), 2)],
           _det_d_z2p3, _grad_d_z2p3, _cls_d_z2p3,
           lambda p: ("quadric z3*(z1-(a+c))^2 + (a+b+2c)*z1 - z1^2 + "
                      "z2*(1+z3) + z3^2 + z3 = ab+ac+bc+c^2; degenerate "
                      "point (a+c, 1, -1) when a = b"),
           "(z2+z3, (z2+z3)', (z2+z3)'')"),
    _entry("d_z1p3", [((1, 0, 1), 0), ((1, 0, 1), 1), ((1, 0, 1), 2)],
           _det_d_z1p3, _grad_d_z1p3, lambda p: PURE_TRANSVERSE,
           lambda p: ("quadric det = 0 with gradient second component "
                      "identically 1, so no degenerate points"),
           "(z1+z3, (z1+z3)', (z1+z3)'')"),
    _entry("mv_z1_z3_dz1", [(1, 0), (3, 0), (1, 1)], _det1, _grad0,
           lambda p: DIFFEOMORPHISM, lambda p: "empty (det = 1 everywhere)",
           "(z1, z3, z1')"),
    _entry("mv_z2_z3_dz2", [(2, 0), (3, 0), (2, 1)], _det1, _grad0,
           lambda p: DIFFEOMORPHISM, lambda p: "empty (det = 1 everywhere)",
           "(z2, z3, z2')"),
    _entry("mv_z2_z3_dz3", [(2, 0), (3, 0), (3, 1)], _det_mv_dz3, _grad_mv_dz3,
           lambda p: PURE_TRANSVERSE,
           lambda p: "plane z3 = 0; gradient (0, 0, 1) never vanishes",
           "(z2, z3, z3')"),
    _entry("d_z3", [(3, 0), (3, 1), (3, 2)], _det_d_z3, _grad_d_z3,
           lambda p: DEGENERATE_FOLD,
           lambda p: "plane z3 = 0, on which the gradient (0, 0, -2*z3) "
                     "also vanishes",
           "(z3, z3', z3'')"),
    _entry("mv_z1_z2_dz2", [(1, 0), (2, 0), (2, 1)], _det0, _grad0,
           lambda p: DEGENERATE_FOLD,
           lambda p: "all of R^3: z2' is a linear function of (z1, z2), so "
                     "det = 0 and its gradient vanish everywhere",
           "(z1, z2, z2')"),
]:
    CATALOG[_e.key] = _e

# The ten-embedding comparison family (mv_z1_z2_dz2 is rank-deficient and
# kept out of ranked comparisons).
STANDARD_EMBEDDINGS = [
    "d_z2", "mv_z1_z2_dz1", "d_z1p2", "d_z1", "d_z2p3", "d_z1p3",
    "mv_z1_z3_dz1", "mv_z2_z3_dz2", "mv_z2_z3_dz3", "d_z3",
]


def catalog_spec(key: str) -> EmbeddingSpec:
    return CATALOG[key].spec


def _lookup(spec: EmbeddingSpec) -> CatalogEntry:
    if spec.kind not in ("differential_analytic", "multivariate"):
        raise ValueError("only analytic differential embeddings are supported")
    pairs = spec.component_pairs()
    for entry in CATALOG.values():
        if entry.spec.component_pairs() == pairs:
            return entry
    raise ValueError(f"embedding {spec.display()} has no hand-derived "
                     "determinant in the catalog")


def det_DF(spec: EmbeddingSpec, z, params: SystemParams | None = None) -> float:
    """Closed-form Jacobian determinant of the reconstruction map at z."""
    params = params or SystemParams("rossler")
    entry = _lookup(spec)
    Z = np.asarray(z, dtype=float).reshape(1, 3)
    return float(entry.det(params, Z)[0])


def grad_det_DF(spec: EmbeddingSpec, z, params: SystemParams | None = None) -> np.ndarray:
    """Closed-form gradient of det DF at z."""
    params = params or SystemParams("rossler")
    entry = _lookup(spec)
    Z = np.asarray(z, dtype=float).reshape(1, 3)
    return entry.grad(params, Z)[0]


def det_DF_field(spec: EmbeddingSpec, Z: np.ndarray,
                 params: SystemParams | None = None) -> np.ndarray:
    """Vectorized det DF over a sample of latent states."""
    params = params or SystemParams("rossler")
    entry = _lookup(spec)
    return entry.det(params, np.asarray(Z, dtype=float))


def analytic_jacobian(spec: EmbeddingSpec, Z: np.ndarray,
                      params: SystemParams | None = None) -> np.ndarray:
    """Exact DF(z) for any analytic component list, shape (N, m, 3).

    Rows are gradients of the component observables' derivative chains,
    assembled by the forward-mode recursion in the dynamics module.
    """
    params = params or SystemParams("rossler")
    if params.system_id != "rossler":
        raise ValueError("analytic Jacobians are only available for rossler")
    Z = np.asarray(Z, dtype=float)
    single = Z.ndim == 1
    if single:
        Z = Z[None, :]
    max_order = max(spec.derivative_orders)
    grads = rossler_derivative_gradients(params, Z, max_order)
    rows = []
    for obs, order in spec.component_pairs():
        if isinstance(obs, int):
            rows.append(grads[order][:, obs - 1, :])
        else:
            w = np.asarray(obs, dtype=float)
            rows.append(np.einsum("c,ncj->nj", w, grads[order]))
    J = np.stack(rows, axis=1)
    return J[0] if single else J


def classify_embedding(spec: EmbeddingSpec, attractor_sample: Trajectory,
                       eps_sigma: float = 0.05,
                       params: SystemParams | None = None) -> SingularClass:
    """Analytic singular-set class plus the sample mass near the set.

    The class comes from the hand-derived determinant and gradient (not from
    numeric root finding); the near-singular mass is the fraction of samples
    with |det DF| below eps_sigma times the sample median of |det DF|.
    """
    params = params or SystemParams("rossler")
    entry = _lookup(spec)
    dets = np.abs(entry.det(params, attractor_sample.states))
    med = float(np.median(dets))
    if med == 0.0:
        mass = float(np.mean(dets == 0.0))
    else:
        mass = float(np.mean(dets < eps_sigma * med))
    return SingularClass(cls=entry.classify(params),
                         singular_set_description=entry.singular_desc(params),
                         srb_mass_near_sigma=mass)


def stretching_proxy(spec: EmbeddingSpec, z,
                     params: SystemParams | None = None) -> float:
    """Smallest singular value of the analytic Jacobian DF at z."""
    J = analytic_jacobian(spec, np.asarray(z, dtype=float), params)
    return float(np.linalg.svd(J, compute_uv=False)[-1])


def stretching_field(spec: EmbeddingSpec, Z: np.ndarray,
                     params: SystemParams | None = None) -> np.ndarray:
    J = analytic_jacobian(spec, Z, params)
    return np.linalg.svd(J, compute_uv=False)[:, -1]


def curvature_proxy(params: SystemParams, z) -> float:
    """Trajectory curvature of the first-coordinate derivative chain.

    kappa = |V x A| / |V|^3 with V the (1st..3rd) and A the (2nd..4th) time
    derivatives of z1. Returns inf (flagged) when |V| is below 1e-12.
    """
    d = lie_derivatives(params, z, coord=1, max_order=4)
    V = d[1:4]
    A = d[2:5]
    nv = float(np.linalg.norm(V))
    if nv < 1e-12:
        return float("inf")
    return float(np.linalg.norm(np.cross(V, A)) / nv ** 3)


def curvature_field(params: SystemParams, Z: np.ndarray) -> np.ndarray:
    from .dynamics import rossler_time_derivatives

    d = rossler_time_derivatives(params, Z, 4)
    V = d[1:4, :, 0].T
    A = d[2:5, :, 0].T
    nv = np.linalg.norm(V, axis=1)
    out = np.full(Z.shape[0], np.inf)
    ok = nv >= 1e-12
    out[ok] = np.linalg.norm(np.cross(V[ok], A[ok]), axis=1) / nv[ok] ** 3
    return out
