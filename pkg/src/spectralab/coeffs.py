"""Coefficient fields (drift function and diffusion tensor) and the
geometric constants entering the eigenvalue bounds.

A coefficient field carries the drift eta and the symmetric positive
definite tensor T together with the derived quantities the bounds need:
grad(eta), tr(nabla T), and div(T^2 grad(eta)).  Presets provide these
analytically; a finite-difference fallback exists for user-defined fields
and is markedly less accurate.

The constants are

    epsilon, delta : tightest sampled bracket on the eigenvalues of T,
    T0   = sup |tr(nabla T)|,
    eta0 = sup |grad eta|,
    H0   = sup |H_T|,
    C0   = sup { div(T^2 grad eta)/2 - |T grad eta|^2/4 },

with suprema estimated over mesh vertices and quadrature points (clamped
to the closed domain) and no hidden safety inflation; the sample count is
recorded so the estimation can be judged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .domain import DomainSpec, ImmersionData, Mesh, clamp_to_domain, element_quadrature

__all__ = [
    "CoefficientField",
    "GeometricConstants",
    "SpdViolationError",
    "preset",
    "preset_catalog",
    "compute_constants",
    "from_callables",
    "symmetric_eig_bounds",
]


class SpdViolationError(ValueError):
    """The tensor T failed to be symmetric positive definite at a sample."""


PointFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class CoefficientField:
    """The pair (eta, T) with the analytic derivative data the bounds use.

    All closures are vectorized over points: input (N, n) chart
    coordinates, outputs

        eta              -> (N,)
        grad_eta         -> (N, n)
        T                -> (N, n, n) symmetric positive definite
        trace_nabla_T    -> (N, n)    the vector sum_i (nabla_{e_i} T)(e_i)
        div_T2_grad_eta  -> (N,)      div(T^2 grad eta)
    """

    n: int
    name: str
    params: dict
    eta: PointFn = field(repr=False)
    grad_eta: PointFn = field(repr=False)
    T: PointFn = field(repr=False)
    trace_nabla_T: PointFn = field(repr=False)
    div_T2_grad_eta: PointFn = field(repr=False)
    analytic: bool = True
    t_identity: bool = False


@dataclass(frozen=True)
class GeometricConstants:
    """Constants with provenance of how each supremum was taken."""

    epsilon: float
    delta: float
    T0: float
    eta0: float
    H0: float
    C0: float
    sample_count: int = 0
    method: str = "grid-sup"  # or "analytic"

    def __post_init__(self) -> None:
        if not self.epsilon > 0:
            raise SpdViolationError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta < self.epsilon:
            raise ValueError(f"delta ({self.delta}) < epsilon ({self.epsilon})")

    @classmethod
    def exact(cls, epsilon=1.0, delta=1.0, T0=0.0, eta0=0.0, H0=0.0, C0=0.0):
        """Constants known in closed form (analytic fixtures)."""
        return cls(epsilon, delta, T0, eta0, H0, C0, sample_count=0, method="analytic")

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "T0": self.T0,
            "eta0": self.eta0,
            "H0": self.H0,
            "C0": self.C0,
            "sample_count": self.sample_count,
            "method": self.method,
        }


def _zeros(points: np.ndarray) -> np.ndarray:
    return np.zeros(points.shape[0])


def _zero_vectors(points: np.ndarray) -> np.ndarray:
    return np.zeros_like(points)


def _identity_tensor(n: int) -> PointFn:
    eye = np.eye(n)

    def T(points: np.ndarray) -> np.ndarray:
        return np.broadcast_to(eye, (points.shape[0], n, n))

    return T


def _laplacian(n: int, params: dict) -> CoefficientField:
    return CoefficientField(
        n=n,
        name="laplacian",
        params={},
        eta=_zeros,
        grad_eta=_zero_vectors,
        T=_identity_tensor(n),
        trace_nabla_T=_zero_vectors,
        div_T2_grad_eta=_zeros,
        t_identity=True,
    )


def _drifted_linear(n: int, params: dict) -> CoefficientField:
    c = float(params.get("c", 1.0))

    def eta(points):
        return c * points[:, 0]

    def grad_eta(points):
        g = np.zeros_like(points)
        g[:, 0] = c
        return g

    # eta is linear, so div(T^2 grad eta) = c * div(e_1) = 0.
    return CoefficientField(
        n=n,
        name="drifted_linear",
        params={"c": c},
        eta=eta,
        grad_eta=grad_eta,
        T=_identity_tensor(n),
        trace_nabla_T=_zero_vectors,
        div_T2_grad_eta=_zeros,
        t_identity=True,
    )


def _gaussian_soliton(n: int, params: dict) -> CoefficientField:
    def eta(points):
        return 0.25 * np.sum(points**2, axis=1)

    def grad_eta(points):
        return 0.5 * points

    def div_t2_grad_eta(points):
        return np.full(points.shape[0], 0.5 * n)

    return CoefficientField(
        n=n,
        name="gaussian_soliton",
        params={},
        eta=eta,
        grad_eta=grad_eta,
        T=_identity_tensor(n),
        trace_nabla_T=_zero_vectors,
        div_T2_grad_eta=div_t2_grad_eta,
        t_identity=True,
    )


def _scalar_t(n: int, params: dict) -> CoefficientField:
    poly = [float(p) for p in params.get("poly", (1.0, 0.0, 1.0))]
    if len(poly) != 3:
        raise ValueError(f"scalar_T expects poly=[a, b, c] for a + b*x1 + c*x1^2, got {poly}")
    a, b, c = poly
    if b == 0.0 and c == 0.0 and a <= 0.0:
        raise ValueError(f"scalar_T with constant t = {a} <= 0 is not positive definite")
    eye = np.eye(n)

    def t_of(points):
        x1 = points[:, 0]
        return a + b * x1 + c * x1 * x1

    def T(points):
        return t_of(points)[:, None, None] * eye

    def trace_nabla_t(points):
        g = np.zeros_like(points)
        g[:, 0] = b + 2.0 * c * points[:, 0]
        return g

    return CoefficientField(
        n=n,
        name="scalar_T",
        params={"poly": [a, b, c]},
        eta=_zeros,
        grad_eta=_zero_vectors,
        T=T,
        trace_nabla_T=trace_nabla_t,
        div_T2_grad_eta=_zeros,
        t_identity=(b == 0.0 and c == 0.0 and a == 1.0),
    )


def _const_t(n: int, params: dict) -> CoefficientField:
    matrix = np.atleast_2d(np.asarray(params.get("matrix", np.eye(n)), dtype=float))
    if matrix.shape != (n, n):
        raise ValueError(f"const_T matrix must be {n}x{n}, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, atol=0.0):
        raise ValueError("const_T matrix must be symmetric")
    lo, _ = symmetric_eig_bounds(matrix[None])
    if lo[0] <= 0.0:
        raise ValueError(f"const_T matrix is not positive definite (min eigenvalue {lo[0]})")

    def T(points):
        return np.broadcast_to(matrix, (points.shape[0], n, n))

    return CoefficientField(
        n=n,
        name="const_T",
        params={"matrix": matrix.tolist()},
        eta=_zeros,
        grad_eta=_zero_vectors,
        T=T,
        trace_nabla_T=_zero_vectors,
        div_T2_grad_eta=_zeros,
        t_identity=bool(np.array_equal(matrix, np.eye(n))),
    )


_PRESET_BUILDERS = {
    "laplacian": _laplacian,
    "drifted_linear": _drifted_linear,
    "gaussian_soliton": _gaussian_soliton,
    "scalar_T": _scalar_t,
    "const_T": _const_t,
}

_PRESET_SCHEMAS = {
    "laplacian": {"params": {}, "doc": "eta = 0, T = I"},
    "drifted_linear": {"params": {"c": "float, default 1.0"}, "doc": "eta = c*x1, T = I"},
    "gaussian_soliton": {"params": {}, "doc": "eta = |x|^2/4, T = I"},
    "scalar_T": {
        "params": {"poly": "[a, b, c] for t(x) = a + b*x1 + c*x1^2, default [1, 0, 1]"},
        "doc": "T = t(x) I with t > 0 on the domain, eta = 0",
    },
    "const_T": {
        "params": {"matrix": "n x n symmetric positive definite, default identity"},
        "doc": "constant tensor, eta = 0",
    },
}


def preset(name: str, n: int, **params) -> CoefficientField:
    """Build a named coefficient preset for intrinsic dimension n.

    Positivity of scalar_T's t(x) over the actual domain is checked where
    the field is sampled (assembly and constants), since the domain is not
    known here.
    """
    try:
        builder = _PRESET_BUILDERS[name]
    except KeyError:
        valid = ", ".join(sorted(_PRESET_BUILDERS))
        raise ValueError(f"unknown preset {name!r}; valid presets: {valid}") from None
    return builder(n, params)


def preset_catalog() -> dict:
    return {name: dict(schema) for name, schema in _PRESET_SCHEMAS.items()}


def symmetric_eig_bounds(tensors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest and largest eigenvalue of each symmetric 1x1 or 2x2 matrix.

    Closed form (trace/determinant), branch-free.
    """
    if tensors.shape[-1] == 1:
        t = tensors[:, 0, 0]
        return t, t
    a = tensors[:, 0, 0]
    b = tensors[:, 0, 1]
    c = tensors[:, 1, 1]
    mid = 0.5 * (a + c)
    rad = np.sqrt((0.5 * (a - c)) ** 2 + b**2)
    return mid - rad, mid + rad


def constants_sample_points(spec: DomainSpec, mesh: Mesh) -> np.ndarray:
    pts = np.vstack([mesh.vertices, element_quadrature(mesh)[0]])
    return clamp_to_domain(spec, pts)


def compute_constants(
    spec: DomainSpec, mesh: Mesh, coeffs: CoefficientField, imm: ImmersionData
) -> GeometricConstants:
    """Estimate the geometric constants by sampling.

    Samples are all mesh vertices plus all element quadrature points,
    projected onto the closed domain.  Suprema are exact maxima over the
    sample set: adding samples can only increase sup-estimates and
    decrease inf-estimates.
    """
    pts = constants_sample_points(spec, mesh)

    tensors = coeffs.T(pts)
    lo, hi = symmetric_eig_bounds(tensors)
    i_min = int(np.argmin(lo))
    if lo[i_min] <= 0.0:
        raise SpdViolationError(
            f"T is not positive definite at sample point {pts[i_min].tolist()} "
            f"(smallest eigenvalue {lo[i_min]})"
        )
    epsilon = float(lo[i_min])
    delta = float(np.max(hi))

    trace = coeffs.trace_nabla_T(pts)
    T0 = float(np.max(np.linalg.norm(trace, axis=1)))
    grad = coeffs.grad_eta(pts)
    eta0 = float(np.max(np.linalg.norm(grad, axis=1)))
    H0 = float(np.max(imm.mean_curvature_norm(pts)))
    t_grad = np.einsum("nij,nj->ni", tensors, grad)
    c0_field = 0.5 * coeffs.div_T2_grad_eta(pts) - 0.25 * np.sum(t_grad**2, axis=1)
    C0 = float(np.max(c0_field))

    return GeometricConstants(
        epsilon=epsilon,
        delta=delta,
        T0=T0,
        eta0=eta0,
        H0=H0,
        C0=C0,
        sample_count=pts.shape[0],
        method="grid-sup",
    )


def from_callables(
    eta: Callable,
    T: Callable,
    n: int,
    name: str = "user",
    step: float = 1e-5,
) -> CoefficientField:
    """Wrap user callables with finite-difference derivatives.

    Lower accuracy than the analytic presets: the nested differences in
    div(T^2 grad eta) are good to roughly 1e-6, which dominates the
    constant C0's error.  Prefer an analytic preset when one fits.
    """

    def eta_vec(points):
        return np.asarray([float(eta(p)) for p in points])

    def T_vec(points):
        return np.asarray([np.atleast_2d(T(p)) for p in points], dtype=float)

    def grad_eta(points):
        g = np.empty((points.shape[0], n))
        for axis in range(n):
            e = np.zeros(n)
            e[axis] = step
            g[:, axis] = (eta_vec(points + e) - eta_vec(points - e)) / (2.0 * step)
        return g

    def trace_nabla_t(points):
        # tr(nabla T)_j = sum_i d_i T_ij for symmetric T in a flat chart
        out = np.zeros((points.shape[0], n))
        for axis in range(n):
            e = np.zeros(n)
            e[axis] = step
            dT = (T_vec(points + e) - T_vec(points - e)) / (2.0 * step)
            out += dT[:, axis, :]
        return out

    def flux(points):
        tens = T_vec(points)
        return np.einsum("nij,njk,nk->ni", tens, tens, grad_eta(points))

    def div_t2_grad_eta(points, outer_step: float = 1e-4):
        out = np.zeros(points.shape[0])
        for axis in range(n):
            e = np.zeros(n)
            e[axis] = outer_step
            out += (flux(points + e)[:, axis] - flux(points - e)[:, axis]) / (2.0 * outer_step)
        return out

    return CoefficientField(
        n=n,
        name=name,
        params={"step": step},
        eta=eta_vec,
        grad_eta=grad_eta,
        T=T_vec,
        trace_nabla_T=trace_nabla_t,
        div_T2_grad_eta=div_t2_grad_eta,
        analytic=False,
    )


def with_shifted_eta(coeffs: CoefficientField, shift: float) -> CoefficientField:
    """Replace eta by eta + shift (derivatives unchanged); test utility."""
    base = coeffs.eta

    def eta(points):
        return base(points) + shift

    return replace(coeffs, eta=eta, params={**coeffs.params, "eta_shift": shift})
