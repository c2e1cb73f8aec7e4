"""P1 finite-element assembly of the weighted weak form.

The operator div(T grad u) - <grad eta, T grad u> is self-adjoint in
L^2 with weight exp(-eta); its Dirichlet weak form gives

    A_ij = int <T grad(phi_i), grad(phi_j)> exp(-eta) dx
    M_ij = int phi_i phi_j exp(-eta) dx

over hat functions, with boundary rows/columns eliminated.  Quadrature is
fixed at degree-2 exactness (2-point Gauss on segments, edge midpoints on
triangles); the upper triangle is assembled once so A and M are symmetric
to the last bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np
import scipy.sparse as sp

from .coeffs import CoefficientField, SpdViolationError, symmetric_eig_bounds
from .domain import Mesh, element_quadrature

__all__ = [
    "SparseSymMatrix",
    "DiscreteProblem",
    "assemble",
    "rayleigh_quotient",
    "write_matrix_market",
]


@dataclass(frozen=True)
class SparseSymMatrix:
    """Symmetric sparse matrix storing only the upper triangle.

    Entries are canonically ordered (lexicographic by row, then column),
    duplicate-free, with explicit zeros dropped; symmetry is implicit.
    """

    dimension: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray

    @classmethod
    def from_coo(cls, dimension: int, rows, cols, vals) -> "SparseSymMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        # fold everything into the upper triangle
        r = np.minimum(rows, cols)
        c = np.maximum(rows, cols)
        order = np.lexsort((c, r))
        r, c, vals = r[order], c[order], vals[order]
        # deterministic duplicate sum in canonical order
        key = r * dimension + c
        first = np.ones(key.size, dtype=bool)
        first[1:] = key[1:] != key[:-1]
        starts = np.nonzero(first)[0]
        summed = np.add.reduceat(vals, starts)
        r, c = r[starts], c[starts]
        keep = summed != 0.0
        return cls(dimension, r[keep], c[keep], summed[keep])

    @property
    def nnz(self) -> int:
        return self.vals.size

    def to_csr(self) -> sp.csr_matrix:
        """Full symmetric CSR (both triangles mirrored bit-identically)."""
        off = self.rows != self.cols
        r = np.concatenate([self.rows, self.cols[off]])
        c = np.concatenate([self.cols, self.rows[off]])
        v = np.concatenate([self.vals, self.vals[off]])
        return sp.csr_matrix((v, (r, c)), shape=(self.dimension, self.dimension))

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def diagonal(self) -> np.ndarray:
        d = np.zeros(self.dimension)
        on = self.rows == self.cols
        d[self.rows[on]] = self.vals[on]
        return d

    def add_scaled(self, other: "SparseSymMatrix", factor: float) -> "SparseSymMatrix":
        if other.dimension != self.dimension:
            raise ValueError("dimension mismatch")
        return SparseSymMatrix.from_coo(
            self.dimension,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.cols, other.cols]),
            np.concatenate([self.vals, factor * other.vals]),
        )


@dataclass(frozen=True)
class DiscreteProblem:
    """Assembled generalized eigenproblem A u = lambda M u.

    ``vertex_to_unknown`` maps mesh vertex -> unknown index (-1 on the
    boundary); ``unknown_to_vertex`` is its inverse over interior vertices.
    """

    stiffness: SparseSymMatrix
    mass: SparseSymMatrix
    vertex_to_unknown: np.ndarray
    unknown_to_vertex: np.ndarray

    @property
    def dimension(self) -> int:
        return self.stiffness.dimension


def _check_spd(tensors: np.ndarray, points: np.ndarray) -> None:
    lo, _ = symmetric_eig_bounds(tensors)
    i = int(np.argmin(lo))
    if lo[i] <= 0.0:
        raise SpdViolationError(
            f"T is not positive definite at quadrature point {points[i].tolist()} "
            f"(smallest eigenvalue {lo[i]})"
        )


def _local_matrices_1d(mesh: Mesh, coeffs: CoefficientField):
    qpts, qwts = element_quadrature(mesh)
    tensors = coeffs.T(qpts)
    _check_spd(tensors, qpts)
    weight = (qwts * np.exp(-coeffs.eta(qpts))).reshape(-1, 2)  # (ne, 2)
    t = tensors[:, 0, 0].reshape(-1, 2)

    h = mesh.element_volumes
    # hat-function values at the two Gauss points (xi = 1/2 -+ 1/(2*sqrt(3)))
    xi = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
    phi = np.stack([1.0 - xi, xi])  # (2 local, 2 qpts)

    tw = np.sum(weight * t, axis=1)  # integral of t*exp(-eta) over element
    inv_h2 = 1.0 / h**2
    a_loc = np.empty((mesh.num_elements, 2, 2))
    a_loc[:, 0, 0] = a_loc[:, 1, 1] = tw * inv_h2
    a_loc[:, 0, 1] = a_loc[:, 1, 0] = -tw * inv_h2

    m_loc = np.einsum("eq,iq,jq->eij", weight, phi, phi)
    return a_loc, m_loc


def _local_matrices_2d(mesh: Mesh, coeffs: CoefficientField):
    qpts, qwts = element_quadrature(mesh)
    tensors = coeffs.T(qpts)
    _check_spd(tensors, qpts)
    weight = (qwts * np.exp(-coeffs.eta(qpts))).reshape(-1, 3)  # (ne, 3)
    tq = tensors.reshape(mesh.num_elements, 3, 2, 2)

    p = mesh.vertices[mesh.elements]  # (ne, 3, 2)
    area2 = 2.0 * mesh.element_volumes
    grads = np.empty((mesh.num_elements, 3, 2))
    for i in range(3):
        a, b = p[:, (i + 1) % 3], p[:, (i + 2) % 3]
        grads[:, i, 0] = (a[:, 1] - b[:, 1]) / area2
        grads[:, i, 1] = (b[:, 0] - a[:, 0]) / area2

    # phi values at the edge midpoints m01, m12, m20
    phi = np.array([[0.5, 0.0, 0.5], [0.5, 0.5, 0.0], [0.0, 0.5, 0.5]])  # (local i, qpt)

    t_grad = np.einsum("eqab,ejb->eqja", tq, grads)
    a_loc = np.einsum("eq,eia,eqja->eij", weight, grads, t_grad)
    m_loc = np.einsum("eq,iq,jq->eij", weight, phi, phi)
    return a_loc, m_loc


def assemble(mesh: Mesh, coeffs: CoefficientField) -> DiscreteProblem:
    """Assemble stiffness and mass with Dirichlet elimination."""
    if coeffs.n != mesh.vertices.shape[1]:
        raise ValueError(
            f"coefficient dimension {coeffs.n} does not match mesh chart dimension "
            f"{mesh.vertices.shape[1]}"
        )
    if mesh.dim == 1:
        a_loc, m_loc = _local_matrices_1d(mesh, coeffs)
        upper = [(0, 0), (0, 1), (1, 1)]
    else:
        a_loc, m_loc = _local_matrices_2d(mesh, coeffs)
        upper = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]

    vertex_to_unknown = np.full(mesh.num_vertices, -1, dtype=np.int64)
    unknown_to_vertex = np.nonzero(~mesh.boundary_mask)[0]
    vertex_to_unknown[unknown_to_vertex] = np.arange(unknown_to_vertex.size)
    dim = unknown_to_vertex.size

    gi = vertex_to_unknown[mesh.elements]  # (ne, nodes)
    rows, cols, a_vals, m_vals = [], [], [], []
    for i, j in upper:
        r, c = gi[:, i], gi[:, j]
        keep = (r >= 0) & (c >= 0)
        rows.append(r[keep])
        cols.append(c[keep])
        a_vals.append(a_loc[keep, i, j])
        m_vals.append(m_loc[keep, i, j])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)

    stiffness = SparseSymMatrix.from_coo(dim, rows, cols, np.concatenate(a_vals))
    mass = SparseSymMatrix.from_coo(dim, rows, cols, np.concatenate(m_vals))
    return DiscreteProblem(stiffness, mass, vertex_to_unknown, unknown_to_vertex)


def rayleigh_quotient(dp: DiscreteProblem, v: np.ndarray) -> float:
    """(v'Av) / (v'Mv) for a nonzero vector of matching dimension."""
    v = np.asarray(v, dtype=float)
    if v.shape != (dp.dimension,):
        raise ValueError(f"vector shape {v.shape} does not match dimension {dp.dimension}")
    if not np.any(v):
        raise ValueError("Rayleigh quotient of the zero vector is undefined")
    a = float(v @ (dp.stiffness.to_csr() @ v))
    m = float(v @ (dp.mass.to_csr() @ v))
    return a / m


def write_matrix_market(mat: SparseSymMatrix, out: TextIO) -> None:
    """Export in Matrix Market coordinate format (real symmetric).

    The symmetric format stores the lower triangle, so stored upper-triangle
    entries are written transposed; indices are 1-based.
    """
    out.write("%%MatrixMarket matrix coordinate real symmetric\n")
    out.write(f"{mat.dimension} {mat.dimension} {mat.nnz}\n")
    for r, c, v in zip(mat.rows, mat.cols, mat.vals):
        out.write(f"{c + 1} {r + 1} {v:.17g}\n")
