"""Bounded domains, simplicial meshes, and immersion geometry.

Supported domains are one- and two-dimensional: an interval, an axis-aligned
rectangle, a circular annulus, and a circular arc parameterized by arc
length.  Meshes are uniform and structured (segments in 1D, triangles in
2D); refinement is uniform red refinement so that nested convergence
studies are possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, TextIO, Union

import numpy as np

__all__ = [
    "Interval",
    "Rectangle",
    "Annulus",
    "CircleArc",
    "DomainSpec",
    "Mesh",
    "ImmersionData",
    "build_mesh",
    "refine",
    "immersion_data",
    "element_quadrature",
    "clamp_to_domain",
    "write_mesh",
]

# Unit-ball volumes omega_n for the intrinsic dimensions we support.
UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi}


@dataclass(frozen=True)
class Interval:
    """The open interval (a, b) on the real line."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not self.b > self.a:
            raise ValueError(f"interval needs b > a, got a={self.a}, b={self.b}")

    n = 1          # intrinsic dimension
    m = 1          # ambient dimension
    flat = True

    @property
    def volume(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle (ax, bx) x (ay, by)."""

    ax: float
    bx: float
    ay: float
    by: float

    def __post_init__(self) -> None:
        if not (self.bx > self.ax and self.by > self.ay):
            raise ValueError(
                "rectangle needs bx > ax and by > ay, got "
                f"({self.ax}, {self.bx}) x ({self.ay}, {self.by})"
            )

    n = 2
    m = 2
    flat = True

    @property
    def volume(self) -> float:
        return (self.bx - self.ax) * (self.by - self.ay)


@dataclass(frozen=True)
class Annulus:
    """Planar annulus r_inner < |x| < r_outer centered at the origin."""

    r_inner: float
    r_outer: float

    def __post_init__(self) -> None:
        if not (0.0 < self.r_inner < self.r_outer):
            raise ValueError(
                f"annulus needs 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}"
            )

    n = 2
    m = 2
    flat = True

    @property
    def volume(self) -> float:
        return math.pi * (self.r_outer**2 - self.r_inner**2)


@dataclass(frozen=True)
class CircleArc:
    """Arc of a circle of given radius, in its arc-length chart [0, L].

    The arc is a curved 1-manifold immersed in the plane; everything
    intrinsic (mesh, integrals, operator) lives in the chart coordinate s,
    and the curvature of the immersion enters only through the generalized
    mean curvature field.
    """

    radius: float
    arc_length: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError(f"circle arc needs radius > 0, got {self.radius}")
        if not 0.0 < self.arc_length < 2.0 * math.pi * self.radius:
            raise ValueError(
                f"arc length must lie in (0, 2*pi*R), got L={self.arc_length}, R={self.radius}"
            )

    n = 1
    m = 2
    flat = False

    @property
    def volume(self) -> float:
        return self.arc_length


DomainSpec = Union[Interval, Rectangle, Annulus, CircleArc]


@dataclass(frozen=True)
class Mesh:
    """Simplicial mesh in chart coordinates.

    Attributes
    ----------
    dim : intrinsic dimension of the elements (1 or 2).
    vertices : (nv, chart_dim) array of chart coordinates.
    elements : (ne, dim+1) integer array of vertex indices; triangles are
        counterclockwise in the chart.
    boundary_mask : (nv,) boolean array, True exactly on boundary vertices.
    element_volumes : (ne,) positive lengths/areas in the intrinsic metric.
    spec : the domain this mesh discretizes (used for boundary projection
        on refinement and for sample clamping).

    The arrays are frozen after construction; a Mesh is safe to share.
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray
    boundary_mask: np.ndarray
    element_volumes: np.ndarray
    spec: DomainSpec | None = None

    def __post_init__(self) -> None:
        if np.any(self.element_volumes <= 0.0):
            bad = int(np.argmin(self.element_volumes))
            raise ValueError(f"element {bad} has nonpositive volume")
        for arr in (self.vertices, self.elements, self.boundary_mask, self.element_volumes):
            arr.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_elements(self) -> int:
        return self.elements.shape[0]


@dataclass(frozen=True)
class ImmersionData:
    """Ambient geometry of the immersed domain.

    ``mean_curvature_norm`` maps chart points (N, chart_dim) to |H_T| >= 0;
    it is identically zero on flat domains and |t(s)|/R on a circular arc
    with scalar coefficient t.  ``volume`` is the exact unweighted measure
    of the domain, not the mesh approximation.
    """

    ambient_dim: int
    mean_curvature_norm: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    volume: float = 0.0
    unit_ball_volume: float = 0.0


def _mesh_1d(points: np.ndarray, spec: DomainSpec | None) -> Mesh:
    nv = points.shape[0]
    elements = np.column_stack([np.arange(nv - 1), np.arange(1, nv)])
    boundary = np.zeros(nv, dtype=bool)
    boundary[0] = boundary[-1] = True
    volumes = np.diff(points)
    return Mesh(
        dim=1,
        vertices=points.reshape(-1, 1).copy(),
        elements=elements.astype(np.int64),
        boundary_mask=boundary,
        element_volumes=volumes.copy(),
        spec=spec,
    )


def _triangle_areas(vertices: np.ndarray, elements: np.ndarray) -> np.ndarray:
    p = vertices[elements]  # (ne, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def _mesh_rectangle(spec: Rectangle, resolution: int) -> Mesh:
    r = resolution
    xs = np.linspace(spec.ax, spec.bx, r + 1)
    ys = np.linspace(spec.ay, spec.by, r + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (r + 1) + i

    tris = []
    for j in range(r):
        for i in range(r):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v11, v01 = vid(i + 1, j + 1), vid(i, j + 1)
            if (i + j) % 2 == 0:
                # diagonal v00-v11
                tris.append((v00, v10, v11))
                tris.append((v00, v11, v01))
            else:
                # diagonal v10-v01, crossing the neighbour's
                tris.append((v00, v10, v01))
                tris.append((v10, v11, v01))
    elements = np.asarray(tris, dtype=np.int64)

    I, J = np.meshgrid(np.arange(r + 1), np.arange(r + 1), indexing="xy")
    boundary = ((I == 0) | (I == r) | (J == 0) | (J == r)).ravel()

    areas = _triangle_areas(vertices, elements)
    return Mesh(2, vertices, elements, boundary, areas, spec)


def _annulus_angular_count(spec: Annulus, resolution: int) -> int:
    # Target near-unit aspect at the mean radius; keeps aspect <= 3 at both
    # rings for r_outer <= 5 r_inner.
    dr = (spec.r_outer - spec.r_inner) / resolution
    return max(8, math.ceil(math.pi * (spec.r_inner + spec.r_outer) / dr))


def _mesh_annulus(spec: Annulus, resolution: int) -> Mesh:
    nr = resolution
    ntheta = _annulus_angular_count(spec, resolution)
    radii = np.linspace(spec.r_inner, spec.r_outer, nr + 1)
    thetas = 2.0 * math.pi * np.arange(ntheta) / ntheta
    R, TH = np.meshgrid(radii, thetas, indexing="ij")
    vertices = np.column_stack([(R * np.cos(TH)).ravel(), (R * np.sin(TH)).ravel()])

    def vid(ir: int, j: int) -> int:
        return ir * ntheta + (j % ntheta)

    tris = []
    for ir in range(nr):
        for j in range(ntheta):
            a = vid(ir, j)
            b = vid(ir + 1, j)
            c = vid(ir + 1, j + 1)
            d = vid(ir, j + 1)
            tris.append((a, b, c))
            tris.append((a, c, d))
    elements = np.asarray(tris, dtype=np.int64)

    boundary = np.zeros(vertices.shape[0], dtype=bool)
    boundary[:ntheta] = True          # inner ring
    boundary[nr * ntheta:] = True     # outer ring

    areas = _triangle_areas(vertices, elements)
    return Mesh(2, vertices, elements, boundary, areas, spec)


def build_mesh(spec: DomainSpec, resolution: int) -> Mesh:
    """Build a structured mesh of the domain.

    ``resolution`` is the element count in 1D, the cell count per side for
    a rectangle, and the radial cell count for an annulus (the angular
    count is derived so elements keep moderate aspect ratio).  Annulus
    vertices are placed exactly on the two radii; the curved boundary is
    otherwise approximated by chords.
    """
    if not isinstance(resolution, (int, np.integer)) or resolution < 2:
        raise ValueError(f"resolution must be an integer >= 2, got {resolution!r}")
    if isinstance(spec, Interval):
        return _mesh_1d(np.linspace(spec.a, spec.b, resolution + 1), spec)
    if isinstance(spec, CircleArc):
        return _mesh_1d(np.linspace(0.0, spec.arc_length, resolution + 1), spec)
    if isinstance(spec, Rectangle):
        return _mesh_rectangle(spec, resolution)
    if isinstance(spec, Annulus):
        return _mesh_annulus(spec, resolution)
    raise ValueError(f"unsupported domain spec: {spec!r}")


def _boundary_edges(elements: np.ndarray) -> set[tuple[int, int]]:
    """Edges that belong to exactly one triangle."""
    count: dict[tuple[int, int], int] = {}
    for tri in elements:
        for k in range(3):
            e = (int(tri[k]), int(tri[(k + 1) % 3]))
            key = (min(e), max(e))
            count[key] = count.get(key, 0) + 1
    return {e for e, c in count.items() if c == 1}


def _project_to_ring(point: np.ndarray, spec: Annulus) -> np.ndarray:
    r = float(np.hypot(point[0], point[1]))
    target = spec.r_inner if r < 0.5 * (spec.r_inner + spec.r_outer) else spec.r_outer
    return point * (target / r)


def refine(mesh: Mesh) -> Mesh:
    """Uniform refinement: bisect segments, red-refine triangles.

    Midpoints of boundary edges are boundary-flagged; on an annulus they
    are additionally projected onto the exact circle so the polygonal
    boundary converges to the curved one.
    """
    if mesh.dim == 1:
        old = mesh.vertices[:, 0]
        mids = 0.5 * (old[mesh.elements[:, 0]] + old[mesh.elements[:, 1]])
        pts = np.empty(old.size + mids.size)
        pts[0::2] = old  # segments are consecutive, so interleave
        pts[1::2] = mids
        return _mesh_1d(pts, mesh.spec)

    vertices = [mesh.vertices[i] for i in range(mesh.num_vertices)]
    boundary = list(mesh.boundary_mask)
    bnd_edges = _boundary_edges(mesh.elements)
    midpoint_of: dict[tuple[int, int], int] = {}

    def midpoint(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        idx = midpoint_of.get(key)
        if idx is None:
            p = 0.5 * (mesh.vertices[i] + mesh.vertices[j])
            on_boundary = key in bnd_edges
            if on_boundary and isinstance(mesh.spec, Annulus):
                p = _project_to_ring(p, mesh.spec)
            idx = len(vertices)
            vertices.append(p)
            boundary.append(on_boundary)
            midpoint_of[key] = idx
        return idx

    tris = []
    for v0, v1, v2 in mesh.elements:
        m01 = midpoint(v0, v1)
        m12 = midpoint(v1, v2)
        m02 = midpoint(v0, v2)
        tris.extend([(v0, m01, m02), (m01, v1, m12), (m02, m12, v2), (m01, m12, m02)])

    new_vertices = np.asarray(vertices)
    new_elements = np.asarray(tris, dtype=np.int64)
    areas = _triangle_areas(new_vertices, new_elements)
    return Mesh(2, new_vertices, new_elements, np.asarray(boundary), areas, mesh.spec)


# Fixed quadrature used by assembly and by constants sampling.
# 1D: 2-point Gauss per segment, points ordered [mid - r, mid + r] with
#     r = h / (2*sqrt(3)); exact through degree 3.
# 2D: edge-midpoint rule per triangle, points ordered [m01, m12, m20],
#     weight area/3 each; exact through degree 2.
_GAUSS2_OFFSET = 0.5 / math.sqrt(3.0)


def element_quadrature(mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature points and weights for every element, flattened.

    Returns ``(points, weights)`` with points of shape (q*ne, chart_dim) in
    the per-element order documented above.
    """
    if mesh.dim == 1:
        x = mesh.vertices[mesh.elements[:, 0], 0]
        h = mesh.element_volumes
        mid = x + 0.5 * h
        pts = np.empty((mesh.num_elements, 2))
        pts[:, 0] = mid - _GAUSS2_OFFSET * h
        pts[:, 1] = mid + _GAUSS2_OFFSET * h
        wts = np.repeat(0.5 * h, 2)
        return pts.reshape(-1, 1), wts
    p = mesh.vertices[mesh.elements]  # (ne, 3, 2)
    mids = np.stack(
        [0.5 * (p[:, 0] + p[:, 1]), 0.5 * (p[:, 1] + p[:, 2]), 0.5 * (p[:, 2] + p[:, 0])],
        axis=1,
    )
    wts = np.repeat(mesh.element_volumes / 3.0, 3)
    return mids.reshape(-1, 2), wts


def clamp_to_domain(spec: DomainSpec, points: np.ndarray) -> np.ndarray:
    """Project sample points onto the closed domain.

    Quadrature points of straight-edged elements can fall slightly outside
    a curved boundary (annulus chords); suprema of coefficient fields are
    taken over the closure of the domain, so samples are pulled back in.
    """
    pts = np.array(points, dtype=float)
    if isinstance(spec, Interval):
        np.clip(pts[:, 0], spec.a, spec.b, out=pts[:, 0])
    elif isinstance(spec, CircleArc):
        np.clip(pts[:, 0], 0.0, spec.arc_length, out=pts[:, 0])
    elif isinstance(spec, Rectangle):
        np.clip(pts[:, 0], spec.ax, spec.bx, out=pts[:, 0])
        np.clip(pts[:, 1], spec.ay, spec.by, out=pts[:, 1])
    elif isinstance(spec, Annulus):
        r = np.hypot(pts[:, 0], pts[:, 1])
        scale = np.clip(r, spec.r_inner, spec.r_outer) / r
        pts *= scale[:, None]
    return pts


def immersion_data(spec: DomainSpec, coeffs) -> ImmersionData:
    """Ambient dimension, |H_T| field, exact volume, and omega_n.

    Flat domains have vanishing second fundamental form, hence |H_T| = 0
    regardless of T.  On a circular arc of radius R the principal curvature
    is 1/R, and with T = t(s) I the generalized mean curvature has norm
    |t(s)|/R.
    """
    omega_n = UNIT_BALL_VOLUME[spec.n]
    if isinstance(spec, CircleArc):
        radius = spec.radius

        def curvature(points: np.ndarray) -> np.ndarray:
            t = coeffs.T(points)[:, 0, 0]
            return np.abs(t) / radius

        return ImmersionData(spec.m, curvature, spec.volume, omega_n)

    def zero(points: np.ndarray) -> np.ndarray:
        return np.zeros(points.shape[0])

    return ImmersionData(spec.m, zero, spec.volume, omega_n)


def write_mesh(mesh: Mesh, out: TextIO) -> None:
    """Plain-text debug export: `v x [y]`, `e i j [k]`, final `b i ...`."""
    for v in mesh.vertices:
        out.write("v " + " ".join(f"{c:.17g}" for c in v) + "\n")
    for e in mesh.elements:
        out.write("e " + " ".join(str(int(i)) for i in e) + "\n")
    ids = np.nonzero(mesh.boundary_mask)[0]
    out.write("b " + " ".join(str(int(i)) for i in ids) + "\n")
