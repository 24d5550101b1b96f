"""Admissible prism crystals parameterised by signed facet distances.

Facet indexing (0-based): ``0..N-1`` are the lateral facets in
counterclockwise order, ``N`` is the top facet and ``N+1`` the bottom facet.
Lateral facet ``i`` sits on the base edge running from vertex ``i`` to vertex
``i+1``; vertex ``i`` is shared by edges ``i-1`` and ``i``.

``z[i] > 0`` means facet ``i`` moved along its outward normal (growth).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateGeometry

EDGE_REL_TOL = 1e-9
BOUNDARY_REL_TOL = 1e-12
ANGLE_TOL = 1e-9

INSIDE, BOUNDARY, OUTSIDE = -1, 0, 1


def _cross2(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def polygon_area(vertices: np.ndarray) -> float:
    """Shoelace area (positive for counterclockwise vertex order)."""
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def edge_normals(vertices: np.ndarray) -> np.ndarray:
    """Outward unit normals of a counterclockwise polygon, one per edge."""
    d = np.roll(vertices, -1, axis=0) - vertices
    n = np.stack([d[:, 1], -d[:, 0]], axis=1)
    return n / np.linalg.norm(n, axis=1, keepdims=True)


@dataclass(frozen=True, eq=False)
class BasePolygon:
    """Initial crystal ``W(0) x [-L/2, L/2]``."""

    vertices0: np.ndarray
    half_height0: float
    normals: np.ndarray = field(init=False)
    offsets: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.array(self.vertices0, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ConfigError("base polygon needs at least 3 planar vertices")
        if not self.half_height0 > 0:
            raise ConfigError("half height must be positive")
        d = np.roll(v, -1, axis=0) - v
        turn = _cross2(d, np.roll(d, -1, axis=0))
        if polygon_area(v) <= 0 or np.any(turn <= 0):
            raise ConfigError("base polygon must be strictly convex and counterclockwise")
        n = edge_normals(v)
        c = np.einsum("ij,ij->i", n, v)
        if np.any(c <= 0):
            raise ConfigError("origin must lie strictly inside the base polygon")
        v.setflags(write=False)
        n.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "vertices0", v)
        object.__setattr__(self, "half_height0", float(self.half_height0))
        object.__setattr__(self, "normals", n)
        object.__setattr__(self, "offsets", c)

    @classmethod
    def regular(cls, k: int, inradius: float, half_height: float, rotation: float = 0.0):
        """Regular k-gon whose edge ``i`` has outward normal at angle ``i*2pi/k + rotation``."""
        if k < 3:
            raise ConfigError("k must be >= 3")
        theta = 2.0 * np.pi / k
        ang = (np.arange(k) - 0.5) * theta + rotation
        rad = inradius / np.cos(theta / 2.0)
        return cls(np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1), half_height)

    @property
    def k(self) -> int:
        return self.vertices0.shape[0]

    @property
    def n_facets(self) -> int:
        return self.k + 2

    @property
    def normals3(self) -> np.ndarray:
        """All N+2 outward facet normals in 3-D."""
        n = np.zeros((self.k + 2, 3))
        n[: self.k, :2] = self.normals
        n[self.k, 2] = 1.0
        n[self.k + 1, 2] = -1.0
        return n

    @property
    def plane_offsets0(self) -> np.ndarray:
        return np.concatenate([self.offsets, [self.half_height0, self.half_height0]])

    @property
    def diameter(self) -> float:
        v = self.vertices0
        planar = np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1))
        return float(np.hypot(planar, 2.0 * self.half_height0))

    @property
    def inradius(self) -> float:
        return float(self.offsets.min())

    def rotated(self, angle: float) -> "BasePolygon":
        c, s = np.cos(angle), np.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return BasePolygon(self.vertices0 @ rot.T, self.half_height0)

    def scaled(self, s: float) -> "BasePolygon":
        return BasePolygon(self.vertices0 * s, self.half_height0 * s)


def _as_z(base: BasePolygon, z) -> np.ndarray:
    z = np.zeros(base.n_facets) if z is None else np.asarray(z, dtype=float)
    if z.shape != (base.n_facets,):
        raise ConfigError(f"z must have {base.n_facets} entries, got shape {z.shape}")
    return z


def reconstruct_vertices(base: BasePolygon, z) -> np.ndarray:
    """Planar vertices of W(z): intersections of consecutive offset supporting lines."""
    z = np.asarray(z, dtype=float)
    if not np.any(z[: base.k]):
        return base.vertices0.copy()
    n = base.normals
    rhs = base.offsets + z[: base.k]
    n_prev, rhs_prev = np.roll(n, 1, axis=0), np.roll(rhs, 1)
    det = _cross2(n_prev, n)
    # Cramer's rule for [n_prev; n] x = [rhs_prev; rhs]
    x = (rhs_prev * n[:, 1] - rhs * n_prev[:, 1]) / det
    y = (n_prev[:, 0] * rhs - n[:, 0] * rhs_prev) / det
    verts = np.stack([x, y], axis=1)
    tangent = np.stack([-n[:, 1], n[:, 0]], axis=1)
    lengths = np.einsum("ij,ij->i", np.roll(verts, -1, axis=0) - verts, tangent)
    tol = EDGE_REL_TOL * base.diameter
    if np.any(lengths <= tol):
        bad = np.flatnonzero(lengths <= tol).tolist()
        raise DegenerateGeometry(f"lateral facets {bad} vanished (edge length <= {tol:.3g})")
    return verts


@dataclass(frozen=True, eq=False)
class CrystalState:
    base: BasePolygon
    z: np.ndarray
    vertices: np.ndarray
    top: float
    bottom: float

    @classmethod
    def at(cls, base: BasePolygon, z=None) -> "CrystalState":
        z = _as_z(base, z).copy()
        verts = reconstruct_vertices(base, z)
        k = base.k
        top = base.half_height0 + z[k]
        bottom = -base.half_height0 - z[k + 1]
        if top - bottom <= EDGE_REL_TOL * base.diameter:
            raise DegenerateGeometry("top and bottom facets met (height <= 0)")
        z.setflags(write=False)
        verts.setflags(write=False)
        return cls(base, z, verts, float(top), float(bottom))

    @property
    def k(self) -> int:
        return self.base.k

    @property
    def n_facets(self) -> int:
        return self.base.n_facets

    @property
    def height(self) -> float:
        return self.top - self.bottom

    @property
    def plane_offsets(self) -> np.ndarray:
        return self.base.plane_offsets0 + self.z

    @property
    def diameter(self) -> float:
        v = self.vertices
        planar = np.max(np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1))
        return float(np.hypot(planar, self.height))

    def corners(self) -> np.ndarray:
        """The 2N corner points of the prism (top ring, then bottom ring)."""
        k = self.k
        pts = np.empty((2 * k, 3))
        pts[:k, :2] = self.vertices
        pts[:k, 2] = self.top
        pts[k:, :2] = self.vertices
        pts[k:, 2] = self.bottom
        return pts

    def with_z(self, z) -> "CrystalState":
        return CrystalState.at(self.base, z)


@dataclass(frozen=True)
class FacetMeasures:
    edge_lengths: np.ndarray
    lateral_areas: np.ndarray
    top_area: float
    interior_angles: np.ndarray
    height: float
    volume: float

    @property
    def bottom_area(self) -> float:
        return self.top_area

    @property
    def facet_areas(self) -> np.ndarray:
        return np.concatenate([self.lateral_areas, [self.top_area, self.top_area]])


def interior_angles(normals: np.ndarray) -> np.ndarray:
    """Interior angle at each vertex ``j`` (between edges ``j-1`` and ``j``)."""
    prev = np.roll(normals, 1, axis=0)
    turn = np.arctan2(_cross2(prev, normals), np.einsum("ij,ij->i", prev, normals))
    return np.pi - turn


def measures(state: CrystalState) -> FacetMeasures:
    v = state.vertices
    lengths = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    area = polygon_area(v)
    h = state.height
    return FacetMeasures(
        edge_lengths=lengths,
        lateral_areas=lengths * h,
        top_area=area,
        interior_angles=interior_angles(state.base.normals),
        height=h,
        volume=area * h,
    )


def signed_plane_distances(state: CrystalState, points: np.ndarray) -> np.ndarray:
    """(M, N+2) signed distances of points to each facet plane, positive outside."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    return pts @ state.base.normals3.T - state.plane_offsets


def classify(state: CrystalState, points: np.ndarray, tol: float | None = None):
    """Vectorised classification.

    Returns ``(label, facet)`` where label is INSIDE/BOUNDARY/OUTSIDE and
    ``facet`` is the facet whose plane is most violated (the nearest facet
    for points close to the surface).
    """
    if tol is None:
        tol = BOUNDARY_REL_TOL * state.base.diameter
    s = signed_plane_distances(state, points)
    facet = np.argmax(s, axis=1)
    smax = s[np.arange(s.shape[0]), facet]
    label = np.where(smax > tol, OUTSIDE, np.where(smax < -tol, INSIDE, BOUNDARY))
    return label, facet


def point_classification(state: CrystalState, x):
    """Classify one point: ``("inside", None)``, ``("outside", None)`` or ``("boundary", facet)``."""
    label, facet = classify(state, np.asarray(x, dtype=float)[None, :])
    if label[0] == INSIDE:
        return "inside", None
    if label[0] == OUTSIDE:
        return "outside", None
    return "boundary", int(facet[0])


@dataclass(frozen=True)
class AdmissibilityReport:
    passed: bool
    unmatched_crystal: list
    unmatched_wulff: list

    def __bool__(self):
        return self.passed


def _angle_between(a, b):
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


def admissibility_check(state: CrystalState, aniso, tol: float = ANGLE_TOL) -> AdmissibilityReport:
    """Compare facet normals of the crystal with the Wulff shape's normals (as multisets)."""
    crystal = [n for n in state.base.normals3]
    wulff = [n for n in aniso.facet_normals()]
    used = [False] * len(wulff)
    unmatched = []
    for n in crystal:
        for j, m in enumerate(wulff):
            if not used[j] and _angle_between(n, m) <= tol:
                used[j] = True
                break
        else:
            unmatched.append(n.tolist())
    left = [wulff[j].tolist() for j in range(len(wulff)) if not used[j]]
    return AdmissibilityReport(not unmatched and not left, unmatched, left)


def _gauss01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def facet_frame(state: CrystalState, i: int):
    """``(origin, u, v, size_u, size_v)``: a corner and orthonormal in-plane axes.

    Only meaningful for lateral facets, where the facet is a rectangle.
    """
    k = state.k
    a = state.vertices[i]
    b = state.vertices[(i + 1) % k]
    e = b - a
    le = float(np.linalg.norm(e))
    origin = np.array([a[0], a[1], state.bottom])
    u = np.array([e[0] / le, e[1] / le, 0.0])
    v = np.array([0.0, 0.0, 1.0])
    return origin, u, v, le, state.height


def polygon_quadrature(vertices: np.ndarray, n: int):
    """Gauss points on a convex polygon via a fan of collapsed-square triangles."""
    c = vertices.mean(axis=0)
    s, ws = _gauss01(n)
    uu, vv = np.meshgrid(s, s, indexing="ij")
    ww = np.outer(ws, ws)
    pts, wts = [], []
    m = vertices.shape[0]
    for j in range(m):
        a, b = vertices[j], vertices[(j + 1) % m]
        # (u, v) in [0,1]^2 -> c + u (a - c) + u v (b - a); jacobian 2 * area * u
        tri_area = 0.5 * _cross2(a - c, b - c)
        p = c + uu[..., None] * (a - c) + (uu * vv)[..., None] * (b - a)
        pts.append(p.reshape(-1, 2))
        wts.append((ww * uu * 2.0 * tri_area).ravel())
    return np.concatenate(pts), np.concatenate(wts)


def facet_quadrature(state: CrystalState, i: int, n: int = 8):
    """Quadrature points (M, 3) and weights on facet ``i``; weights sum to its area.

    ``n`` is the number of Gauss points per direction (per fan triangle for
    the top and bottom facets).
    """
    k = state.k
    if i < k:
        origin, u, v, lu, lv = facet_frame(state, i)
        s, ws = _gauss01(n)
        a, b = np.meshgrid(s * lu, s * lv, indexing="ij")
        pts = origin + a.reshape(-1, 1) * u + b.reshape(-1, 1) * v
        wts = np.outer(ws * lu, ws * lv).ravel()
        return pts, wts
    p2, wts = polygon_quadrature(state.vertices, n)
    height = state.top if i == k else state.bottom
    pts = np.column_stack([p2, np.full(p2.shape[0], height)])
    return pts, wts
