"""Prismatic surface energy density, Frank diagram, Wulff shape and crystalline curvature."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import BasePolygon, CrystalState, measures


@dataclass(frozen=True)
class Anisotropy:
    """k-fold prismatic energy density: gamma_L on the lateral Wulff normals, gamma_T on +-e3."""

    k: int = 6
    gamma_lateral: float = 1.0
    gamma_top: float = 1.0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 3:
            raise ConfigError("k must be an integer >= 3")
        if not (self.gamma_lateral > 0 and self.gamma_top > 0):
            raise ConfigError("gamma_lateral and gamma_top must be positive")

    @property
    def sector_angle(self) -> float:
        return 2.0 * np.pi / self.k

    @property
    def rotation(self) -> np.ndarray:
        """The sector rotation T_k."""
        t = self.sector_angle
        return np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])

    def facet_normals(self) -> np.ndarray:
        ang = np.arange(self.k) * self.sector_angle
        n = np.zeros((self.k + 2, 3))
        n[: self.k, 0] = np.cos(ang)
        n[: self.k, 1] = np.sin(ang)
        n[self.k, 2] = 1.0
        n[self.k + 1, 2] = -1.0
        return n

    def scaled(self, c: float) -> "Anisotropy":
        return Anisotropy(self.k, c * self.gamma_lateral, c * self.gamma_top)


def gamma(aniso: Anisotropy, x) -> np.ndarray:
    """Surface energy density at ``x`` (any shape ``(..., 3)``).

    In planar sector ``A_i`` (between the lateral normals ``i`` and ``i+1``)
    the planar part is ``gamma_L * (y1 + tan(pi/k) * y2)`` with ``y`` the point
    rotated back by ``i`` sector angles.
    """
    x = np.asarray(x, dtype=float)
    t = aniso.sector_angle
    phi = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2.0 * np.pi)
    sector = np.minimum(np.floor(phi / t), aniso.k - 1)
    c, s = np.cos(sector * t), np.sin(sector * t)
    y1 = c * x[..., 0] + s * x[..., 1]
    y2 = -s * x[..., 0] + c * x[..., 1]
    planar = aniso.gamma_lateral * (y1 + np.tan(t / 2.0) * y2)
    return planar + np.abs(x[..., 2]) * aniso.gamma_top


def frank_diagram(aniso: Anisotropy) -> np.ndarray:
    """Vertices of the bipyramid ``{gamma <= 1}``: k base vertices, then the two apexes."""
    n = aniso.facet_normals()
    verts = n.copy()
    verts[: aniso.k] /= aniso.gamma_lateral
    verts[aniso.k :] /= aniso.gamma_top
    return verts


@dataclass(frozen=True)
class WulffPrism:
    k: int
    inradius: float
    half_height: float
    normals: np.ndarray

    @property
    def side(self) -> float:
        return 2.0 * self.inradius * np.tan(np.pi / self.k)

    def base(self, scale: float = 1.0) -> BasePolygon:
        return BasePolygon.regular(self.k, scale * self.inradius, scale * self.half_height)

    def state(self, scale: float = 1.0) -> CrystalState:
        return CrystalState.at(self.base(scale))

    def vertices(self) -> np.ndarray:
        return self.state().corners()


def wulff_shape(aniso: Anisotropy) -> WulffPrism:
    return WulffPrism(aniso.k, aniso.gamma_lateral, aniso.gamma_top, aniso.facet_normals())


def surface_energy(state: CrystalState, aniso: Anisotropy) -> float:
    m = measures(state)
    return float(np.dot(gamma(aniso, state.base.normals3), m.facet_areas))


@dataclass(frozen=True)
class CurvatureReport:
    kappa: np.ndarray
    energy: float
    volume: float


def crystalline_curvature(state: CrystalState, aniso: Anisotropy) -> CurvatureReport:
    """Closed-form facet curvatures of a prism.

    The lateral term in ``top+bottom`` energy enters with a minus sign, which
    is what ``-lim dE/dV`` gives for an outward translation of a side facet.
    """
    m = measures(state)
    k = state.k
    g = gamma(aniso, state.base.normals3)
    gl, gt, gb = g[:k], g[k], g[k + 1]
    lj = m.edge_lengths
    a0 = m.interior_angles  # at the start vertex of edge j
    a1 = np.roll(a0, -1)  # at its end vertex
    kappa = np.empty(k + 2)
    kappa[:k] = (
        -((1.0 / np.tan(a0) + 1.0 / np.tan(a1)) * gl + np.roll(gl, 1) / np.sin(a0) + np.roll(gl, -1) / np.sin(a1))
        / lj
        - (gt + gb) / m.height
    )
    kappa[k] = -np.dot(lj, gl) / m.top_area
    kappa[k + 1] = kappa[k]
    energy = float(np.dot(g, m.facet_areas))
    return CurvatureReport(kappa, energy, m.volume)


def curvature_oracle(
    state: CrystalState,
    aniso: Anisotropy,
    i: int,
    a: float | None = None,
    extrapolate: bool = True,
) -> float:
    """``-dE/dV`` for an outward translation of facet ``i`` by finite differences.

    With ``extrapolate`` the O(a) bias is removed by combining steps ``a`` and ``a/2``.
    """
    m0 = measures(state)
    if a is None:
        a = 1e-4 * min(m0.edge_lengths.min(), m0.height)
    e0, v0 = surface_energy(state, aniso), m0.volume

    def ratio(step):
        z = state.z.copy()
        z[i] += step
        s = state.with_z(z)
        return -(surface_energy(s, aniso) - e0) / (measures(s).volume - v0)

    if not extrapolate:
        return float(ratio(a))
    return float(2.0 * ratio(a / 2.0) - ratio(a))
