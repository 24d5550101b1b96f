"""Compactly supported extensions h_i with d h_i / d n_j = delta_ij on the facets.

Each ``h_i`` is the signed distance to facet i's plane multiplied by a cut-off
that equals 1 near facet i and vanishes near every other facet.  The cut-off
for facet ``i`` is the product over ``j != i`` of a ramp in the signed
distance to plane ``j`` divided by ``sin`` of the angle between the two
normals, which on facet i is the in-facet distance to the line where plane j
cuts it (parallel planes use the raw distance).  The ramp is 1 at least
``eps`` inside and 0 within ``eps/4`` of plane j (or outside).  On facet i away from its
edges every other plane is at least ``eps`` away, so the cut-off is locally 1;
on facet j the ramp for plane j is locally 0, so both ``h_i`` and its gradient
vanish there.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .geometry import CrystalState, facet_quadrature, measures
from .mapping import smoothstep


def _min_facet_size(state: CrystalState) -> float:
    m = measures(state)
    return float(min(m.edge_lengths.min(), m.height))


@dataclass(frozen=True)
class Extension:
    """``h_i(x) = cutoff_i(x) * ((x - p_i) . n_i)``, zero beyond ``support``."""

    facet: int
    normals: np.ndarray  # (N+2, 3) plane normals of the initial crystal
    offsets: np.ndarray  # (N+2,)
    eps: float
    support: float
    scale: np.ndarray  # (N+2,) sin of the angle to facet i's normal (1 if parallel)

    def plane_distance(self, x):
        return x @ self.normals.T - self.offsets

    def cutoff(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, 3)
        d = self.plane_distance(x)
        q = 1.0 - smoothstep((d / self.scale + self.eps) / (0.75 * self.eps))
        q[:, self.facet] = 1.0
        r = np.linalg.norm(x, axis=1)
        far = 1.0 - smoothstep((r - 0.5 * self.support) / (0.5 * self.support))
        return far * np.prod(q, axis=1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        pts = x.reshape(-1, 3)
        val = self.cutoff(pts) * self.plane_distance(pts)[:, self.facet]
        val = np.where(np.linalg.norm(pts, axis=1) >= self.support, 0.0, val)
        return val.reshape(x.shape[:-1])


@dataclass(frozen=True)
class ExtensionSet:
    extensions: tuple
    eps_cut: float
    support: float

    def __len__(self):
        return len(self.extensions)

    def __getitem__(self, i):
        return self.extensions[i]


def _check_eps(state0: CrystalState, eps_cut: float):
    m = measures(state0)
    if not (0 < eps_cut < 0.5 * m.edge_lengths.min() and eps_cut < 0.5 * m.height):
        raise ConfigError("eps_cut must be positive and below half the shortest edge and half the height")


def default_eps_cut(state0: CrystalState) -> float:
    return 0.1 * _min_facet_size(state0)


def build_extension(state0: CrystalState, i: int, eps_cut: float | None = None, support_factor: float = 10.0) -> Extension:
    eps = default_eps_cut(state0) if eps_cut is None else float(eps_cut)
    _check_eps(state0, eps)
    if not 0 <= i < state0.base.n_facets:
        raise IndexError(f"facet index {i} out of range")
    normals = state0.base.normals3.copy()
    sin = np.linalg.norm(np.cross(normals, normals[i]), axis=1)
    scale = np.where(sin > 1e-9, sin, 1.0)
    return Extension(i, normals, state0.plane_offsets.copy(), eps, support_factor * state0.diameter, scale)


def build_extensions(state0: CrystalState, eps_cut: float | None = None, support_factor: float = 10.0) -> ExtensionSet:
    eps = default_eps_cut(state0) if eps_cut is None else float(eps_cut)
    ext = tuple(build_extension(state0, i, eps, support_factor) for i in range(state0.base.n_facets))
    return ExtensionSet(ext, eps, ext[0].support)


def assemble_G(extensions: ExtensionSet, g):
    """``G(x) = sum_i g_i h_i(x)`` as a callable on ``(..., 3)`` arrays."""
    g = np.asarray(g, dtype=float)
    if g.shape != (len(extensions),):
        raise ValueError(f"g must have length {len(extensions)}")
    active = [(gi, h) for gi, h in zip(g, extensions.extensions) if gi != 0.0]

    def G(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1])
        for gi, h in active:
            out = out + gi * h(x)
        return out

    return G


def normal_derivative(fn, points, normal, step: float = 1e-6) -> np.ndarray:
    """Central difference of ``fn`` along ``normal`` at ``points``."""
    points = np.asarray(points, dtype=float)
    n = np.asarray(normal, dtype=float)
    return (fn(points + step * n) - fn(points - step * n)) / (2.0 * step)


def interior_facet_points(state0: CrystalState, j: int, margin: float, n: int = 6) -> np.ndarray:
    """Quadrature points of facet j at least ``margin`` from its edges."""
    pts, _ = facet_quadrature(state0, j, n)
    normals = state0.base.normals3
    sin = np.linalg.norm(np.cross(normals, normals[j]), axis=1)
    d = (pts @ normals.T - state0.plane_offsets) / np.where(sin > 1e-9, sin, 1.0)
    d[:, j] = -np.inf
    return pts[d.max(axis=1) <= -margin]


@dataclass
class ExtensionReport:
    kronecker_error: np.ndarray  # (N+2, N+2) max |d h_i/d n_j - delta_ij|
    support_max: float  # max |h_i| sampled beyond the support radius
    linearity_exact: bool  # G(0) = 0, G(e_j) = h_j and G(2^m g) = 2^m G(g), bitwise
    superposition_error: float  # |G(g1+g2) - G(g1) - G(g2)| / max|G|, rounding only
    n_points: int

    @property
    def max_kronecker_error(self) -> float:
        return float(self.kronecker_error.max())

    def checks(self):
        return {
            "d h_i / d n_j = delta_ij (<= 1e-4)": self.max_kronecker_error <= 1e-4,
            "zero beyond 10 diam (exact)": self.support_max == 0.0,
            "assemble_G linear (exact)": self.linearity_exact,
            "superposition (<= 1e-13 relative)": self.superposition_error <= 1e-13,
        }


def verify_extensions(state0: CrystalState, eps_cut: float | None = None, rng=None, n_far: int = 1000) -> ExtensionReport:
    rng = np.random.default_rng(0) if rng is None else rng
    ext = build_extensions(state0, eps_cut)
    N = len(ext)
    normals = state0.base.normals3
    err = np.zeros((N, N))
    count = 0
    for j in range(N):
        pts = interior_facet_points(state0, j, 2.0 * ext.eps_cut)
        count += len(pts)
        for i in range(N):
            dn = normal_derivative(ext[i], pts, normals[j])
            err[i, j] = np.max(np.abs(dn - (1.0 if i == j else 0.0)))

    dirs = rng.normal(size=(n_far, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    far = dirs * ext.support * (1.0 + 4.0 * rng.random((n_far, 1)))
    support_max = max(float(np.max(np.abs(h(far)))) for h in ext.extensions)

    pts = (rng.random((500, 3)) - 0.5) * 3.0 * state0.diameter
    exact = bool(np.all(assemble_G(ext, np.zeros(N))(pts) == 0.0))
    for j in range(N):
        exact &= bool(np.array_equal(assemble_G(ext, np.eye(N)[j])(pts), ext[j](pts)))
    g1, g2 = rng.normal(size=N), rng.normal(size=N)
    G1 = assemble_G(ext, g1)(pts)
    for m in (-3, 1, 5):
        exact &= bool(np.array_equal(assemble_G(ext, 2.0**m * g1)(pts), 2.0**m * G1))
    G2 = assemble_G(ext, g2)(pts)
    G12 = assemble_G(ext, g1 + g2)(pts)
    scale = max(np.max(np.abs(G1)), np.max(np.abs(G2)), 1e-300)
    sup = float(np.max(np.abs(G12 - G1 - G2)) / scale)
    return ExtensionReport(err, support_max, exact, sup, count)
