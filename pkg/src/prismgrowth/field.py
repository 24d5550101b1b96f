"""Exterior drift-diffusion of the supersaturation on a truncated Cartesian box.

Normal convention: every flux value ``g[i]`` is ``d sigma / d n`` along the
*crystal-outward* normal of facet ``i``.  The exterior domain's own outward
normal points into the crystal, so ``g_exterior = -g``.

The crystal boundary is a voxel staircase.  Each staircase face between an
exterior cell and a crystal cell carries the ghost closure
``sigma_ghost = sigma_cell - h * g[i] * (n_i . e)`` where ``e`` is the unit
axis pointing from the crystal cell into the exterior cell; summed over a
planar facet the weights ``n_i . e`` reproduce its area, so the total
flux through each facet is ``g[i] * area`` up to O(h) edge effects.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import ConfigError, DomainError, StabilityError
from .geometry import CrystalState, classify, facet_quadrature
from .kernels import CRYSTAL, DIRICHLET, EXTERIOR

MIN_MARGIN_FACTOR = 3.0


@dataclass(frozen=True, eq=False)
class BoundaryFaces:
    """Staircase faces between active cells and crystal cells."""

    cell: np.ndarray  # flat index into the padded array
    facet: np.ndarray
    weight: np.ndarray  # n_facet . e

    def __len__(self):
        return self.cell.shape[0]


@dataclass(frozen=True, eq=False)
class FieldGrid:
    h: float
    half_width: float
    center: np.ndarray
    sigma: np.ndarray  # padded (n+2)^3; padding holds the Dirichlet values
    mask: np.ndarray  # padded int8 codes, see kernels
    facet_id: np.ndarray  # padded int16; nearest facet for crystal-adjacent active cells, -1 elsewhere
    faces: BoundaryFaces
    normals3: np.ndarray
    sigma_inf: float
    g: np.ndarray
    drift: np.ndarray | None = None  # padded (3, n+2, n+2, n+2)
    t: float = 0.0

    @property
    def n(self) -> int:
        return self.sigma.shape[0] - 2

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.half_width

    def axis(self) -> np.ndarray:
        """Cell-centre offsets along one axis, padding included (add ``center[d]``)."""
        return -self.half_width + (np.arange(self.n + 2) - 0.5) * self.h

    def cell_centers(self, padded: bool = False):
        """Meshgrid of cell-centre coordinates (x, y, z)."""
        a = self.axis()
        if not padded:
            a = a[1:-1]
        return np.meshgrid(a + self.center[0], a + self.center[1], a + self.center[2], indexing="ij")

    @property
    def active(self) -> np.ndarray:
        return self.mask[1:-1, 1:-1, 1:-1] == EXTERIOR

    @property
    def drift_sup(self) -> float:
        if self.drift is None:
            return 0.0
        return float(np.max(np.linalg.norm(self.drift, axis=0)))

    def stable_dt(self) -> float:
        """Largest explicit step: ``h^2 / (6 + 3 h |f|_inf)``."""
        h = self.h
        return h * h / (6.0 + 3.0 * h * self.drift_sup)

    def mass(self) -> float:
        return float(np.sum(self.sigma[1:-1, 1:-1, 1:-1][self.active])) * self.h**3

    def with_g(self, g) -> "FieldGrid":
        g = np.asarray(g, dtype=float)
        if g.shape != self.g.shape:
            raise ConfigError(f"g must have {self.g.size} entries")
        return replace(self, g=g)


def _axis_offsets(n, h, half_width):
    return -half_width + (np.arange(n + 2) - 0.5) * h


def _index_range(lo, hi, offsets, center):
    """Padded index range of cell centres lying in ``[lo, hi]`` (clipped to the active block)."""
    c = offsets + center
    i0 = max(1, int(np.searchsorted(c, lo, side="left")))
    i1 = min(len(c) - 1, int(np.searchsorted(c, hi, side="right")))
    return i0, i1


def crystal_mask(state: CrystalState, n, h, half_width, center):
    """Padded mask: crystal cells are those whose centres are inside or on the crystal."""
    mask = np.zeros((n + 2,) * 3, dtype=np.int8)
    mask[0, :, :] = mask[-1, :, :] = DIRICHLET
    mask[:, 0, :] = mask[:, -1, :] = DIRICHLET
    mask[:, :, 0] = mask[:, :, -1] = DIRICHLET
    offs = _axis_offsets(n, h, half_width)
    v = state.vertices
    lo = np.array([v[:, 0].min(), v[:, 1].min(), state.bottom])
    hi = np.array([v[:, 0].max(), v[:, 1].max(), state.top])
    rng = [_index_range(lo[d], hi[d], offs, center[d]) for d in range(3)]
    if any(r[1] <= r[0] for r in rng):
        return mask
    axes = [offs[r[0] : r[1]] + center[d] for d, r in enumerate(rng)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    label, _ = classify(state, pts)
    block = (label <= 0).reshape([r[1] - r[0] for r in rng])
    sl = tuple(slice(r[0], r[1]) for r in rng)
    mask[sl] = np.where(block, CRYSTAL, EXTERIOR).astype(np.int8)
    return mask


def boundary_faces(state: CrystalState, mask, h, half_width, center):
    """Enumerate staircase faces and assign each the facet nearest its centre."""
    n = mask.shape[0] - 2
    offs = _axis_offsets(n, h, half_width)
    cells, facets, weights = [], [], []
    normals = state.base.normals3
    for axis in range(3):
        for s in (-1, 1):
            nb = np.roll(mask, -s, axis=axis)
            hit = (mask == EXTERIOR) & (nb == CRYSTAL)
            idx = np.argwhere(hit)
            if idx.size == 0:
                continue
            centers = np.stack([offs[idx[:, d]] + center[d] for d in range(3)], axis=1)
            face_pts = centers.copy()
            face_pts[:, axis] += 0.5 * s * h
            _, facet = classify(state, face_pts)
            e = np.zeros(3)
            e[axis] = -s
            cells.append(np.ravel_multi_index(idx.T, mask.shape))
            facets.append(facet)
            weights.append(normals[facet] @ e)
    if not cells:
        empty = np.zeros(0)
        return BoundaryFaces(empty.astype(np.int64), empty.astype(np.int64), empty)
    cell = np.concatenate(cells)
    order = np.argsort(cell, kind="stable")
    return BoundaryFaces(cell[order], np.concatenate(facets)[order], np.concatenate(weights)[order])


def _facet_ids(state, faces, mask, h, half_width, center):
    ids = np.full(mask.shape, -1, dtype=np.int16)
    if len(faces) == 0:
        return ids
    cells = np.unique(faces.cell)
    idx = np.array(np.unravel_index(cells, mask.shape))
    offs = _axis_offsets(mask.shape[0] - 2, h, half_width)
    pts = np.stack([offs[idx[d]] + center[d] for d in range(3)], axis=1)
    _, facet = classify(state, pts)
    ids.ravel()[cells] = facet
    return ids


def drift_field(spec, n, h, half_width, center):
    """Sample a drift spec on the padded grid.

    ``spec`` is ``None``/``"zero"``, a 3-vector (constant drift), a dict
    ``{"kind": "constant", "vector": [...]}`` or ``{"kind": "rotation",
    "omega": w}`` for ``f = w (-y, x, 0)``, or a callable ``f(x, y, z) -> (fx, fy, fz)``.
    """
    if spec is None or (isinstance(spec, str) and spec == "zero"):
        return None
    offs = _axis_offsets(n, h, half_width)
    x, y, z = np.meshgrid(offs + center[0], offs + center[1], offs + center[2], indexing="ij")
    if callable(spec):
        f = np.stack([np.broadcast_to(c, x.shape) for c in spec(x, y, z)]).astype(float)
    else:
        if isinstance(spec, dict):
            kind = spec.get("kind", "constant")
            if kind == "zero":
                return None
            if kind == "constant":
                vec = spec["vector"]
            elif kind == "rotation":
                w = float(spec["omega"])
                return np.stack([-w * y, w * x, np.zeros_like(z)])
            else:
                raise ConfigError(f"unknown drift kind {kind!r}")
        else:
            vec = spec
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (3,):
            raise ConfigError("constant drift must be a 3-vector")
        if not np.any(vec):
            return None
        f = np.broadcast_to(vec[:, None, None, None], (3,) + x.shape).copy()
    if not np.all(np.isfinite(f)):
        raise ConfigError("drift field must be bounded")
    return f


def build_grid(
    state: CrystalState,
    h: float,
    half_width: float,
    sigma_inf: float = 0.0,
    drift=None,
    g=None,
    center=(0.0, 0.0, 0.0),
    margin_factor: float = MIN_MARGIN_FACTOR,
) -> FieldGrid:
    """Box ``center +- half_width`` with ``2*half_width/h`` cells per axis, sigma = sigma_inf."""
    if not h > 0:
        raise ConfigError("grid spacing must be positive")
    cells = 2.0 * half_width / h
    n = int(round(cells))
    if n < 4 or abs(cells - n) > 1e-9 * max(1.0, cells):
        raise ConfigError("2 * half_width must be an integer multiple (>= 4) of h")
    diam = state.diameter
    if half_width < margin_factor * diam:
        raise ConfigError(f"half_width {half_width:g} < {margin_factor:g} x crystal diameter {diam:g}")
    center = np.asarray(center, dtype=float)
    if np.any(np.abs(state.corners() - center) >= half_width):
        raise ConfigError("crystal must lie inside the box")
    nf = state.n_facets
    g = np.zeros(nf) if g is None else np.asarray(g, dtype=float)
    if g.shape != (nf,):
        raise ConfigError(f"g must have {nf} entries")
    mask = crystal_mask(state, n, h, half_width, center)
    faces = boundary_faces(state, mask, h, half_width, center)
    return FieldGrid(
        h=float(h),
        half_width=float(half_width),
        center=center,
        sigma=np.full(mask.shape, float(sigma_inf)),
        mask=mask,
        facet_id=_facet_ids(state, faces, mask, h, half_width, center),
        faces=faces,
        normals3=state.base.normals3,
        sigma_inf=float(sigma_inf),
        g=g,
        drift=drift_field(drift, n, h, half_width, center),
    )


def neumann_source(grid: FieldGrid) -> np.ndarray:
    """Padded per-cell rate contributed by the crystal flux closure."""
    src = np.zeros(grid.sigma.shape)
    f = grid.faces
    if len(f):
        np.add.at(src.ravel(), f.cell, -grid.g[f.facet] * f.weight / grid.h)
    return src


def _padded(source, shape):
    if source is None:
        return None
    source = np.asarray(source, dtype=float)
    out = np.zeros(shape)
    out[1:-1, 1:-1, 1:-1] = source
    return out


def step_field(grid: FieldGrid, dt: float, source=None, backend=None) -> FieldGrid:
    """One explicit Euler step of ``sigma_t = lap(sigma) + f . grad(sigma) (+ source)``.

    ``source`` (optional, unpadded ``(n, n, n)``) is a volumetric forcing
    evaluated at the current time; it exists for manufactured-solution checks.
    """
    if not dt > 0:
        raise StabilityError("dt must be positive")
    bound = grid.stable_dt()
    if dt > bound * (1.0 + 1e-12):
        raise StabilityError(f"dt={dt:.6g} exceeds the explicit bound {bound:.6g}")
    src = neumann_source(grid)
    extra = _padded(source, src.shape)
    if extra is not None:
        src += extra
    new = kernels.diffusion_step(grid.sigma, grid.mask, src, grid.drift, grid.h, dt, backend=backend)
    return replace(grid, sigma=new, t=grid.t + dt)


def with_boundary_values(grid: FieldGrid, fn) -> FieldGrid:
    """Set the Dirichlet padding from ``fn(x, y, z)`` evaluated at padding cell centres."""
    pad = grid.mask == DIRICHLET
    a = grid.axis()
    i, j, k = np.nonzero(pad)
    vals = np.asarray(fn(a[i] + grid.center[0], a[j] + grid.center[1], a[k] + grid.center[2]), dtype=float)
    sig = grid.sigma.copy()
    sig[pad] = vals
    return replace(grid, sigma=sig)


def interpolate(grid: FieldGrid, points: np.ndarray) -> np.ndarray:
    """Trilinear interpolation using only non-crystal corners (weights renormalised)."""
    p = np.asarray(points, dtype=float).reshape(-1, 3)
    q = (p - grid.lower) / grid.h + 0.5  # padded index coordinates
    i0 = np.floor(q).astype(np.int64)
    i0 = np.clip(i0, 0, grid.n)
    fr = q - i0
    num = np.zeros(p.shape[0])
    den = np.zeros(p.shape[0])
    for corner in range(8):
        off = np.array([(corner >> 2) & 1, (corner >> 1) & 1, corner & 1])
        idx = i0 + off
        w = np.prod(np.where(off == 1, fr, 1.0 - fr), axis=1)
        ii, jj, kk = idx.T
        ok = grid.mask[ii, jj, kk] != CRYSTAL
        w = np.where(ok, w, 0.0)
        num += w * grid.sigma[ii, jj, kk]
        den += w
    if np.any(den <= 0):
        raise ValueError("interpolation point surrounded by crystal cells")
    return num / den


def facet_average(grid: FieldGrid, state: CrystalState, i: int) -> float:
    """Mean of sigma over facet ``i``, sampled h/2 outside the facet.

    The offset biases the result by ``h/2 * d sigma/dn``.
    """
    k = state.k
    if i < k:
        m = np.linalg.norm(state.vertices[(i + 1) % k] - state.vertices[i])
        size = max(m, state.height)
    else:
        v = state.vertices
        size = np.max(np.linalg.norm(v[:, None] - v[None], axis=-1))
    npts = max(2, int(np.ceil(size / grid.h)) + 1)
    pts, w = facet_quadrature(state, i, npts)
    pts = pts + 0.5 * grid.h * state.base.normals3[i]
    vals = interpolate(grid, pts)
    return float(np.dot(w, vals) / np.sum(w))


def facet_averages(grid: FieldGrid, state: CrystalState) -> np.ndarray:
    return np.array([facet_average(grid, state, i) for i in range(state.n_facets)])


@dataclass(frozen=True)
class FluxBudget:
    """Discrete mass balance of one explicit step (rates are per unit time)."""

    facet_flux: np.ndarray  # rate of mass gained through each facet
    outer_flux: float
    drift_rate: float
    source_rate: float
    mass_before: float
    mass_after: float
    dt: float
    residual: float  # |dM - dt * (sum of rates)|, mass units
    mass_scale: float  # h^3 * sum|sigma| over active cells

    @property
    def total_rate(self) -> float:
        return float(self.facet_flux.sum() + self.outer_flux + self.drift_rate + self.source_rate)


def flux_budget(before: FieldGrid, after: FieldGrid, dt: float, source=None) -> FluxBudget:
    """Mass balance of ``after = step_field(before, dt, source)`` on a fixed mask."""
    if before.mask.shape != after.mask.shape or not np.array_equal(before.mask, after.mask):
        raise ValueError("flux budget needs both grids on the same mask")
    h3 = before.h**3
    inner = (slice(1, -1),) * 3
    act = before.active
    s0 = before.sigma
    f = before.faces
    facet_flux = np.zeros(before.g.size)
    if len(f):
        np.add.at(facet_flux, f.facet, -before.g[f.facet] * f.weight * before.h**2)
    outer = 0.0
    c = s0[inner]
    for axis, s in kernels._SHIFTS:
        nbm = kernels._view(before.mask, axis, s)
        sel = act & (nbm == DIRICHLET)
        outer += float(np.sum(kernels._view(s0, axis, s)[sel] - c[sel])) * before.h
    adv = float(np.sum(kernels.drift_rate(s0, before.mask, before.drift, before.h)[act])) * h3
    src = 0.0 if source is None else float(np.sum(np.asarray(source)[act])) * h3
    dmass = float(np.sum((after.sigma[inner] - c)[act])) * h3
    total = facet_flux.sum() + outer + adv + src
    return FluxBudget(
        facet_flux=facet_flux,
        outer_flux=outer,
        drift_rate=adv,
        source_rate=src,
        mass_before=before.mass(),
        mass_after=after.mass(),
        dt=dt,
        residual=abs(dmass - dt * total),
        mass_scale=float(np.sum(np.abs(c[act]))) * h3,
    )


def remask(grid: FieldGrid, state: CrystalState) -> FieldGrid:
    """Re-classify cells for a moved crystal.

    Newly exposed cells take the value of their nearest previously active
    cell; swallowed cells simply become crystal.  Raises DomainError once the
    crystal comes within two cells of the box faces.
    """
    reach = np.max(np.abs(state.corners() - grid.center))
    if reach >= grid.half_width - 2.0 * grid.h:
        raise DomainError(f"crystal extends to {reach:.4g}, too close to the box half-width {grid.half_width:.4g}")
    n = grid.n
    mask = crystal_mask(state, n, grid.h, grid.half_width, grid.center)
    sigma = grid.sigma
    if not np.array_equal(mask, grid.mask):
        new = (mask == EXTERIOR) & (grid.mask == CRYSTAL)
        if new.any():
            sigma = sigma.copy()
            idx = np.argwhere(new)
            lo = np.maximum(idx.min(axis=0) - 3, 0)
            hi = np.minimum(idx.max(axis=0) + 4, n + 2)
            sl = tuple(slice(a, b) for a, b in zip(lo, hi))
            old_open = grid.mask[sl] != CRYSTAL
            if not old_open.any():
                sl = (slice(None),) * 3
                old_open = grid.mask != CRYSTAL
            _, near = ndimage.distance_transform_edt(~old_open, return_indices=True)
            local = sigma[sl]
            filled = local[tuple(near)]
            local[new[sl]] = filled[new[sl]]
    faces = boundary_faces(state, mask, grid.h, grid.half_width, grid.center)
    return replace(
        grid,
        sigma=sigma,
        mask=mask,
        faces=faces,
        facet_id=_facet_ids(state, faces, mask, grid.h, grid.half_width, grid.center),
    )
