"""A smooth family of maps from the initial crystal exterior to the current one.

``Lambda = Psi o Phi``: ``Phi`` rescales the vertical coordinate so that the
initial slab ``[-L/2, L/2]`` lands on ``[L_B(z), L_T(z)]``; ``Psi`` is the
time-1 flow of a planar vector field that drags the initial polygon onto the
current one.  Both reduce to the identity outside a ball of radius
``4 * diam`` (so in particular beyond ``10 * diam``).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, FlowError
from .geometry import BasePolygon, CrystalState, classify, facet_quadrature


def smoothstep(s):
    """C2 quintic ramp: 0 for s <= 0, 1 for s >= 1, zero 1st/2nd derivatives at both ends."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def chi(t):
    """0 on [0, 1/3], 1 on [2/3, 1], C2 in between."""
    return smoothstep(3.0 * np.asarray(t, dtype=float) - 1.0)


@dataclass(frozen=True)
class MappingConfig:
    delta_v: float | None = None  # vertical blend margin, default L/4
    eps_p: float | None = None  # planar cut-off width, default 0.95 * (shortest edge / 2)
    n_flow: int = 64
    identity_factor: float = 10.0

    def resolved(self, base: BasePolygon) -> "MappingConfig":
        edges = np.linalg.norm(np.roll(base.vertices0, -1, axis=0) - base.vertices0, axis=1)
        dv = 0.5 * base.half_height0 if self.delta_v is None else float(self.delta_v)
        ep = 0.95 * 0.5 * edges.min() if self.eps_p is None else float(self.eps_p)
        if not dv > 0:
            raise ConfigError("delta_v must be positive")
        if not 0 < ep < 0.5 * edges.min():
            raise ConfigError("eps_p must be positive and below half the shortest edge")
        if self.n_flow < 16:
            raise ConfigError("n_flow must be >= 16")
        return MappingConfig(dv, ep, int(self.n_flow), float(self.identity_factor))


class VerticalMap:
    """``Phi_3``: affine on the crystal band, rigid translation above/below, identity far away.

    Far away means ``|x3|`` or the planar radius beyond ``far``; in between the
    shift is faded out by C2 ramps, which keeps ``dPhi_3/dx3 > 0``.
    """

    def __init__(self, base: BasePolygon, z_top: float, z_bottom: float, delta: float, far: float):
        self.H = base.half_height0
        self.zt, self.zb = float(z_top), float(z_bottom)
        self.delta = delta
        self.r1, self.r2 = 0.5 * far, far
        self.top = self.H + self.zt
        self.bottom = -self.H - self.zb
        self.scale = (self.top - self.bottom) / (2.0 * self.H)

    def _core(self, x):
        return self.top + (x - self.H) * self.scale

    def radial_weight(self, r):
        return 1.0 - smoothstep((np.asarray(r, dtype=float) - self.r1) / (self.r2 - self.r1))

    def __call__(self, x3, r=None):
        """Image height; with planar radius ``r`` the shift fades out between 2 and 4 diam."""
        x = np.asarray(x3, dtype=float)
        H, d = self.H, self.delta
        core = self._core(x)
        s_up = smoothstep((x - H - d) / d)
        s_dn = smoothstep((-H - d - x) / d)
        out = np.where(
            x >= 0,
            (1.0 - s_up) * core + s_up * (x + self.zt),
            (1.0 - s_dn) * core + s_dn * (x - self.zb),
        )
        band = self.r2 - self.r1
        up_far = x + self.zt * (1.0 - smoothstep((x - self.r1) / band))
        dn_far = x - self.zb * (1.0 - smoothstep((-x - self.r1) / band))
        out = np.where(x >= self.r1, up_far, out)
        out = np.where(x <= -self.r1, dn_far, out)
        out = np.where(np.abs(x) >= self.r2, x, out)
        if r is None:
            return out
        rho = self.radial_weight(r)
        return np.where(rho > 0.0, x + rho * (out - x), x)

    def check_monotone(self, n: int = 4001):
        x = np.linspace(-1.05 * self.r2, 1.05 * self.r2, n)
        if np.any(np.diff(self(x)) <= 0):
            raise ConfigError("vertical map is not monotone; z_top/z_bottom too large for delta_v")


class PlanarFlow:
    """Time-1 flow of ``Upsilon = far(|x|) * zeta(x3) * eta(x) * xi(x)`` in the horizontal plane.

    ``xi`` blends the vertex displacements ``w_i -> w_{i+1}`` across the
    angular sector between the rays through initial vertices ``i`` and
    ``i+1``; ``eta`` is 1 outside W(0) and within ``eps/3`` of its boundary,
    0 deeper than ``2 eps/3`` inside.
    """

    def __init__(self, base: BasePolygon, new_vertices: np.ndarray, eps: float, far: float, n_flow: int):
        self.base = base
        self.w = np.asarray(new_vertices) - base.vertices0
        self.eps = eps
        self.r1, self.r2 = 0.5 * far, far
        self.n_flow = n_flow
        ang = np.arctan2(base.vertices0[:, 1], base.vertices0[:, 0])
        self.theta0 = ang[0]
        self.rel = np.mod(ang - ang[0], 2.0 * np.pi)  # increasing, rel[0] = 0
        self.widths = np.diff(np.append(self.rel, 2.0 * np.pi))

    def eta(self, p):
        d = self.base.offsets - p @ self.base.normals.T  # >0 inside for every edge
        dist = d.min(axis=1)
        inner = 1.0 - smoothstep((dist - self.eps / 3.0) / (self.eps / 3.0))
        return np.where(dist <= 0.0, 1.0, inner)

    def xi(self, p):
        phi = np.mod(np.arctan2(p[:, 1], p[:, 0]) - self.theta0, 2.0 * np.pi)
        sector = np.searchsorted(self.rel, phi, side="right") - 1
        sector = np.clip(sector, 0, self.base.k - 1)
        t = (phi - self.rel[sector]) / self.widths[sector]
        tau = chi(t)[:, None]
        nxt = (sector + 1) % self.base.k
        return (1.0 - tau) * self.w[sector] + tau * self.w[nxt]

    def weight(self, p, x3):
        r = np.linalg.norm(p, axis=1)
        far_p = 1.0 - smoothstep((r - self.r1) / (self.r2 - self.r1))
        far_v = 1.0 - smoothstep((np.abs(x3) - self.r1) / (self.r2 - self.r1))
        return far_p * far_v * self.eta(p)

    def field(self, p, x3):
        wgt = self.weight(p, x3)
        out = np.zeros_like(p)
        on = wgt > 0.0
        if np.any(on):
            out[on] = wgt[on, None] * self.xi(p[on])
        return out

    def __call__(self, p, x3):
        """Flow planar points ``p`` (M, 2) at (image) heights ``x3`` (M,) for unit time."""
        p = np.array(p, dtype=float, copy=True)
        x3 = np.broadcast_to(np.asarray(x3, dtype=float), (p.shape[0],))
        if not np.any(self.w):
            return p
        dt = 1.0 / self.n_flow
        for _ in range(self.n_flow):
            k1 = self.field(p, x3)
            k2 = self.field(p + 0.5 * dt * k1, x3)
            k3 = self.field(p + 0.5 * dt * k2, x3)
            k4 = self.field(p + dt * k3, x3)
            p = p + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return p


@dataclass
class LambdaMap:
    state0: CrystalState
    state: CrystalState
    config: MappingConfig
    phi: VerticalMap
    psi: PlanarFlow

    @property
    def diameter(self) -> float:
        return self.state0.base.diameter

    def __call__(self, x):
        return lambda_apply(self, x)


def build_phi(state0: CrystalState, z, cfg: MappingConfig) -> VerticalMap:
    base = state0.base
    cfg = cfg.resolved(base)
    z = np.asarray(z, dtype=float)
    k = base.k
    if max(abs(z[k]), abs(z[k + 1])) >= 0.5 * cfg.delta_v:
        raise ConfigError("|z_T| and |z_B| must stay below delta_v / 2")
    far = 0.4 * cfg.identity_factor * base.diameter
    phi = VerticalMap(base, z[k], z[k + 1], cfg.delta_v, far)
    phi.check_monotone()
    return phi


def build_psi(state0: CrystalState, z, cfg: MappingConfig, check: bool = True) -> PlanarFlow:
    base = state0.base
    cfg = cfg.resolved(base)
    new = CrystalState.at(base, z).vertices
    flow = PlanarFlow(base, new, cfg.eps_p, 0.4 * cfg.identity_factor * base.diameter, cfg.n_flow)
    if np.max(np.linalg.norm(flow.w, axis=1)) >= cfg.eps_p / 3.0:
        raise ConfigError("vertex displacements exceed eps_p / 3; use a smaller z or larger eps_p")
    if check:
        _check_planar_bijective(flow, base)
    return flow


def _check_planar_bijective(flow: PlanarFlow, base: BasePolygon, n: int = 41):
    r = 1.5 * np.max(np.linalg.norm(base.vertices0, axis=1))
    a = np.linspace(-r, r, n)
    p = np.stack(np.meshgrid(a, a, indexing="ij"), axis=-1).reshape(-1, 2)
    hstep = 1e-6 * base.diameter
    cols = []
    for d in range(2):
        e = np.zeros(2)
        e[d] = hstep
        cols.append((flow(p + e, 0.0) - flow(p - e, 0.0)) / (2 * hstep))
    det = cols[0][:, 0] * cols[1][:, 1] - cols[0][:, 1] * cols[1][:, 0]
    if np.any(det <= 0):
        raise FlowError(f"planar flow is not orientation preserving (min det {det.min():.3g})")


def build_lambda(state0: CrystalState, z, cfg: MappingConfig | None = None, check: bool = True) -> LambdaMap:
    cfg = (cfg or MappingConfig()).resolved(state0.base)
    phi = build_phi(state0, z, cfg)
    psi = build_psi(state0, z, cfg, check=check)
    return LambdaMap(state0, CrystalState.at(state0.base, z), cfg, phi, psi)


def lambda_apply(lam: LambdaMap, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    pts = x.reshape(-1, 3)
    x3 = lam.phi(pts[:, 2], np.linalg.norm(pts[:, :2], axis=1))
    planar = lam.psi(pts[:, :2], x3)
    return np.column_stack([planar, x3]).reshape(x.shape)


def jacobian(lam: LambdaMap, x, step: float | None = None) -> np.ndarray:
    """``|det D Lambda|`` by central differences (default step ``1e-6 * diam``)."""
    pts = np.asarray(x, dtype=float).reshape(-1, 3)
    hj = 1e-6 * lam.diameter if step is None else step
    cols = []
    for d in range(3):
        e = np.zeros(3)
        e[d] = hj
        cols.append((lambda_apply(lam, pts + e) - lambda_apply(lam, pts - e)) / (2.0 * hj))
    jac = np.stack(cols, axis=-1)
    return np.abs(np.linalg.det(jac))


@dataclass(frozen=True)
class JacobianSample:
    point: np.ndarray
    value: float
    inside_support: bool


def jacobian_samples(lam: LambdaMap, points) -> list[JacobianSample]:
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    J = jacobian(lam, pts)
    support = 0.4 * lam.config.identity_factor * lam.diameter
    inside = (np.linalg.norm(pts[:, :2], axis=1) < support) & (np.abs(pts[:, 2]) < support)
    return [JacobianSample(p, float(j), bool(s)) for p, j, s in zip(pts, J, inside)]


def _facet_tangents(state0: CrystalState, i: int):
    k = state0.k
    if i < k:
        n = state0.base.normals[i]
        return np.array([-n[1], n[0], 0.0]), np.array([0.0, 0.0, 1.0])
    return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])


def pullback_facet_integral(lam: LambdaMap, i: int, integrand, n: int = 32, step: float | None = None) -> float:
    """``int_{S_i(0)} F(Lambda(x)) |d_u Lambda x d_v Lambda| dA``: the integral of F over S_i(z)."""
    pts, w = facet_quadrature(lam.state0, i, n)
    u, v = _facet_tangents(lam.state0, i)
    hj = 1e-6 * lam.diameter if step is None else step
    du = (lambda_apply(lam, pts + hj * u) - lambda_apply(lam, pts - hj * u)) / (2.0 * hj)
    dv = (lambda_apply(lam, pts + hj * v) - lambda_apply(lam, pts - hj * v)) / (2.0 * hj)
    js = np.linalg.norm(np.cross(du, dv), axis=1)
    vals = np.asarray(integrand(lambda_apply(lam, pts)), dtype=float)
    return float(np.sum(w * vals * js))


def distance_to_boundary(state: CrystalState, points) -> np.ndarray:
    """Exact Euclidean distance from points to the prism surface."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    k = state.k
    v = state.vertices
    best = np.full(pts.shape[0], np.inf)
    for i in range(k):
        a = np.array([v[i, 0], v[i, 1], state.bottom])
        e = np.array([v[(i + 1) % k, 0] - v[i, 0], v[(i + 1) % k, 1] - v[i, 1], 0.0])
        le = np.linalg.norm(e)
        u = e / le
        rel = pts - a
        su = np.clip(rel @ u, 0.0, le)
        sz = np.clip(rel[:, 2], 0.0, state.height)
        q = a + su[:, None] * u + sz[:, None] * np.array([0.0, 0.0, 1.0])
        best = np.minimum(best, np.linalg.norm(pts - q, axis=1))
    for height in (state.top, state.bottom):
        planar = pts[:, :2]
        s = planar @ state.base.normals.T - (state.base.offsets + state.z[:k])
        inside = np.all(s <= 0, axis=1)
        d_in = np.abs(pts[:, 2] - height)
        best = np.where(inside, np.minimum(best, d_in), best)
    return best


def boundary_samples(state: CrystalState, n: int, rng) -> np.ndarray:
    """``n`` random points on the prism surface (facet chosen uniformly, then a uniform point)."""
    k = state.k
    out = np.empty((n, 3))
    facets = rng.integers(0, k + 2, size=n)
    for j, i in enumerate(facets):
        if i < k:
            a, b = state.vertices[i], state.vertices[(i + 1) % k]
            s = rng.random()
            out[j, :2] = a + s * (b - a)
            out[j, 2] = state.bottom + rng.random() * state.height
        else:
            while True:
                lo, hi = state.vertices.min(axis=0), state.vertices.max(axis=0)
                p = lo + rng.random(2) * (hi - lo)
                if np.all(state.base.normals @ p <= state.base.offsets + state.z[:k]):
                    break
            out[j, :2] = p
            out[j, 2] = state.top if i == k else state.bottom
    return out


def exterior_cloud(state0: CrystalState, n: int = 20, pad: float = 0.5) -> np.ndarray:
    """Regular ``n^3`` lattice around the crystal, restricted to exterior points."""
    c = state0.corners()
    lo, hi = c.min(axis=0), c.max(axis=0)
    span = hi - lo
    axes = [np.linspace(lo[d] - pad * span[d], hi[d] + pad * span[d], n) for d in range(3)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    label, _ = classify(state0, pts)
    return pts[label > 0]


@dataclass
class MappingReport:
    identity_error: float
    far_identity_exact: bool
    jacobian_min: float
    jacobian_max: float
    vertex_error: float
    boundary_distance: float
    vertical_edge_error: float
    diameter: float

    def checks(self):
        d = self.diameter
        return {
            "identity at z=0 (<= 1e-12)": self.identity_error <= 1e-12,
            "identity beyond 10 diam (exact)": self.far_identity_exact,
            "jacobian positive": self.jacobian_min > 0,
            "vertex images (<= 1e-6 diam)": self.vertex_error <= 1e-6 * d,
            "boundary to boundary (<= 1e-5 diam)": self.boundary_distance <= 1e-5 * d,
            "vertical edges to vertical edges (<= 1e-5 diam)": self.vertical_edge_error <= 1e-5 * d,
        }


def verify_mapping(base: BasePolygon, z, cfg: MappingConfig | None = None, rng=None,
                   n_points: int = 1000, n_boundary: int = 200, cloud: int = 20) -> MappingReport:
    """Sampled checks of the map family for a given ``z``."""
    rng = np.random.default_rng(0) if rng is None else rng
    state0 = CrystalState.at(base)
    d = base.diameter
    lam0 = build_lambda(state0, np.zeros(base.n_facets), cfg)
    pts = (rng.random((n_points, 3)) - 0.5) * 4.0 * d
    ident = float(np.max(np.abs(lambda_apply(lam0, pts) - pts)))

    lam = build_lambda(state0, z, cfg)
    dirs = rng.normal(size=(n_points, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    far_pts = dirs * d * (10.0 + 40.0 * rng.random((n_points, 1)))
    far_exact = bool(np.array_equal(lambda_apply(lam, far_pts), far_pts))

    J = jacobian(lam, exterior_cloud(state0, cloud))

    corners0 = state0.corners()
    vert_err = float(np.max(np.linalg.norm(lambda_apply(lam, corners0) - lam.state.corners(), axis=1)))

    bpts = boundary_samples(state0, n_boundary, rng)
    bdist = float(np.max(distance_to_boundary(lam.state, lambda_apply(lam, bpts))))

    s = np.linspace(0.0, 1.0, 11)
    k = base.k
    edge_err = 0.0
    for i in range(k):
        line = np.column_stack([
            np.full(s.size, base.vertices0[i, 0]),
            np.full(s.size, base.vertices0[i, 1]),
            -base.half_height0 + s * 2.0 * base.half_height0,
        ])
        img = lambda_apply(lam, line)
        edge_err = max(edge_err, float(np.max(np.linalg.norm(img[:, :2] - lam.state.vertices[i], axis=1))))
    return MappingReport(ident, far_exact, float(J.min()), float(J.max()), vert_err, bdist, edge_err, d)
