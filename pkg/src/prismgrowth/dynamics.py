"""Facet velocities from the averaged Gibbs-Thomson law and the facet-distance ODE."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .energy import Anisotropy, CurvatureReport, crystalline_curvature
from .errors import ConfigError, DegenerateGeometry
from .geometry import CrystalState


@dataclass(frozen=True)
class KineticParams:
    beta: np.ndarray

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if not np.all(np.isfinite(b)) or np.any(b <= 0):
            raise ConfigError("kinetic coefficients must be positive")
        object.__setattr__(self, "beta", b)

    @classmethod
    def uniform(cls, n_facets: int, beta: float = 1.0) -> "KineticParams":
        return cls(np.full(n_facets, float(beta)))


@dataclass(frozen=True)
class FacetVelocities:
    V: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.V)):
            raise ValueError(f"non-finite facet velocity {self.V}")


def facet_velocity(kappa, avg_sigma, beta: KineticParams) -> FacetVelocities:
    """``V_i = (kappa_i + <sigma>_i) / beta_i`` (crystal-outward positive)."""
    if isinstance(kappa, CurvatureReport):
        kappa = kappa.kappa
    kappa = np.asarray(kappa, dtype=float)
    avg = np.broadcast_to(np.asarray(avg_sigma, dtype=float), kappa.shape)
    return FacetVelocities((kappa + avg) / beta.beta)


def step_facets(state: CrystalState, V, dt: float) -> CrystalState:
    """Forward Euler ``z + dt V``; raises DegenerateGeometry on extinction."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    V = V.V if isinstance(V, FacetVelocities) else np.asarray(V, dtype=float)
    return state.with_z(state.z + dt * V)


def curvature_velocity(aniso: Anisotropy, beta: KineticParams, sigma: float = 0.0):
    """Velocity field ``z -> V`` for a uniform supersaturation (no diffusion)."""

    def velocity(state: CrystalState) -> np.ndarray:
        return facet_velocity(crystalline_curvature(state, aniso), sigma, beta).V

    return velocity


def rk4_step(state: CrystalState, velocity, dt: float) -> CrystalState:
    z = state.z
    k1 = velocity(state)
    k2 = velocity(state.with_z(z + 0.5 * dt * k1))
    k3 = velocity(state.with_z(z + 0.5 * dt * k2))
    k4 = velocity(state.with_z(z + dt * k3))
    return state.with_z(z + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))


def equilibrium_supersaturation(state: CrystalState, aniso: Anisotropy, beta: KineticParams | None = None):
    """Facet-averaged supersaturation that holds every facet still: ``-kappa``.

    ``beta`` does not enter (V = 0 regardless of mobility); it is accepted for
    call-site symmetry with :func:`facet_velocity`.
    """
    return -crystalline_curvature(state, aniso).kappa


@dataclass
class FlowResult:
    times: np.ndarray
    z: np.ndarray
    status: str  # "completed" or "extinct"
    extinction_time: float | None = None
    final_state: CrystalState | None = field(default=None, repr=False)


def integrate_curvature_flow(
    state: CrystalState,
    aniso: Anisotropy,
    beta: KineticParams,
    dt: float,
    t_end: float,
    sigma: float = 0.0,
    record_every: int = 1,
) -> FlowResult:
    """RK4 for the closed system ``dz/dt = (kappa(z) + sigma) / beta``.

    Stops at ``t_end`` or at the first step whose stages degenerate; the
    extinction time is then reported as the end of that step.
    """
    velocity = curvature_velocity(aniso, beta, sigma)
    nsteps = int(round(t_end / dt))
    times, zs = [0.0], [state.z.copy()]
    for n in range(nsteps):
        try:
            state = rk4_step(state, velocity, dt)
        except DegenerateGeometry:
            return FlowResult(np.array(times), np.array(zs), "extinct", (n + 1) * dt, state)
        if (n + 1) % record_every == 0 or n + 1 == nsteps:
            times.append((n + 1) * dt)
            zs.append(state.z.copy())
    return FlowResult(np.array(times), np.array(zs), "completed", None, state)
