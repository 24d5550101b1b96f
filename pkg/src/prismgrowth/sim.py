"""Coupled field/facet time stepping: Lie splitting, Picard windows and the run driver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import yaml

from . import io
from .config import SimConfig, dump
from .dynamics import KineticParams, facet_velocity, step_facets
from .energy import Anisotropy, crystalline_curvature
from .errors import DegenerateGeometry, NoConvergence, PrismGrowthError
from .extension import assemble_G, build_extensions
from .field import (
    FieldGrid,
    build_grid,
    crystal_mask,
    facet_averages,
    flux_budget,
    remask,
    step_field,
)
from .geometry import CrystalState


@dataclass(frozen=True)
class CouplingParams:
    aniso: Anisotropy
    beta: KineticParams
    g_of_t: Callable[[float], np.ndarray]
    backend: str | None = None

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "CouplingParams":
        backend = None if cfg.field.backend == "auto" else cfg.field.backend
        return cls(cfg.aniso(), cfg.kinetics_params(), cfg.g_at, backend)


def _record(t, state, curv, avg, V, residual) -> io.Record:
    return io.Record(float(t), state.z.copy(), curv.kappa.copy(), np.asarray(avg, float).copy(),
                     np.asarray(V, float).copy(), curv.volume, curv.energy, float(residual))


def on_geometry(grid: FieldGrid, state: CrystalState) -> FieldGrid:
    """``grid`` re-masked for ``state`` (returned as-is when the mask already matches)."""
    mask = crystal_mask(state, grid.n, grid.h, grid.half_width, grid.center)
    if np.array_equal(mask, grid.mask):
        return grid
    return remask(grid, state)


@dataclass
class StepOutput:
    state: CrystalState
    grid: FieldGrid
    record: io.Record


def splitting_step(state: CrystalState, grid: FieldGrid, params: CouplingParams, dt: float,
                   t: float | None = None) -> StepOutput:
    """Field step on the current geometry, then facet velocities, Euler on z, re-mask.

    The record describes the geometry the velocities were computed on (time
    ``t``, state before the update) together with the budget residual of the
    field step.  Raises DegenerateGeometry if the facet update collapses.
    """
    t = grid.t if t is None else t
    before = grid.with_g(params.g_of_t(t))
    after = step_field(before, dt, backend=params.backend)
    budget = flux_budget(before, after, dt)
    curv = crystalline_curvature(state, params.aniso)
    avg = facet_averages(after, state)
    V = facet_velocity(curv, avg, params.beta).V
    new_state = step_facets(state, V, dt)
    return StepOutput(new_state, remask(after, new_state), _record(t, state, curv, avg, V, budget.residual))


def run_splitting(state, grid, params, dt, n_steps, t0: float = 0.0):
    """``n_steps`` splitting steps; returns (state, grid, records)."""
    records = []
    for m in range(n_steps):
        out = splitting_step(state, grid, params, dt, t0 + m * dt)
        state, grid = out.state, out.grid
        records.append(out.record)
    return state, grid, records


# -- Picard successive approximation --------------------------------------

@dataclass
class PicardResult:
    state: CrystalState
    grid: FieldGrid
    z: np.ndarray  # (n_steps + 1, N) converged trajectory
    records: list
    iterations: int
    diffs: list  # max over window of |z^{n+1} - z^n|_inf, per iteration
    ratios: list = field(default_factory=list)


def _ode_pass(state0, params, dt, n_steps, t0, field_at):
    """Euler for the facet ODE with ``field_at(m, state)`` giving the grid to average on."""
    states = [state0]
    aux = []
    s = state0
    for m in range(n_steps):
        g = field_at(m, s)
        curv = crystalline_curvature(s, params.aniso)
        avg = facet_averages(g, s)
        V = facet_velocity(curv, avg, params.beta).V
        aux.append((curv, avg, V))
        s = step_facets(s, V, dt)
        states.append(s)
    return states, aux


def picard_window(state: CrystalState, grid: FieldGrid, params: CouplingParams, dt: float,
                  n_steps: int, tol: float, max_iter: int, t0: float = 0.0) -> PicardResult:
    """Successive approximation over ``n_steps`` steps of size ``dt``.

    Iterate 0 integrates the facet ODE against the initial field held fixed
    in time.  Each further iterate advances the field with the geometry
    frozen to the previous trajectory and then re-integrates the ODE against
    the stored field states.  At an exact fixed point the trajectory is the
    splitting trajectory with the same ``dt``.
    """
    states, _ = _ode_pass(state, params, dt, n_steps, t0, lambda m, s: on_geometry(grid, s))
    diffs, ratios = [], []
    for it in range(1, max_iter + 1):
        stepped, budgets = [], []
        g = grid
        for m in range(n_steps):
            before = g.with_g(params.g_of_t(t0 + m * dt))
            after = step_field(before, dt, backend=params.backend)
            budgets.append(flux_budget(before, after, dt).residual)
            stepped.append(after)
            g = on_geometry(after, states[m + 1])
        prev = states

        def field_at(m, s, prev=prev, stepped=stepped):
            if np.array_equal(s.z, prev[m].z):
                return stepped[m]
            return on_geometry(stepped[m], s)

        states, aux = _ode_pass(state, params, dt, n_steps, t0, field_at)
        diff = max(float(np.max(np.abs(a.z - b.z))) for a, b in zip(states, prev))
        if diffs:
            ratios.append(diff / diffs[-1] if diffs[-1] > 0 else 0.0)
        diffs.append(diff)
        if diff <= tol:
            records = [_record(t0 + m * dt, states[m], *aux[m], budgets[m]) for m in range(n_steps)]
            final_grid = on_geometry(stepped[-1], states[-1])
            z = np.array([s.z for s in states])
            return PicardResult(states[-1], final_grid, z, records, it, diffs, ratios)
    raise NoConvergence(f"Picard did not reach tol={tol:g} in {max_iter} iterations", ratios=tuple(ratios))


# -- driver ----------------------------------------------------------------

@dataclass
class RunResult:
    status: str  # completed | extinct | error
    series: io.TimeSeries
    state: CrystalState | None
    grid: FieldGrid | None
    t: float
    steps: int
    dt: float
    extinction_time: float | None = None
    message: str = ""
    picard_windows: list = field(default_factory=list)  # (t0, n_steps, iterations, ratios)


def initial_grid(cfg: SimConfig, state: CrystalState) -> FieldGrid:
    grid = build_grid(state, cfg.grid_spacing(), cfg.half_width(), cfg.field.sigma_inf,
                      cfg.field.drift, cfg.g_at(0.0))
    if cfg.field.initial == "extension":
        G = assemble_G(build_extensions(state, cfg.extension.eps_cut), cfg.g_at(0.0))
        x, y, z = grid.cell_centers(padded=True)
        sig = grid.sigma.copy()
        inner = grid.mask == 0
        pts = np.stack([x[inner], y[inner], z[inner]], axis=-1)
        sig[inner] += G(pts)
        grid = replace(grid, sigma=sig)
    return grid


def time_step(cfg: SimConfig, grid: FieldGrid | None) -> tuple[float, int]:
    """Uniform step that divides ``t_end`` and does not exceed the requested/CFL step."""
    if cfg.time.dt is not None:
        dt = float(cfg.time.dt)
    elif grid is not None:
        dt = cfg.time.cfl_safety * grid.stable_dt()
    else:
        raise PrismGrowthError("curvature mode needs an explicit time.dt")
    n = max(1, math.ceil(cfg.time.t_end / dt * (1.0 - 1e-12)))
    return cfg.time.t_end / n, n


def _final_record(t, state, grid, params, aniso, sigma_const=None):
    curv = crystalline_curvature(state, aniso)
    avg = np.full(state.n_facets, sigma_const) if grid is None else facet_averages(grid, state)
    V = facet_velocity(curv, avg, params.beta).V
    return _record(t, state, curv, avg, V, float("nan"))


def run(cfg: SimConfig, output_dir=None, write: bool = True, log: Callable[[str], None] | None = None) -> RunResult:
    """Run a configuration to ``t_end`` or extinction; optionally write outputs."""
    log = log or (lambda msg: None)
    cfg.validate()
    params = CouplingParams.from_config(cfg)
    state = cfg.initial_state()
    series = io.TimeSeries(state.n_facets)
    mode = cfg.coupling.mode
    cadence = cfg.output.cadence
    out_dir = None
    if write:
        out_dir = io.ensure_dir(output_dir or cfg.output.directory)
        dump(cfg, out_dir / "config.yaml")
    grid = None if mode == "curvature" else initial_grid(cfg, state)
    dt, n_steps = time_step(cfg, grid)
    result = RunResult("completed", series, state, grid, 0.0, 0, dt)

    def snapshot(step, g):
        every = cfg.output.snapshot_every
        if out_dir is not None and g is not None and every and step % every == 0:
            io.write_snapshot(g, out_dir / f"snapshot_{step:06d}.txt")

    snapshot(0, grid)
    step = 0
    try:
        if mode == "curvature":
            from .dynamics import curvature_velocity, rk4_step

            velocity = curvature_velocity(params.aniso, params.beta, cfg.field.sigma_inf)
            while step < n_steps:
                t = step * dt
                if step % cadence == 0:
                    series.append(_final_record(t, state, None, params, params.aniso, cfg.field.sigma_inf))
                try:
                    state = rk4_step(state, velocity, dt)
                except DegenerateGeometry:
                    result.status, result.extinction_time = "extinct", (step + 1) * dt
                    break
                step += 1
        elif mode == "splitting":
            while step < n_steps:
                try:
                    out = splitting_step(state, grid, params, dt, step * dt)
                except DegenerateGeometry:
                    result.status, result.extinction_time = "extinct", (step + 1) * dt
                    break
                if step % cadence == 0:
                    series.append(out.record)
                state, grid = out.state, out.grid
                step += 1
                snapshot(step, grid)
        else:
            step, state, grid = _run_picard(cfg, params, state, grid, dt, n_steps, series, result, snapshot, log)
    except PrismGrowthError as exc:
        result.status, result.message = "error", f"{type(exc).__name__}: {exc}"
        log(result.message)
    result.state, result.grid, result.steps = state, grid, step
    result.t = step * dt
    if result.status != "error" and (not series.records or series.records[-1].t < result.t):
        try:
            series.append(_final_record(result.t, state, grid, params, params.aniso, cfg.field.sigma_inf))
        except DegenerateGeometry:
            pass
    if out_dir is not None:
        series.write_csv(out_dir / "timeseries.csv")
        summary = {
            "status": result.status,
            "t": result.t,
            "steps": result.steps,
            "dt": result.dt,
            "extinction_time": result.extinction_time,
            "message": result.message,
        }
        (out_dir / "summary.yaml").write_text(yaml.safe_dump(summary, sort_keys=False))
    log(f"{result.status}: t={result.t:.6g} after {result.steps} steps (dt={dt:.3g})")
    return result


def _run_picard(cfg, params, state, grid, dt, n_steps, series, result, snapshot, log):
    """Adaptive windows: halve on failure, double after 3 clean windows (capped)."""
    p = cfg.picard
    cap = max(1, round((p.max_window or p.window) / dt))
    width = min(cap, max(1, round(p.window / dt)))
    clean = 0
    step = 0
    while step < n_steps:
        m = min(width, n_steps - step)
        retries = 0
        while True:
            try:
                res = picard_window(state, grid, params, dt, m, p.tol, p.max_iter, step * dt)
                break
            except (NoConvergence, DegenerateGeometry) as exc:
                if m == 1 and isinstance(exc, DegenerateGeometry):
                    result.status, result.extinction_time = "extinct", (step + 1) * dt
                    return step, state, grid
                retries += 1
                if m == 1 or retries > p.max_retries:
                    raise
                m = max(1, m // 2)
                log(f"picard window halved to {m} steps at t={step * dt:.6g}: {exc}")
        result.picard_windows.append((step * dt, m, res.iterations, list(res.ratios)))
        for j, rec in enumerate(res.records):
            if (step + j) % cfg.output.cadence == 0:
                series.append(rec)
        state, grid = res.state, res.grid
        step += m
        snapshot(step, grid)
        clean = clean + 1 if retries == 0 else 0
        width = m
        if clean >= 3:
            width, clean = min(cap, 2 * m), 0
    return step, state, grid


def load_and_run(path, output_dir=None, **kwargs) -> RunResult:
    from .config import load

    return run(load(path), output_dir=output_dir, **kwargs)


__all__ = [
    "CouplingParams",
    "PicardResult",
    "RunResult",
    "initial_grid",
    "load_and_run",
    "on_geometry",
    "picard_window",
    "run",
    "run_splitting",
    "splitting_step",
    "time_step",
]
