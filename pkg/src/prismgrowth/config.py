"""Run configuration: nested dataclasses loaded from / dumped to YAML.

Unknown keys are rejected at every level.  Floats are written with ``repr``
(shortest round-trip form), so ``load(dump(cfg)) == cfg``.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from dataclasses import field as _default
from pathlib import Path

import numpy as np
import yaml

from .dynamics import KineticParams
from .energy import Anisotropy, wulff_shape
from .errors import ConfigError
from .geometry import BasePolygon, CrystalState
from .mapping import MappingConfig


@dataclass
class AnisotropyConfig:
    k: int = 6
    gamma_lateral: float = 1.0
    gamma_top: float = 1.0


@dataclass
class CrystalConfig:
    shape: str = "wulff"  # "wulff" (scaled Wulff prism) or "polygon"
    scale: float = 1.0
    vertices: list | None = None  # polygon: counter-clockwise [[x, y], ...]
    half_height: float | None = None


@dataclass
class KineticsConfig:
    beta: float | list = 1.0


@dataclass
class FluxConfig:
    """Per-facet flux ``g(t) = g + g_rate * t`` (crystal-outward normal derivative)."""

    g: float | list = 0.0
    g_rate: float | list = 0.0


@dataclass
class FieldConfig:
    sigma_inf: float = 0.0
    drift: object = None  # None | [fx, fy, fz] | {"kind": ..., ...}
    cells: int = 48
    half_width: float | None = None
    half_width_factor: float = 3.0  # used when half_width is null: R = factor * diameter
    initial: str = "constant"  # "constant" (sigma_inf) or "extension" (sigma_inf + G)
    backend: str = "auto"


@dataclass
class TimeConfig:
    t_end: float = 0.1
    dt: float | None = None
    cfl_safety: float = 0.9


@dataclass
class CouplingConfig:
    mode: str = "splitting"  # splitting | picard | curvature


@dataclass
class PicardConfig:
    window: float = 0.05
    tol: float = 1e-10
    max_iter: int = 30
    max_window: float | None = None
    max_retries: int = 6


@dataclass
class MappingSection:
    delta_v: float | None = None
    eps_p: float | None = None
    n_flow: int = 64


@dataclass
class ExtensionSection:
    eps_cut: float | None = None


@dataclass
class OutputConfig:
    cadence: int = 1
    snapshot_every: int = 0
    directory: str = "output"


@dataclass
class SimConfig:
    anisotropy: AnisotropyConfig = _default(default_factory=AnisotropyConfig)
    crystal: CrystalConfig = _default(default_factory=CrystalConfig)
    kinetics: KineticsConfig = _default(default_factory=KineticsConfig)
    flux: FluxConfig = _default(default_factory=FluxConfig)
    field: FieldConfig = _default(default_factory=FieldConfig)
    time: TimeConfig = _default(default_factory=TimeConfig)
    coupling: CouplingConfig = _default(default_factory=CouplingConfig)
    picard: PicardConfig = _default(default_factory=PicardConfig)
    mapping: MappingSection = _default(default_factory=MappingSection)
    extension: ExtensionSection = _default(default_factory=ExtensionSection)
    output: OutputConfig = _default(default_factory=OutputConfig)
    seed: int = 0

    # -- derived objects -------------------------------------------------
    def aniso(self) -> Anisotropy:
        a = self.anisotropy
        return Anisotropy(int(a.k), float(a.gamma_lateral), float(a.gamma_top))

    def base(self) -> BasePolygon:
        c = self.crystal
        if c.shape == "wulff":
            return wulff_shape(self.aniso()).base(float(c.scale))
        if c.vertices is None or c.half_height is None:
            raise ConfigError("polygon crystal needs vertices and half_height")
        base = BasePolygon(np.asarray(c.vertices, dtype=float) * c.scale, float(c.half_height) * c.scale)
        if base.k != self.anisotropy.k:
            raise ConfigError("polygon vertex count must equal anisotropy k")
        return base

    def initial_state(self) -> CrystalState:
        return CrystalState.at(self.base())

    def n_facets(self) -> int:
        return int(self.anisotropy.k) + 2

    def _per_facet(self, value, name) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        if arr.ndim == 0:
            return np.full(self.n_facets(), float(arr))
        if arr.shape != (self.n_facets(),):
            raise ConfigError(f"{name} must be a scalar or have {self.n_facets()} entries")
        return arr.copy()

    def kinetics_params(self) -> KineticParams:
        return KineticParams(self._per_facet(self.kinetics.beta, "beta"))

    def g_at(self, t: float) -> np.ndarray:
        return self._per_facet(self.flux.g, "g") + t * self._per_facet(self.flux.g_rate, "g_rate")

    def half_width(self) -> float:
        f = self.field
        if f.half_width is not None:
            return float(f.half_width)
        return float(f.half_width_factor) * self.base().diameter

    def grid_spacing(self) -> float:
        return 2.0 * self.half_width() / int(self.field.cells)

    def mapping_config(self) -> MappingConfig:
        m = self.mapping
        return MappingConfig(m.delta_v, m.eps_p, int(m.n_flow))

    def validate(self) -> "SimConfig":
        self.aniso()
        self.initial_state()
        self.kinetics_params()
        self.g_at(0.0)
        if self.coupling.mode not in ("splitting", "picard", "curvature"):
            raise ConfigError(f"unknown coupling mode {self.coupling.mode!r}")
        if self.field.initial not in ("constant", "extension"):
            raise ConfigError(f"unknown initial field {self.field.initial!r}")
        if self.field.backend not in ("auto", "numba", "numpy"):
            raise ConfigError(f"unknown backend {self.field.backend!r}")
        if int(self.field.cells) < 4:
            raise ConfigError("field.cells must be >= 4")
        t = self.time
        if not t.t_end > 0:
            raise ConfigError("time.t_end must be positive")
        if t.dt is not None and not t.dt > 0:
            raise ConfigError("time.dt must be positive")
        if not 0 < t.cfl_safety <= 1:
            raise ConfigError("time.cfl_safety must lie in (0, 1]")
        p = self.picard
        if not (p.window > 0 and p.tol > 0 and p.max_iter >= 2):
            raise ConfigError("picard needs window > 0, tol > 0 and max_iter >= 2")
        if self.output.cadence < 1 or self.output.snapshot_every < 0:
            raise ConfigError("output.cadence must be >= 1 and snapshot_every >= 0")
        self.mapping_config().resolved(self.base())
        return self


_SECTIONS = {f.name: f for f in dataclasses.fields(SimConfig)}


def _build(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where!r}: {', '.join(unknown)}")
    return cls(**data)


def from_dict(data: dict) -> SimConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - set(_SECTIONS))
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = _SECTIONS[name].default_factory if _SECTIONS[name].default_factory is not dataclasses.MISSING else None
        if default is not None:
            kwargs[name] = _build(type(default()), value or {}, name)
        else:
            kwargs[name] = value
    try:
        return SimConfig(**kwargs).validate()
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def to_dict(cfg: SimConfig) -> dict:
    return dataclasses.asdict(cfg)


def loads(text: str) -> SimConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from exc
    return from_dict(data or {})


def dumps(cfg: SimConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False, default_flow_style=None)


def load(path) -> SimConfig:
    return loads(Path(path).read_text())


def dump(cfg: SimConfig, path) -> None:
    Path(path).write_text(dumps(cfg))
