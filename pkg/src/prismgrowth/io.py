"""Time-series CSV and text grid snapshots.

CSV header (N = number of facets)::

    t, z_0..z_{N-1}, kappa_0.., avg_0.., V_0.., volume, energy, budget_residual

Snapshot format (version 1): ``#``-prefixed ``key: value`` header lines
(format, dims, h, half_width, origin, center, t, sigma_inf), then one value
per line in C (row-major, x slowest) order over the unpadded grid.
Crystal cells are written as ``nan``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import CRYSTAL

SNAPSHOT_FORMAT = "prismgrowth-snapshot 1"
FLOAT_FMT = "%.17g"


def csv_header(n_facets: int) -> list[str]:
    cols = ["t"]
    for name in ("z", "kappa", "avg", "V"):
        cols += [f"{name}_{i}" for i in range(n_facets)]
    return cols + ["volume", "energy", "budget_residual"]


@dataclass(frozen=True)
class Record:
    t: float
    z: np.ndarray
    kappa: np.ndarray
    avg: np.ndarray
    V: np.ndarray
    volume: float
    energy: float
    budget_residual: float

    def row(self) -> np.ndarray:
        return np.concatenate([[self.t], self.z, self.kappa, self.avg, self.V,
                               [self.volume, self.energy, self.budget_residual]])


class TimeSeries:
    """Append-only list of records with strictly increasing ``t``."""

    def __init__(self, n_facets: int):
        self.n_facets = n_facets
        self.records: list[Record] = []

    def append(self, rec: Record):
        if self.records and not rec.t > self.records[-1].t:
            raise ValueError("time series times must increase strictly")
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def array(self) -> np.ndarray:
        if not self.records:
            return np.empty((0, len(csv_header(self.n_facets))))
        return np.stack([r.row() for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return self.array()[:, csv_header(self.n_facets).index(name)]

    @property
    def t(self):
        return np.array([r.t for r in self.records])

    @property
    def z(self):
        return np.array([r.z for r in self.records])

    def write_csv(self, path):
        np.savetxt(path, self.array(), delimiter=",", fmt=FLOAT_FMT,
                   header=",".join(csv_header(self.n_facets)), comments="")


def read_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


@dataclass
class Snapshot:
    values: np.ndarray  # (n, n, n), nan inside the crystal
    h: float
    half_width: float
    origin: np.ndarray  # centre of cell (0, 0, 0)
    center: np.ndarray
    t: float
    sigma_inf: float


def write_snapshot(grid, path):
    vals = grid.sigma[1:-1, 1:-1, 1:-1].copy()
    vals[grid.mask[1:-1, 1:-1, 1:-1] == CRYSTAL] = np.nan
    origin = grid.lower + 0.5 * grid.h
    fmt = lambda a: " ".join(FLOAT_FMT % v for v in np.atleast_1d(a))  # noqa: E731
    header = [
        f"format: {SNAPSHOT_FORMAT}",
        f"dims: {' '.join(str(d) for d in vals.shape)}",
        f"h: {fmt(grid.h)}",
        f"half_width: {fmt(grid.half_width)}",
        f"origin: {fmt(origin)}",
        f"center: {fmt(grid.center)}",
        f"t: {fmt(grid.t)}",
        f"sigma_inf: {fmt(grid.sigma_inf)}",
    ]
    np.savetxt(path, vals.ravel(), fmt=FLOAT_FMT, header="\n".join(header), comments="# ")


def read_snapshot(path) -> Snapshot:
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, val = line[1:].strip().partition(":")
            meta[key.strip()] = val.strip()
    if meta.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"{path}: not a {SNAPSHOT_FORMAT} file")
    dims = tuple(int(v) for v in meta["dims"].split())
    vals = np.loadtxt(path, comments="#").reshape(dims)
    nums = lambda key: np.array([float(v) for v in meta[key].split()])  # noqa: E731
    return Snapshot(vals, float(meta["h"]), float(meta["half_width"]), nums("origin"),
                    nums("center"), float(meta["t"]), float(meta["sigma_inf"]))


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
