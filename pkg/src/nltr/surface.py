"""Tabulated NC input impedance over a frequency x power grid.

The surface is the design-time lookup table for the nonlinear circuits: each
cell holds the converged fundamental impedance of the grounded NC block
driven at that frequency and available power.  Surfaces can be exported to
and imported from CSV and are cached on disk keyed by a content hash.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .diode import (
    DiodeParams,
    DriveSpec,
    NonConvergence,
    NonlinearCircuit,
    SolverSettings,
    describing_function_impedance,
    transient_steady_state,
)
from .units import Grid2D

log = logging.getLogger(__name__)

CSV_HEADER = ["f_hz", "p_dbm", "re_ohm", "im_ohm"]
SOLVERS = {"hb": describing_function_impedance, "transient": transient_steady_state}

__all__ = ["NonlinearCircuit", "ImpedanceSurface", "RangeError", "SurfaceBuildError",
           "build_surface", "interpolate", "cached_surface", "cache_dir"]


class RangeError(ValueError):
    """Query outside the tabulated grid."""

    def __init__(self, axis, value, lo, hi):
        super().__init__(f"{axis} {value:g} outside surface range [{lo:g}, {hi:g}]")
        self.axis = axis


class SurfaceBuildError(RuntimeError):
    def __init__(self, failed):
        cells = ", ".join(f"({f:g} Hz, {p:g} dBm)" for f, p, _ in failed)
        super().__init__(f"{len(failed)} surface cell(s) failed to converge: {cells}")
        self.failed = failed


@dataclass(frozen=True)
class ImpedanceSurface:
    """Complex impedance ``values[i, j]`` at ``(f_axis[i], p_axis[j])``."""

    grid: Grid2D
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.shape != self.grid.shape:
            raise ValueError(f"surface values shape {v.shape} does not match "
                             f"grid {self.grid.shape}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def to_csv(self, path=None) -> str:
        """Row-major (frequency, then power) CSV at 17 significant digits."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for i, f in enumerate(self.grid.f_axis):
            for j, p in enumerate(self.grid.p_axis):
                z = self.values[i, j]
                w.writerow([_fmt(f), _fmt(p), _fmt(z.real), _fmt(z.imag)])
        text = buf.getvalue()
        if path is not None:
            atomic_write(path, text)
        return text

    @classmethod
    def from_csv(cls, path, provenance=None) -> "ImpedanceSurface":
        return cls.parse_csv(Path(path).read_text(), provenance)

    @classmethod
    def parse_csv(cls, text: str, provenance=None) -> "ImpedanceSurface":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0] != CSV_HEADER:
            raise ValueError(f"surface CSV must start with header {','.join(CSV_HEADER)}")
        data = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float)
        f_axis = np.unique(data[:, 0])
        p_axis = np.unique(data[:, 1])
        if data.shape[0] != f_axis.size * p_axis.size:
            raise ValueError("surface CSV is not a complete rectangular grid")
        vals = (data[:, 2] + 1j * data[:, 3]).reshape(f_axis.size, p_axis.size)
        if not (np.array_equal(data[:, 0], np.repeat(f_axis, p_axis.size))
                and np.array_equal(data[:, 1], np.tile(p_axis, f_axis.size))):
            raise ValueError("surface CSV rows must be ordered by frequency, then power")
        return cls(Grid2D(f_axis, p_axis), vals, dict(provenance or {}))


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _solve_cell(args):
    nc, f, p, solver, settings, r_src = args
    try:
        res = SOLVERS[solver](nc, DriveSpec(f, p, r_src), settings)
    except NonConvergence as exc:
        return None, str(exc)
    if res.z_fundamental.real < -1e-9:
        return None, f"non-passive result {res.z_fundamental}"
    return res.z_fundamental, None


def build_surface(nc: NonlinearCircuit, grid: Grid2D, solver: str = "hb",
                  settings: SolverSettings = SolverSettings(),
                  source_impedance: float = 50.0, workers: int = 1) -> ImpedanceSurface:
    """Solve every grid cell independently and tabulate the NC impedance.

    Raises
    ------
    SurfaceBuildError
        Listing every (f, P) cell that failed to converge.
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; expected one of {sorted(SOLVERS)}")
    jobs = [(nc, float(f), float(p), solver, settings, source_impedance)
            for f in grid.f_axis for p in grid.p_axis]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_solve_cell, jobs, chunksize=8))
    else:
        results = [_solve_cell(j) for j in jobs]
    failed = [(j[1], j[2], err) for j, (_, err) in zip(jobs, results) if err]
    if failed:
        raise SurfaceBuildError(failed)
    vals = np.array([z for z, _ in results], dtype=complex).reshape(grid.shape)
    return ImpedanceSurface(grid, vals, _provenance(nc, grid, solver, settings,
                                                    source_impedance))


def _provenance(nc, grid, solver, settings, source_impedance) -> dict:
    return {
        "solver": solver,
        "settings": asdict(settings),
        "source_impedance": source_impedance,
        "nc": {"n_series": nc.n_series, "n_branches": nc.n_branches,
               "diode": asdict(nc.diode)},
        "grid": grid.to_dict(),
    }


def surface_key(nc, grid, solver="hb", settings=SolverSettings(), source_impedance=50.0):
    """Content hash identifying a surface build."""
    blob = json.dumps(_provenance(nc, grid, solver, settings, source_impedance),
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_dir() -> Path:
    env = os.environ.get("NLTR_CACHE_DIR")
    return Path(env) if env else Path.home() / ".cache" / "nltr"


def cached_surface(nc, grid, solver="hb", settings=SolverSettings(),
                   source_impedance=50.0, workers=1, use_cache=True) -> ImpedanceSurface:
    """Like :func:`build_surface` but reuses a cached copy when present."""
    key = surface_key(nc, grid, solver, settings, source_impedance)
    prov = _provenance(nc, grid, solver, settings, source_impedance)
    path = cache_dir() / f"surface-{key[:32]}.csv"
    if use_cache and path.exists():
        try:
            surf = ImpedanceSurface.from_csv(path, prov)
            if (np.array_equal(surf.grid.f_axis, grid.f_axis)
                    and np.array_equal(surf.grid.p_axis, grid.p_axis)):
                return surf
        except (ValueError, OSError) as exc:
            log.warning("ignoring unreadable surface cache %s: %s", path, exc)
    surf = build_surface(nc, grid, solver, settings, source_impedance, workers)
    if use_cache:
        try:
            surf.to_csv(path)
        except OSError as exc:
            log.warning("could not write surface cache %s: %s", path, exc)
    return surf


def _bracket(axis: np.ndarray, x: float, name: str):
    lo, hi = axis[0], axis[-1]
    if not lo <= x <= hi:
        raise RangeError(name, x, lo, hi)
    if axis.size == 1:
        return 0, 0, 0.0
    i = int(np.searchsorted(axis, x, side="right")) - 1
    i = min(max(i, 0), axis.size - 2)
    t = (x - axis[i]) / (axis[i + 1] - axis[i])
    return i, i + 1, t


def interpolate(surface: ImpedanceSurface, f: float, p_dbm: float) -> complex:
    """Bilinear interpolation in (Hz, dBm); no extrapolation."""
    g = surface.grid
    i0, i1, tf = _bracket(g.f_axis, float(f), "frequency")
    j0, j1, tp = _bracket(g.p_axis, float(p_dbm), "power")
    v = surface.values
    if tf == 0.0 and tp == 0.0:
        return complex(v[i0, j0])
    lo = v[i0, j0] * (1 - tp) + v[i0, j1] * tp
    hi = v[i1, j0] * (1 - tp) + v[i1, j1] * tp
    return complex(lo * (1 - tf) + hi * tf)
