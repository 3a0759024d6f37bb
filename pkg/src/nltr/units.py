"""Unit conversions, immittance values and sweep grids."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np


class ConfigError(ValueError):
    """Invalid user-supplied configuration value."""


def dbm_to_watts(dbm):
    """Convert power in dBm to watts. Accepts scalars or arrays."""
    if np.ndim(dbm):
        return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)
    return 10.0 ** ((float(dbm) - 30.0) / 10.0)


def watts_to_dbm(watts):
    """Convert power in watts to dBm."""
    w = np.asarray(watts, dtype=float)
    if np.any(w <= 0):
        raise ValueError("power must be positive to express in dBm")
    out = 10.0 * np.log10(w) + 30.0
    return out if np.ndim(watts) else float(out)


def ratio_to_db(r):
    """Power ratio in decibels, ``10*log10(r)``.

    Raises
    ------
    ValueError
        If any ratio is not strictly positive.
    """
    a = np.asarray(r, dtype=float)
    if np.any(~(a > 0)):
        raise ValueError(f"power ratio must be > 0, got {r!r}")
    out = 10.0 * np.log10(a)
    return out if np.ndim(r) else float(out)


def amplitude_to_db(x):
    """Wave-amplitude magnitude in decibels, ``20*log10|x|``."""
    a = np.abs(np.asarray(x))
    if np.any(~(a > 0)):
        raise ValueError("amplitude must be nonzero to express in dB")
    out = 20.0 * np.log10(a)
    return out if np.ndim(x) else float(out)


@dataclass(frozen=True)
class Immittance:
    """A complex impedance (ohms) or admittance (siemens).

    Values are always finite; an open circuit is carried as a zero
    admittance.
    """

    value: complex
    kind: Literal["impedance", "admittance"] = "impedance"

    def __post_init__(self):
        if self.kind not in ("impedance", "admittance"):
            raise ValueError(f"unknown immittance kind {self.kind!r}")
        v = complex(self.value)
        if not (math.isfinite(v.real) and math.isfinite(v.imag)):
            raise ValueError("immittance must be finite; express an open as admittance 0")
        object.__setattr__(self, "value", v)

    @property
    def re(self) -> float:
        return self.value.real

    @property
    def im(self) -> float:
        return self.value.imag

    def inverse(self) -> "Immittance":
        other = "admittance" if self.kind == "impedance" else "impedance"
        return Immittance(1.0 / self.value, other)

    def as_impedance(self) -> complex:
        return self.value if self.kind == "impedance" else 1.0 / self.value

    def as_admittance(self) -> complex:
        return self.value if self.kind == "admittance" else 1.0 / self.value


@dataclass(frozen=True)
class Grid2D:
    """Frequency (Hz) by power (dBm) evaluation grid, both axes ascending."""

    f_axis: np.ndarray
    p_axis: np.ndarray

    def __post_init__(self):
        f = np.array(self.f_axis, dtype=float)
        p = np.array(self.p_axis, dtype=float)
        for name, ax in (("frequency", f), ("power", p)):
            if ax.ndim != 1 or ax.size < 1:
                raise ConfigError(f"{name} axis must be a nonempty 1-D sequence")
            if np.any(np.diff(ax) <= 0):
                raise ConfigError(f"{name} axis must be strictly increasing")
        if np.any(f <= 0):
            raise ConfigError("frequencies must be positive")
        f.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "f_axis", f)
        object.__setattr__(self, "p_axis", p)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.f_axis.size, self.p_axis.size)

    def to_dict(self) -> dict:
        return {"f_hz": self.f_axis.tolist(), "p_dbm": self.p_axis.tolist()}


def _axis(start: float, stop: float, n: int, name: str) -> np.ndarray:
    if int(n) != n or n < 2:
        raise ConfigError(f"{name} axis needs at least 2 points, got {n}")
    if not start < stop:
        raise ConfigError(f"{name} axis bounds reversed or equal: {start} >= {stop}")
    ax = np.linspace(start, stop, int(n))
    ax[0], ax[-1] = start, stop
    return ax


def make_grid(f_start: float, f_stop: float, f_points: int,
              p_start: float, p_stop: float, p_points: int) -> Grid2D:
    """Linearly spaced frequency (Hz) x power (dBm) grid with exact endpoints."""
    return Grid2D(_axis(f_start, f_stop, f_points, "frequency"),
                  _axis(p_start, p_stop, p_points, "power"))


def sweep_axis(start: float, stop: float, n: int) -> np.ndarray:
    """1-D sweep points; ``n == 1`` requires ``start == stop`` or uses start."""
    if n < 1:
        raise ConfigError("sweep needs at least one point")
    if n == 1:
        return np.array([float(start)])
    return _axis(start, stop, n, "sweep")
