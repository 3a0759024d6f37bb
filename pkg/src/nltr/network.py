"""Switch network: transmission lines, ABCD algebra, closed forms and the
self-consistent operating point.

Port numbering follows the switch convention 1 = Ant, 2 = Tx, 3 = Rx.

Adopted interconnection (all NC blocks grounded unless noted)::

    Ant --IT1-- J --NC1 (series)-- Tx
                |
               IT2
                |
                M  (NC2, NC4 to ground) --IT3-- Rx (NC3 to ground)

At low power every NC is a small capacitance, so Ant reaches Rx through
IT1/IT2/IT3 while NC1 blocks the Tx port.  At high power the shunt blocks at
M conduct, IT2 (close to a quarter wave) turns that short into an open at J,
and NC1 conducts, so the Tx port connects to the antenna.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .diode import NonConvergence, NonlinearCircuit
from .surface import ImpedanceSurface, interpolate
from .units import ConfigError, amplitude_to_db, dbm_to_watts, watts_to_dbm

PORTS = ("ant", "tx", "rx")
NC_NAMES = ("nc1", "nc2", "nc3", "nc4")
QUARTER_WAVE_EPS = 1e-9


class SingularNetwork(ArithmeticError):
    """A network conversion hit a zero denominator."""


@dataclass(frozen=True)
class TransmissionLine:
    """Ideal TEM line; electrical length scales linearly with frequency."""

    z0: float
    theta_ref: float  # degrees at f_ref
    f_ref: float = 1e9

    def __post_init__(self):
        if not self.z0 > 0:
            raise ConfigError(f"line z0 must be > 0, got {self.z0!r}")
        if not 0 < self.theta_ref < 180:
            raise ConfigError(f"line theta_ref must be in (0, 180) deg, got {self.theta_ref!r}")
        if not self.f_ref > 0:
            raise ConfigError("line f_ref must be > 0")


def electrical_length(line: TransmissionLine, f: float) -> float:
    """Electrical length in radians at frequency ``f``."""
    if not f > 0:
        raise ValueError("frequency must be > 0")
    return math.radians(line.theta_ref * (f / line.f_ref))


@dataclass(frozen=True)
class SwitchDesign:
    it1: TransmissionLine = TransmissionLine(89.0, 28.0)
    it2: TransmissionLine = TransmissionLine(97.0, 86.0)
    it3: TransmissionLine = TransmissionLine(84.0, 25.0)
    nc1: NonlinearCircuit = field(default_factory=NonlinearCircuit)
    nc2: NonlinearCircuit = field(default_factory=NonlinearCircuit)
    nc3: NonlinearCircuit = field(default_factory=NonlinearCircuit)
    nc4: NonlinearCircuit = field(default_factory=NonlinearCircuit)
    z_p: float = 50.0

    def __post_init__(self):
        if not self.z_p > 0:
            raise ConfigError(f"z_p must be > 0, got {self.z_p!r}")

    @property
    def lines(self):
        return (self.it1, self.it2, self.it3)

    @property
    def ncs(self):
        return (self.nc1, self.nc2, self.nc3, self.nc4)

    def with_lines(self, thetas, z0s) -> "SwitchDesign":
        it = [replace(ln, theta_ref=float(t), z0=float(z))
              for ln, t, z in zip(self.lines, thetas, z0s)]
        return replace(self, it1=it[0], it2=it[1], it3=it[2])


# --- ABCD algebra -----------------------------------------------------------

@dataclass(frozen=True)
class TwoPortABCD:
    a: complex
    b: complex
    c: complex
    d: complex

    def __matmul__(self, other: "TwoPortABCD") -> "TwoPortABCD":
        return TwoPortABCD(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def input_impedance(self, z_load: complex) -> complex:
        if cmath.isinf(z_load):
            return self.a / self.c
        return (self.a * z_load + self.b) / (self.c * z_load + self.d)

    @classmethod
    def identity(cls):
        return cls(1, 0, 0, 1)

    @classmethod
    def line(cls, z0: float, theta: float):
        c, s = math.cos(theta), math.sin(theta)
        return cls(c, 1j * z0 * s, 1j * s / z0, c)

    @classmethod
    def shunt(cls, y: complex):
        return cls(1, 0, y, 1)

    @classmethod
    def series(cls, z: complex):
        return cls(1, z, 0, 1)


def abcd_cascade(stages: Sequence[TwoPortABCD]) -> TwoPortABCD:
    """Left-to-right product of chain matrices."""
    if not stages:
        raise ValueError("cascade needs at least one stage")
    out = stages[0]
    for st in stages[1:]:
        out = out @ st
    return out


@dataclass(frozen=True)
class SParams:
    s11: complex
    s21: complex
    s12: complex = complex("nan")
    s22: complex = complex("nan")
    z_ref: float = 50.0

    def matrix(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s21, self.s22]])


def abcd_to_s(m: TwoPortABCD, z_ref: float = 50.0) -> SParams:
    """Two-port S-parameters with real reference ``z_ref`` on both ports."""
    a, b, c, d = m.a, m.b / z_ref, m.c * z_ref, m.d
    den = a + b + c + d
    if abs(den) < 1e-15:
        raise SingularNetwork("ABCD to S conversion is singular")
    return SParams(
        s11=(a + b - c - d) / den,
        s21=2.0 / den,
        s12=2.0 * (a * d - b * c) / den,
        s22=(-a + b - c + d) / den,
        z_ref=z_ref,
    )


# --- closed forms -----------------------------------------------------------

def loaded_line_admittance(line: TransmissionLine, z_load: complex, f: float) -> complex:
    """Input admittance of ``line`` terminated in ``z_load``.

    ``Y = (Z0 + j Z_L tan t) / (Z0 (Z_L + j Z0 tan t))``.  At a quarter wave
    the analytic limit ``Z_L / Z0**2`` is returned; an infinite load gives
    the open-stub admittance.
    """
    z0 = line.z0
    theta = electrical_length(line, f)
    if abs(math.cos(theta)) < QUARTER_WAVE_EPS:
        if cmath.isinf(z_load):
            raise SingularNetwork("open-terminated quarter-wave line has infinite admittance")
        return complex(z_load) / z0 ** 2
    t = math.tan(theta)
    if cmath.isinf(z_load):
        return 1j * t / z0
    return (z0 + 1j * z_load * t) / (z0 * (z_load + 1j * z0 * t))


def total_admittance(design: SwitchDesign, f: float, znc: Sequence[complex]) -> complex:
    """Sum of the three branch admittances in the Tx-mode closed form."""
    y1 = loaded_line_admittance(design.it1, znc[0] + design.z_p, f)
    y2 = loaded_line_admittance(design.it2, znc[1], f)
    y3 = loaded_line_admittance(design.it3, znc[2], f)
    return y1 + y2 + y3


def tx_mode_sparams(design: SwitchDesign, f: float, znc: Sequence[complex]) -> SParams:
    """Closed-form Tx-mode coefficients: a shunt ``Yt`` between two ports."""
    yz = total_admittance(design, f, znc) * design.z_p
    den = 2.0 + yz
    if abs(den) < 1e-12:
        raise SingularNetwork("2 + Yt*Zp vanishes")
    return SParams(s11=-yz / den, s21=2.0 / den, s12=2.0 / den, s22=-yz / den,
                   z_ref=design.z_p)


def rx_mode_sparams_closed_form(design: SwitchDesign, f: float,
                          znc: Sequence[complex]) -> tuple[complex, complex]:
    """Closed-form Rx-mode pair ``(cos t1 + j Z1 Y2 sin t1, j Z1 sin t1)``.

    Returned exactly as the closed form is written: the second value carries
    ohms, so the pair is the (A, B) column of IT1 followed by shunt ``Y2``
    rather than a pair of scattering parameters.
    """
    t1 = electrical_length(design.it1, f)
    y2 = loaded_line_admittance(design.it2, znc[1], f)
    z1 = design.it1.z0
    return (math.cos(t1) + 1j * z1 * y2 * math.sin(t1), 1j * z1 * math.sin(t1))


# --- full network -----------------------------------------------------------

def _line(design_line, f):
    return TwoPortABCD.line(design_line.z0, electrical_length(design_line, f))


def _branch_abcd(design: SwitchDesign, f: float, znc: Sequence[complex]):
    z1, z2, z3, z4 = znc
    y_m = 1.0 / z2 + 1.0 / z4
    rx_arm = abcd_cascade([_line(design.it2, f), TwoPortABCD.shunt(y_m),
                           _line(design.it3, f), TwoPortABCD.shunt(1.0 / z3)])
    return rx_arm


def rx_mode_sparams_abcd(design: SwitchDesign, f: float, znc: Sequence[complex]) -> SParams:
    """Ant -> Rx two-port by ABCD cascade, Tx port terminated in ``z_p``.

    IT1, then the Tx branch (NC1 in series with the Tx port) as a shunt at
    J, then the Rx arm: IT2, the NC2/NC4 shunt, IT3 and the NC3 shunt.
    """
    zp = design.z_p
    m = abcd_cascade([_line(design.it1, f), TwoPortABCD.shunt(1.0 / (znc[0] + zp)),
                      _branch_abcd(design, f, znc)])
    return abcd_to_s(m, zp)


def three_port_abcd(design: SwitchDesign, f: float, znc: Sequence[complex]) -> np.ndarray:
    """3 x 3 S-matrix (Ant, Tx, Rx) assembled from three ABCD cascades.

    Each port pairing is a cascade in which the remaining port, terminated
    in ``z_p``, appears as a shunt admittance at the junction J.
    """
    zp = design.z_p
    z1 = znc[0]
    it1 = _line(design.it1, f)
    rx_arm = _branch_abcd(design, f, znc)
    y_rx_at_j = 1.0 / rx_arm.input_impedance(zp)
    y_ant_at_j = 1.0 / it1.input_impedance(zp)

    ant_rx = abcd_to_s(abcd_cascade([it1, TwoPortABCD.shunt(1.0 / (z1 + zp)), rx_arm]), zp)
    ant_tx = abcd_to_s(abcd_cascade([it1, TwoPortABCD.shunt(y_rx_at_j),
                                     TwoPortABCD.series(z1)]), zp)
    tx_rx = abcd_to_s(abcd_cascade([TwoPortABCD.series(z1), TwoPortABCD.shunt(y_ant_at_j),
                                    rx_arm]), zp)
    s = np.empty((3, 3), dtype=complex)
    s[0, 0], s[2, 0], s[0, 2], s[2, 2] = ant_rx.s11, ant_rx.s21, ant_rx.s12, ant_rx.s22
    s[1, 0], s[0, 1], s[1, 1] = ant_tx.s21, ant_tx.s12, ant_tx.s22
    s[2, 1], s[1, 2] = tx_rx.s21, tx_rx.s12
    return s


_NODES = ("ant", "j", "m", "rx", "tx")


def _nodal_matrix(design: SwitchDesign, f: float, znc: Sequence[complex]) -> np.ndarray:
    idx = {n: i for i, n in enumerate(_NODES)}
    Y = np.zeros((5, 5), dtype=complex)

    def line(a, b, ln):
        th = electrical_length(ln, f)
        s = math.sin(th)
        if abs(s) < 1e-12:
            raise SingularNetwork("line of electrical length k*180 deg in nodal analysis")
        yself = -1j * math.cos(th) / (s * ln.z0)
        ymut = 1j / (s * ln.z0)
        i, k = idx[a], idx[b]
        Y[i, i] += yself
        Y[k, k] += yself
        Y[i, k] += ymut
        Y[k, i] += ymut

    def element(a, b, z):
        y = 1.0 / z
        i = idx[a]
        Y[i, i] += y
        if b is not None:
            k = idx[b]
            Y[k, k] += y
            Y[i, k] -= y
            Y[k, i] -= y

    z1, z2, z3, z4 = znc
    line("ant", "j", design.it1)
    element("j", "tx", z1)
    line("j", "m", design.it2)
    element("m", None, z2)
    element("m", None, z4)
    line("m", "rx", design.it3)
    element("rx", None, z3)
    return Y


def three_port_nodal(design: SwitchDesign, f: float, znc: Sequence[complex]) -> np.ndarray:
    """3 x 3 S-matrix (Ant, Tx, Rx) by nodal analysis and Kron reduction."""
    Y = _nodal_matrix(design, f, znc)
    p = [_NODES.index(n) for n in PORTS]
    q = [i for i in range(len(_NODES)) if i not in p]
    ypp = Y[np.ix_(p, p)] - Y[np.ix_(p, q)] @ np.linalg.solve(Y[np.ix_(q, q)], Y[np.ix_(q, p)])
    eye = np.eye(3)
    zp = design.z_p
    return (eye - zp * ypp) @ np.linalg.inv(eye + zp * ypp)


def node_voltages(design: SwitchDesign, f: float, znc: Sequence[complex],
                  port: str, power_dbm: float) -> dict:
    """Peak node-voltage phasors with ``port`` driven at available power
    ``power_dbm`` and every port terminated in ``z_p``."""
    zp = design.z_p
    Y = _nodal_matrix(design, f, znc)
    I = np.zeros(len(_NODES), dtype=complex)
    for n in PORTS:
        Y[_NODES.index(n), _NODES.index(n)] += 1.0 / zp
    vs = 2.0 * math.sqrt(2.0 * dbm_to_watts(power_dbm) * zp)
    I[_NODES.index(port)] = vs / zp
    V = np.linalg.solve(Y, I)
    return dict(zip(_NODES, V))


def nc_voltages(v: Mapping[str, complex]) -> dict:
    return {"nc1": v["j"] - v["tx"], "nc2": v["m"], "nc3": v["rx"], "nc4": v["m"]}


def equivalent_drive_dbm(v_peak: float, z_nc: complex, r_src: float = 50.0) -> float:
    """Available power of an ``r_src`` source that puts ``v_peak`` across ``z_nc``."""
    vs = v_peak * abs(z_nc + r_src) / abs(z_nc)
    w = vs * vs / (8.0 * r_src)
    return watts_to_dbm(max(w, 1e-30))


# --- operating point --------------------------------------------------------

@dataclass(frozen=True)
class OperatingPointSettings:
    relaxation: float = 0.5
    tol_db: float = 0.05
    max_iterations: int = 100
    mode_margin_db: float = 3.0


@dataclass(frozen=True)
class OperatingPoint:
    mode: str  # "Tx" | "Rx" | "Transition"
    frequency: float
    port: str
    power_dbm: float
    z_nc: dict
    local_power_dbm: dict
    delivered_w: dict
    s: np.ndarray  # 3 x 3, order PORTS
    iterations: int
    residual_db: float
    clamped: tuple = ()

    def s_ij(self, out_port: str, in_port: str) -> complex:
        return complex(self.s[PORTS.index(out_port), PORTS.index(in_port)])

    def pair(self, a: str, b: str) -> SParams:
        return SParams(self.s_ij(a, a), self.s_ij(b, a), self.s_ij(a, b), self.s_ij(b, b))

    def delivered_dbm(self, port: str) -> float:
        return watts_to_dbm(max(self.delivered_w[port], 1e-30))


SurfaceSet = Mapping[str, ImpedanceSurface]


def bind_surfaces(design: SwitchDesign, builder) -> dict:
    """Map each NC name to a surface, building one per distinct NC block."""
    built = {}
    out = {}
    for name, nc in zip(NC_NAMES, design.ncs):
        if nc not in built:
            built[nc] = builder(nc)
        out[name] = built[nc]
    return out


def _lookup(surfaces: SurfaceSet, f: float, local: Mapping[str, float]):
    z, clamped = {}, []
    for name in NC_NAMES:
        surf = surfaces[name]
        lo, hi = surf.grid.p_axis[0], surf.grid.p_axis[-1]
        p = local[name]
        if p > hi:
            clamped.append(name)
        z[name] = interpolate(surf, f, min(max(p, lo), hi))
    return z, clamped


def _clamp_local(surfaces: SurfaceSet, local: Mapping[str, float]) -> dict:
    out = {}
    for name, p in local.items():
        ax = surfaces[name].grid.p_axis
        out[name] = min(max(p, ax[0]), ax[-1])
    return out


def _classify(port: str, delivered: Mapping[str, float], margin_db: float) -> str:
    if port == "ant":
        tx_path, rx_path = delivered["tx"], delivered["rx"]
    elif port == "tx":
        tx_path, rx_path = delivered["ant"], delivered["rx"]
    else:
        tx_path, rx_path = delivered["tx"], delivered["ant"]
    lt = 10 * math.log10(max(tx_path, 1e-300))
    lr = 10 * math.log10(max(rx_path, 1e-300))
    if lt >= lr + margin_db:
        return "Tx"
    if lr >= lt + margin_db:
        return "Rx"
    return "Transition"


def solve_operating_point(design: SwitchDesign, surfaces: SurfaceSet, f: float,
                          port: str = "ant", power_dbm: float = -30.0,
                          direct: bool = False,
                          settings: OperatingPointSettings = OperatingPointSettings()
                          ) -> OperatingPoint:
    """Self-consistent NC impedances for one excitation.

    Each NC is characterised by the available power of a ``z_p`` source that
    would put the same voltage across it as the network does.  Starting from
    the small-signal network, local powers are relaxed in dB by
    ``settings.relaxation`` until no NC moves by more than ``tol_db``.
    Local powers below the surface grid use the lowest tabulated power
    (small-signal plateau); those above it are clamped and reported.

    With ``direct=True`` every NC is looked up at the excitation power and no
    iteration takes place.
    """
    if port not in PORTS:
        raise ValueError(f"unknown port {port!r}")
    zp = design.z_p
    if direct:
        local = {n: float(power_dbm) for n in NC_NAMES}
        z, clamped = _lookup(surfaces, f, local)
        iterations, residual = 0, 0.0
    else:
        low = {n: float(surfaces[n].grid.p_axis[0]) for n in NC_NAMES}
        z, _ = _lookup(surfaces, f, low)
        local = _measure(design, f, z, port, power_dbm)
        trace = []
        for iterations in range(1, settings.max_iterations + 1):
            z, clamped = _lookup(surfaces, f, local)
            new = _measure(design, f, z, port, power_dbm)
            a = _clamp_local(surfaces, local)
            b = _clamp_local(surfaces, new)
            residual = max(abs(b[n] - a[n]) for n in NC_NAMES)
            trace.append(residual)
            if residual < settings.tol_db:
                break
            local = {n: local[n] + settings.relaxation * (new[n] - local[n]) for n in NC_NAMES}
        else:
            raise NonConvergence(
                f"operating point did not converge at f={f:g} Hz, {port} {power_dbm:g} dBm",
                trace[-1], trace)
    zt = tuple(z[n] for n in NC_NAMES)
    v = node_voltages(design, f, zt, port, power_dbm)
    delivered = {p: abs(v[p]) ** 2 / (2 * zp) for p in PORTS if p != port}
    s = three_port_abcd(design, f, zt)
    return OperatingPoint(
        mode=_classify(port, delivered, settings.mode_margin_db),
        frequency=f, port=port, power_dbm=float(power_dbm),
        z_nc=z, local_power_dbm=dict(local), delivered_w=delivered, s=s,
        iterations=iterations, residual_db=residual, clamped=tuple(clamped),
    )


def _measure(design, f, z, port, power_dbm) -> dict:
    zt = tuple(z[n] for n in NC_NAMES)
    v = nc_voltages(node_voltages(design, f, zt, port, power_dbm))
    return {n: equivalent_drive_dbm(abs(v[n]), z[n], design.z_p) for n in NC_NAMES}


def insertion_loss_db(s: complex) -> float:
    return -amplitude_to_db(s) if s != 0 else math.inf
