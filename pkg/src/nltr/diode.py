"""Packaged Schottky diode model and single-tone steady-state solvers.

A nonlinear circuit (NC) block is a set of ``n_branches`` antiparallel
branches, each a series string of ``n_series`` packaged diodes.  A packaged
diode is the junction (exponential current plus graded depletion charge) in
series with ``r_s`` and ``l_p``, with ``c_p`` across the whole package.

Identical diodes in a series string carry the same current and therefore
share the same terminal voltage, and identical branches of one polarity are
in parallel.  Both solvers reduce the block to one forward and one reverse
equivalent branch with scaled element values (see :func:`equivalent_branch`).

Two solvers compute the fundamental-frequency input impedance of the block
when it is driven by a sinusoidal source through a resistive source
impedance:

* :func:`describing_function_impedance` -- collocation harmonic balance with
  Newton iteration on one period of samples.
* :func:`transient_steady_state` -- trapezoidal time stepping until two
  successive periods give the same fundamental phasor.  It is the brute-force
  oracle for the harmonic-balance path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import constants

from .units import ConfigError, dbm_to_watts

EXP_CLAMP = 40.0
# harmonic-balance source stepping: start amplitude (units of n*V_T of the
# diode stack) and step size in dB
CONTINUATION_START_V = 2.0
CONTINUATION_DB = 3.0


class NonConvergence(RuntimeError):
    """A steady-state or operating-point iteration failed to converge."""

    def __init__(self, message, residual=float("nan"), trace=None):
        super().__init__(f"{message} (last residual {residual:.3g})")
        self.residual = residual
        self.trace = list(trace or [])


@dataclass(frozen=True)
class DiodeParams:
    """Large-signal model card of one packaged Schottky diode.

    Defaults follow the designed values (``r_s``, ``c_j0``, ``l_p``, ``c_p``,
    ``v_j``, ``m_grading``).  ``i_s`` and ``n_ideality`` are typical
    SMS7621 values and are configurable.
    """

    i_s: float = 4e-8
    n_ideality: float = 1.05
    r_s: float = 12.0
    c_j0: float = 0.1e-12
    v_j: float = 0.5
    m_grading: float = 0.35
    l_p: float = 2e-9
    c_p: float = 0.08e-12
    fc: float = 0.5
    temperature: float = 298.15

    def __post_init__(self):
        checks = [
            ("i_s", self.i_s > 0, "> 0"),
            ("n_ideality", self.n_ideality > 0, "> 0"),
            ("r_s", self.r_s >= 0, ">= 0"),
            ("c_j0", self.c_j0 > 0, "> 0"),
            ("v_j", self.v_j > 0, "> 0"),
            ("m_grading", 0 < self.m_grading < 1, "in (0, 1)"),
            ("l_p", self.l_p >= 0, ">= 0"),
            ("c_p", self.c_p >= 0, ">= 0"),
            ("fc", 0 < self.fc < 1, "in (0, 1)"),
            ("temperature", self.temperature > 0, "> 0"),
        ]
        for name, ok, rule in checks:
            if not ok:
                raise ConfigError(f"diode parameter {name} must be {rule}, "
                                  f"got {getattr(self, name)!r}")

    @property
    def thermal_voltage(self) -> float:
        return constants.k * self.temperature / constants.e


@dataclass(frozen=True)
class NonlinearCircuit:
    """One NC block: ``n_branches`` antiparallel strings of ``n_series`` diodes.

    Branch polarities alternate, so half of the branches conduct on each
    half-cycle.  The default is four branches of two diodes (eight diodes).
    """

    diode: DiodeParams = field(default_factory=DiodeParams)
    n_series: int = 2
    n_branches: int = 4

    def __post_init__(self):
        if int(self.n_series) != self.n_series or self.n_series < 1:
            raise ConfigError(f"n_series must be an integer >= 1, got {self.n_series!r}")
        if (int(self.n_branches) != self.n_branches or self.n_branches < 2
                or self.n_branches % 2):
            raise ConfigError(f"n_branches must be an even integer >= 2, "
                              f"got {self.n_branches!r}")

    @property
    def total_diodes(self) -> int:
        return self.n_series * self.n_branches


@dataclass(frozen=True)
class DriveSpec:
    """Sinusoidal drive: available power from a resistive source.

    ``polarity`` (+1 or -1) flips the source waveform.  The harmonic-balance
    path imposes the odd symmetry of the antiparallel block and is invariant
    to it by construction; the transient path integrates the flipped drive.
    """

    frequency: float
    available_power_dbm: float
    source_impedance: float = 50.0
    polarity: int = 1

    def __post_init__(self):
        if not self.frequency > 0:
            raise ConfigError(f"drive frequency must be > 0, got {self.frequency!r}")
        if not self.source_impedance > 0:
            raise ConfigError("source impedance must be > 0")
        if self.polarity not in (1, -1):
            raise ConfigError("drive polarity must be +1 or -1")

    @property
    def source_amplitude(self) -> float:
        """Peak open-circuit source voltage, ``2*sqrt(2*P*R)``."""
        return 2.0 * math.sqrt(2.0 * dbm_to_watts(self.available_power_dbm)
                               * self.source_impedance)


@dataclass(frozen=True)
class SolverSettings:
    samples_per_period: int = 256
    transient_steps_per_period: int = 512
    tol: float = 1e-6
    max_iterations: int = 200
    max_periods: int = 400


@dataclass(frozen=True)
class SteadyStateResult:
    z_fundamental: complex
    v1_amplitude: float
    i1_amplitude: float
    iterations: int
    residual: float
    solver: str = ""


# --- junction laws ---------------------------------------------------------

def _exp_clamped(x):
    """exp(x) continued linearly above EXP_CLAMP, and its derivative."""
    x = np.asarray(x, dtype=float)
    xc = np.minimum(x, EXP_CLAMP)
    e = np.exp(xc)
    over = x > EXP_CLAMP
    val = np.where(over, e * (1.0 + (x - EXP_CLAMP)), e)
    return val, e


def diode_current(v, d: DiodeParams):
    """Junction current ``i_s*(exp(v/(n*V_T)) - 1)`` with a clamped exponent."""
    val, _ = _exp_clamped(np.asarray(v, dtype=float) / (d.n_ideality * d.thermal_voltage))
    out = d.i_s * (val - 1.0)
    return out if np.ndim(v) else float(out)


def diode_conductance(v, d: DiodeParams):
    """Derivative of :func:`diode_current` with respect to ``v``."""
    nvt = d.n_ideality * d.thermal_voltage
    _, e = _exp_clamped(np.asarray(v, dtype=float) / nvt)
    out = d.i_s * e / nvt
    return out if np.ndim(v) else float(out)


def junction_capacitance(v, d: DiodeParams):
    """Depletion capacitance with the SPICE forward-bias linear extension.

    Below ``fc*v_j`` this is ``c_j0*(1 - v/v_j)**(-m)``; above it the
    capacitance continues along its tangent line.
    """
    v = np.asarray(v, dtype=float)
    m, vj, fc = d.m_grading, d.v_j, d.fc
    knee = fc * vj
    below = d.c_j0 * np.power(1.0 - np.minimum(v, knee) / vj, -m)
    f1 = (1.0 - fc) ** (-1.0 - m)
    above = d.c_j0 * f1 * (1.0 - fc * (1.0 + m) + m * v / vj)
    out = np.where(v < knee, below, above)
    return out if out.ndim else float(out)


def junction_charge(v, d: DiodeParams):
    """Depletion charge, the integral of :func:`junction_capacitance` from 0."""
    v = np.asarray(v, dtype=float)
    m, vj, fc = d.m_grading, d.v_j, d.fc
    knee = fc * vj
    vb = np.minimum(v, knee)
    below = d.c_j0 * vj / (1.0 - m) * (1.0 - np.power(1.0 - vb / vj, 1.0 - m))
    f1 = (1.0 - fc) ** (-1.0 - m)
    dv = np.maximum(v - knee, 0.0)
    extra = d.c_j0 * f1 * ((1.0 - fc * (1.0 + m)) * dv
                           + m / (2.0 * vj) * (np.maximum(v, knee) ** 2 - knee ** 2))
    out = below + extra
    return out if out.ndim else float(out)


# --- block reduction --------------------------------------------------------

@dataclass(frozen=True)
class EquivalentBranch:
    """One polarity of an NC block collapsed to a single equivalent branch.

    ``series_l`` / ``series_r`` are the branch inductance and resistance,
    ``node_c`` the total package capacitance across the block terminals.
    The junction element scales voltage by ``n_series`` and current by the
    number of parallel strings ``n_parallel``.
    """

    diode: DiodeParams
    n_series: int
    n_parallel: int
    series_l: float
    series_r: float
    node_c: float

    def current(self, u):
        return self.n_parallel * diode_current(np.asarray(u) / self.n_series, self.diode)

    def conductance(self, u):
        return (self.n_parallel / self.n_series
                * diode_conductance(np.asarray(u) / self.n_series, self.diode))

    def charge(self, u):
        return self.n_parallel * junction_charge(np.asarray(u) / self.n_series, self.diode)

    def capacitance(self, u):
        return (self.n_parallel / self.n_series
                * junction_capacitance(np.asarray(u) / self.n_series, self.diode))


def equivalent_branch(nc: NonlinearCircuit) -> EquivalentBranch:
    d = nc.diode
    ns, npar = nc.n_series, nc.n_branches // 2
    return EquivalentBranch(
        diode=d, n_series=ns, n_parallel=npar,
        series_l=ns * d.l_p / npar,
        series_r=ns * d.r_s / npar,
        node_c=nc.n_branches * d.c_p / ns,
    )


def small_signal_impedance(nc: NonlinearCircuit, f: float) -> complex:
    """Zero-bias linear impedance of the NC block at frequency ``f``."""
    eb = equivalent_branch(nc)
    w = 2 * math.pi * f
    yj = eb.conductance(0.0) + 1j * w * eb.capacitance(0.0)
    zb = eb.series_r + 1j * w * eb.series_l + 1.0 / yj
    return 1.0 / (2.0 / zb + 1j * w * eb.node_c)


# --- harmonic balance ------------------------------------------------------

def _circulant(mult: np.ndarray, k: int) -> np.ndarray:
    """Real K x K matrix of the operator ``irfft(mult * rfft(x))``."""
    return np.fft.irfft(mult[:, None] * np.fft.rfft(np.eye(k), axis=0), n=k, axis=0)


def _limit_step(u_old, u_new, vt):
    """SPICE-style junction limiting applied per sample on forward steps."""
    du = u_new - u_old
    big = (u_new > 10 * vt) & (du > 2 * vt)
    if not np.any(big):
        return u_new
    out = u_new.copy()
    uo = u_old[big]
    step = du[big]
    pos = uo > 0
    lim = np.where(pos, uo + vt * np.log1p(step / vt), 10 * vt + vt * np.log1p(
        np.maximum(u_new[big] - 10 * vt, 0.0) / vt))
    out[big] = np.minimum(lim, u_new[big])
    return out


def describing_function_impedance(nc: NonlinearCircuit, drive: DriveSpec,
                                  settings: SolverSettings = SolverSettings()
                                  ) -> SteadyStateResult:
    """Fundamental input impedance of a driven NC block by harmonic balance.

    The forward junction voltage is sampled at ``K`` points over one period.
    The reverse branch is the half-period-shifted mirror image of the forward
    one (odd symmetry of the antiparallel block), so only the forward samples
    are unknown.  Linear elements act per harmonic, the junction laws act
    per sample, and Newton's method drives the collocation residual to zero.
    """
    K = settings.samples_per_period
    eb = equivalent_branch(nc)
    w = 2 * math.pi * drive.frequency
    r0 = drive.source_impedance
    kk = np.arange(K // 2 + 1)
    jkw = 1j * kk * w
    y_lr = 1.0 / (eb.series_r + jkw * eb.series_l)
    # reverse-branch spectrum is s_k * forward spectrum, s_k = -(-1)^k
    s_k = -np.where(kk % 2 == 0, 1.0, -1.0)
    den = 1.0 / r0 + jkw * eb.node_c + 2.0 * y_lr
    a_mult = y_lr * (1.0 - y_lr * (1.0 + s_k) / den)
    src = np.zeros(K // 2 + 1, dtype=complex)
    src[1] = drive.source_amplitude * K / 2
    d_mult = jkw.copy()
    d_mult[-1] = 0.0
    M_a = _circulant(a_mult, K)
    M_d = _circulant(d_mult, K)

    def node_fundamental(u):
        u1 = np.fft.rfft(u)[1] * 2 / K
        return (drive.source_amplitude / r0 + 2 * y_lr[1] * u1) / den[1]

    vt = eb.n_series * eb.diode.n_ideality * eb.diode.thermal_voltage
    b_unit = np.fft.irfft(y_lr * src / (r0 * den), n=K) / drive.source_amplitude

    def residual(u, amp):
        q = eb.charge(u)
        return (M_a @ u - amp * b_unit + eb.current(u)
                + np.fft.irfft(d_mult * np.fft.rfft(q), n=K))

    def node_fundamental(u, amp):
        u1 = np.fft.rfft(u)[1] * 2 / K
        return (amp / r0 + 2 * y_lr[1] * u1) / den[1]

    # fixed source-stepping schedule: linear start, then CONTINUATION_DB steps
    target = drive.source_amplitude
    amps = [target]
    while amps[-1] > CONTINUATION_START_V * vt:
        amps.append(amps[-1] / 10 ** (CONTINUATION_DB / 20))
    amps.reverse()

    u = np.zeros(K)
    total = 0
    trace = []
    for amp in amps:
        scale = max(amp * np.max(np.abs(b_unit)), 1e-30)
        v1_old = node_fundamental(u, amp)
        r = residual(u, amp)
        norm = np.linalg.norm(r)
        for it in range(1, settings.max_iterations + 1):
            J = M_a + np.diag(eb.conductance(u)) + M_d * eb.capacitance(u)[None, :]
            step = np.linalg.solve(J, -r)
            lam = 1.0
            for _ in range(30):
                u_try = _limit_step(u, u + lam * step, vt)
                r_try = residual(u_try, amp)
                n_try = np.linalg.norm(r_try)
                if n_try < norm or n_try <= 1e-12 * scale:
                    break
                lam *= 0.5
            u, r, norm = u_try, r_try, n_try
            v1 = node_fundamental(u, amp)
            change = abs(v1 - v1_old) / max(abs(v1), 1e-300)
            v1_old = v1
            resid = float(np.max(np.abs(r))) / scale
            trace.append(change)
            if change < settings.tol and resid < 1e-6:
                break
        else:
            raise NonConvergence(
                f"harmonic balance did not converge at f={drive.frequency:g} Hz, "
                f"P={drive.available_power_dbm:g} dBm", trace[-1], trace)
        total += it
    i1 = (drive.source_amplitude - v1) / r0
    return SteadyStateResult(complex(v1 / i1), abs(v1), abs(i1), total, change, "hb")


# --- transient oracle ------------------------------------------------------

def transient_steady_state(nc: NonlinearCircuit, drive: DriveSpec,
                           settings: SolverSettings = SolverSettings()
                           ) -> SteadyStateResult:
    """Fundamental input impedance by brute-force time integration.

    Integrates both equivalent branches (no symmetry assumption) from rest
    with the trapezoidal rule in charge form and stops once the node voltage
    fundamental of two successive periods agrees to ``settings.tol``.
    """
    n_steps = settings.transient_steps_per_period
    if n_steps < 200:
        raise ConfigError("transient needs at least 200 steps per period")
    eb = equivalent_branch(nc)
    d = eb.diode
    if eb.series_l == 0 and eb.series_r == 0:
        raise ConfigError("transient oracle needs nonzero series R or L")
    w = 2 * math.pi * drive.frequency
    h = 2 * math.pi / w / n_steps
    hh = h / 2
    r0, C, L, R = drive.source_impedance, eb.node_c, eb.series_l, eb.series_r
    vamp = drive.polarity * drive.source_amplitude
    ns, npar = eb.n_series, eb.n_parallel
    nvt = d.n_ideality * d.thermal_voltage * ns
    i_s = d.i_s * npar
    m, vj, fc, cj0 = d.m_grading, d.v_j * ns, d.fc, d.c_j0 * npar / ns
    knee = fc * vj
    f1 = (1.0 - fc) ** (-1.0 - m)
    q_knee = cj0 * vj / (1 - m) * (1 - (1 - fc) ** (1 - m))

    # scalar junction laws of the forward equivalent junction (stack voltage)
    def jlaw(u):
        x = u / nvt
        if x > EXP_CLAMP:
            e = math.exp(EXP_CLAMP)
            i, g = i_s * (e * (1 + x - EXP_CLAMP) - 1), i_s * e / nvt
        else:
            e = math.exp(x)
            i, g = i_s * (e - 1), i_s * e / nvt
        if u < knee:
            t = 1 - u / vj
            q = cj0 * vj / (1 - m) * (1 - t ** (1 - m))
            c = cj0 * t ** (-m)
        else:
            c = cj0 * f1 * (1 - fc * (1 + m) + m * u / vj)
            q = q_knee + cj0 * f1 * ((1 - fc * (1 + m)) * (u - knee)
                                     + m / (2 * vj) * (u * u - knee * knee))
        return i, g, q, c

    beta = hh / (L + hh * R)
    vden = C + hh / r0 + 2 * hh * beta
    phase = np.exp(-1j * w * h * np.arange(n_steps))

    V = Ip = Im = Up = Um = 0.0
    ip_d, _, qp, _ = jlaw(Up)
    im_d, _, qm, _ = jlaw(-Um)
    qm = -qm  # reverse junction charge is -q(-u)
    vs0 = 0.0  # sine drive starts at rest, consistent with the zero initial state
    prev = None
    trace = []
    vbuf = np.empty(n_steps)
    ibuf = np.empty(n_steps)
    for period in range(1, settings.max_periods + 1):
        for k in range(n_steps):
            vbuf[k] = V
            ibuf[k] = (vs0 - V) / r0
            vs1 = vamp * math.sin(w * h * (k + 1))
            f0v = (vs0 - V) / r0 - Ip - Im
            ap = (L * Ip + hh * (V - R * Ip - Up)) / (L + hh * R)
            am = (L * Im + hh * (V - R * Im - Um)) / (L + hh * R)
            gamma = (C * V + hh * (vs1 / r0 + f0v) - hh * (ap + am)) / vden
            delta = hh * beta / vden
            g0p = Ip - ip_d
            g0m = Im + im_d  # reverse junction current is -i(-u)
            up, um = Up, Um
            for _ in range(100):
                i_p, g_p, q_p, c_p = jlaw(up)
                i_n, g_n, q_n, c_n = jlaw(-um)
                vn = gamma + delta * (up + um)
                ipn = ap + beta * (vn - up)
                imn = am + beta * (vn - um)
                rp = q_p - qp - hh * (ipn - i_p + g0p)
                rm = -q_n - qm - hh * (imn + i_n + g0m)
                j11 = c_p - hh * (beta * (delta - 1) - g_p)
                j12 = -hh * beta * delta
                j21 = -hh * beta * delta
                j22 = c_n - hh * (beta * (delta - 1) - g_n)
                det = j11 * j22 - j12 * j21
                dup = (-rp * j22 + rm * j12) / det
                dum = (-rm * j11 + rp * j21) / det
                # junction limiting on forward excursions
                lim = 2 * nvt
                if dup > lim and up + dup > 10 * nvt:
                    dup = nvt * math.log1p(dup / nvt)
                if -dum > lim and -(um + dum) > 10 * nvt:
                    dum = -nvt * math.log1p(-dum / nvt)
                up += dup
                um += dum
                if abs(dup) < 1e-12 * (1 + abs(up)) and abs(dum) < 1e-12 * (1 + abs(um)):
                    break
            i_p, _, qp, _ = jlaw(up)
            i_n, _, qm_neg, _ = jlaw(-um)
            V = gamma + delta * (up + um)
            Ip = ap + beta * (V - up)
            Im = am + beta * (V - um)
            Up, Um = up, um
            ip_d, im_d = i_p, i_n
            qm = -qm_neg
            vs0 = vs1
        v1 = 2 / n_steps * complex(np.dot(vbuf, phase))
        i1 = 2 / n_steps * complex(np.dot(ibuf, phase))
        if prev is not None:
            change = abs(v1 - prev) / max(abs(v1), 1e-300)
            trace.append(change)
            if change < settings.tol:
                return SteadyStateResult(complex(v1 / i1), abs(v1), abs(i1),
                                         period, change, "transient")
        prev = v1
    raise NonConvergence(
        f"transient did not settle at f={drive.frequency:g} Hz, "
        f"P={drive.available_power_dbm:g} dBm", trace[-1] if trace else float("nan"), trace)
