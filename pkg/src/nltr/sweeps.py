"""Sweep orchestration and the CSV row schema shared by every command."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import replace
from pathlib import Path

import numpy as np

from .network import (
    NC_NAMES,
    OperatingPoint,
    bind_surfaces,
    insertion_loss_db,
    rx_mode_sparams_closed_form,
    solve_operating_point,
)
from .surface import atomic_write, cached_surface
from .units import sweep_axis

SWEEP_COLUMNS = [
    "f_hz", "p_dbm", "port", "mode",
    "il_ant_rx_db", "il_ant_tx_db", "isolation_db", "rl_db",
    "s11_re", "s11_im", "s21_re", "s21_im", "s31_re", "s31_im",
    "p_out_tx_dbm", "p_out_rx_dbm",
]
PAIR_COLUMNS = ["pair_c1_re", "pair_c1_im", "pair_c2_re", "pair_c2_im"]
TEXT_COLUMNS = {"port", "mode"}
MODES = ("Tx", "Rx", "Transition")


def surfaces_for(cfg, use_cache: bool = True) -> dict:
    """NC surfaces for every block of the configured design."""
    return bind_surfaces(cfg.design, lambda nc: cached_surface(
        nc, cfg.grid, cfg.solver, cfg.solver_settings, cfg.design.z_p,
        workers=cfg.workers, use_cache=use_cache))


def solve(cfg, surfaces, f: float, p_dbm: float, port: str = "ant") -> OperatingPoint:
    return solve_operating_point(cfg.design, surfaces, f, port, p_dbm,
                                 direct=not cfg.self_consistent, settings=cfg.op_settings)


def row_from_point(op: OperatingPoint, design=None, closed_form: bool = False) -> dict:
    """One CSV row; port numbering 1 = Ant, 2 = Tx, 3 = Rx."""
    s11, s21, s31 = op.s_ij("ant", "ant"), op.s_ij("tx", "ant"), op.s_ij("rx", "ant")
    rl_port = op.port
    row = {
        "f_hz": op.frequency, "p_dbm": op.power_dbm, "port": op.port, "mode": op.mode,
        "il_ant_rx_db": insertion_loss_db(s31),
        "il_ant_tx_db": insertion_loss_db(s21),
        "isolation_db": insertion_loss_db(op.s_ij("rx", "tx")),
        "rl_db": insertion_loss_db(op.s_ij(rl_port, rl_port)),
        "s11_re": s11.real, "s11_im": s11.imag,
        "s21_re": s21.real, "s21_im": s21.imag,
        "s31_re": s31.real, "s31_im": s31.imag,
        "p_out_tx_dbm": op.delivered_dbm("tx") if "tx" in op.delivered_w else math.nan,
        "p_out_rx_dbm": op.delivered_dbm("rx") if "rx" in op.delivered_w else math.nan,
    }
    if closed_form:
        z = tuple(op.z_nc[n] for n in NC_NAMES)
        c1, c2 = rx_mode_sparams_closed_form(design, op.frequency, z)
        row.update(pair_c1_re=c1.real, pair_c1_im=c1.imag, pair_c2_re=c2.real,
                   pair_c2_im=c2.imag)
    return row


def sweep_freq(cfg, surfaces, power_dbm: float, f_start: float, f_stop: float, n: int,
               closed_form: bool = False):
    """Rows and operating points across frequency at a fixed antenna power."""
    ops = [solve(cfg, surfaces, float(f), power_dbm) for f in sweep_axis(f_start, f_stop, n)]
    return [row_from_point(op, cfg.design, closed_form) for op in ops], ops


def sweep_power(cfg, surfaces, f: float, p_start: float, p_stop: float, n: int,
                closed_form: bool = False):
    """Rows and operating points across antenna power at a fixed frequency."""
    ops = [solve(cfg, surfaces, f, float(p)) for p in sweep_axis(p_start, p_stop, n)]
    return [row_from_point(op, cfg.design, closed_form) for op in ops], ops


def pair_series(ops, a: str, b: str, z_ref: float):
    return [replace(op.pair(a, b), z_ref=z_ref) for op in ops]


def rx_tx_ratio_db(rows) -> np.ndarray:
    return np.array([r["p_out_rx_dbm"] - r["p_out_tx_dbm"] for r in rows])


def crossovers(rows) -> list:
    """Antenna powers where the Rx/Tx delivered-power ratio changes sign.

    Each crossing is located by linear interpolation of the dB ratio.
    """
    p = np.array([r["p_dbm"] for r in rows])
    d = rx_tx_ratio_db(rows)
    out = []
    for i in range(len(d) - 1):
        if d[i] == 0:
            out.append(float(p[i]))
        elif d[i] * d[i + 1] < 0:
            out.append(float(p[i] + (p[i + 1] - p[i]) * d[i] / (d[i] - d[i + 1])))
    return out


def _cell(v) -> str:
    return v if isinstance(v, str) else "%.17g" % float(v)


def format_rows(rows, columns=None) -> str:
    columns = columns or list(rows[0].keys())
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r[c]) for c in columns])
    return buf.getvalue()


def write_rows(rows, path, columns=None) -> Path:
    path = Path(path)
    atomic_write(path, format_rows(rows, columns))
    return path


def parse_rows(text: str) -> list:
    reader = csv.DictReader(io.StringIO(text))
    return [{k: (v if k in TEXT_COLUMNS else float(v)) for k, v in r.items()}
            for r in reader]


def read_rows(path) -> list:
    return parse_rows(Path(path).read_text())
