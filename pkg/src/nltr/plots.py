"""Figure rendering for the ``reproduce`` command (PNG, non-interactive)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .surface import ImpedanceSurface  # noqa: E402

STYLE = {"figure.figsize": (6.4, 4.2), "axes.grid": True, "grid.alpha": 0.3,
         "font.size": 10, "savefig.dpi": 150}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_surface(surface: ImpedanceSurface, path, freqs=(0.8e9, 1.0e9, 1.2e9)) -> Path:
    """Re/Im of the NC impedance against drive power at a few frequencies."""
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.8), sharex=True)
        fa = surface.grid.f_axis
        for f in freqs:
            i = int(np.argmin(np.abs(fa - f)))
            z = surface.values[i]
            label = f"{fa[i] / 1e9:.2f} GHz"
            a1.plot(surface.grid.p_axis, z.real, label=label)
            a2.plot(surface.grid.p_axis, z.imag, label=label)
        a1.set(xlabel="drive power (dBm)", ylabel="Re Z (ohm)")
        a2.set(xlabel="drive power (dBm)", ylabel="Im Z (ohm)")
        a1.legend()
        return _save(fig, path)


def plot_freq_sweep(rows, path) -> Path:
    """|S| in dB across frequency at fixed antenna power."""
    f = np.array([r["f_hz"] for r in rows]) / 1e9
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(f, [-r["rl_db"] for r in rows], label="|S11|")
        ax.plot(f, [-r["il_ant_tx_db"] for r in rows], label="|S21| Ant-Tx")
        ax.plot(f, [-r["il_ant_rx_db"] for r in rows], label="|S31| Ant-Rx")
        ax.plot(f, [-r["isolation_db"] for r in rows], label="|S32| Tx-Rx")
        ax.set(xlabel="frequency (GHz)", ylabel="magnitude (dB)")
        ax.legend()
        return _save(fig, path)


def plot_power_sweep(rows, path) -> Path:
    """Delivered Tx and Rx power, and the path losses, against antenna power."""
    p = np.array([r["p_dbm"] for r in rows])
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(9, 3.8), sharex=True)
        a1.plot(p, [r["p_out_tx_dbm"] for r in rows], label="Tx port")
        a1.plot(p, [r["p_out_rx_dbm"] for r in rows], label="Rx port")
        a1.set(xlabel="antenna power (dBm)", ylabel="output power (dBm)")
        a1.legend()
        a2.plot(p, [r["il_ant_tx_db"] for r in rows], label="Ant-Tx loss")
        a2.plot(p, [r["il_ant_rx_db"] for r in rows], label="Ant-Rx loss")
        a2.set(xlabel="antenna power (dBm)", ylabel="loss (dB)")
        a2.legend()
        return _save(fig, path)


def plot_ga_trace(best, mean, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(best, label="best")
        ax.plot(mean, label="mean")
        ax.set(xlabel="generation", ylabel="score", yscale="symlog")
        ax.legend()
        return _save(fig, path)
