"""Command-line entry point ``nltr``.

Verbs: ``surface``, ``sweep-freq``, ``sweep-power``, ``reproduce``,
``optimize``, ``validate-config``.  Every verb writes into ``--out`` and
records a ``manifest.json`` with the config hash, library versions and
timings.

Exit codes: 0 success, 2 configuration error, 3 solver non-convergence,
4 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import RunConfig, bundled_config_path, load_config
from .diode import NonConvergence
from .network import SingularNetwork, insertion_loss_db
from .optimizer import ga_optimize
from .surface import RangeError, SurfaceBuildError, atomic_write
from .sweeps import (
    PAIR_COLUMNS,
    SWEEP_COLUMNS,
    crossovers,
    pair_series,
    solve,
    surfaces_for,
    sweep_freq,
    sweep_power,
    write_rows,
)
from .touchstone import write_touchstone
from .units import ConfigError

log = logging.getLogger("nltr")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4

# hardware reference targets, reported as margins only
REF_RX = {"il_ant_rx_db": 1.0, "isolation_db": 18.0, "rl_db": 10.0}
REF_TX = {"il_ant_tx_db": 1.0, "isolation_db": 15.0}
REF_RX_BELOW_DBM, REF_TX_ABOVE_DBM = -5.0, 20.0


class Run:
    """Output directory, timings and manifest for one invocation."""

    def __init__(self, cfg: RunConfig, out: Path, command: str, plots: bool):
        self.cfg, self.out, self.command, self.plots = cfg, out, command, plots
        self.outputs: list = []
        self.timings: dict = {}
        self.results: dict = {}
        out.mkdir(parents=True, exist_ok=True)

    def timed(self, name, fn, *a, **kw):
        t0 = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[name] = round(time.perf_counter() - t0, 6)

    def add(self, path) -> None:
        self.outputs.append(Path(path).name)

    def manifest(self) -> Path:
        doc = {
            "command": self.command,
            "config_sha256": self.cfg.digest(),
            "solver": self.cfg.solver,
            "operating_point": "self-consistent" if self.cfg.self_consistent else "direct",
            "versions": {"nltr": __version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "timings_s": self.timings,
            "outputs": sorted(self.outputs),
            "results": self.results,
        }
        path = self.out / "manifest.json"
        atomic_write(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path


def _columns(closed_form: bool):
    return SWEEP_COLUMNS + (PAIR_COLUMNS if closed_form else [])


def _touchstone_comments(cfg: RunConfig, what: str):
    return [f"nltr {__version__} {what}", f"config sha256 {cfg.digest()}",
            "ports: 1 = Ant, 2 = Tx, 3 = Rx"]


def rx_margins(rows) -> dict:
    """Worst band values and their margin to the Rx-mode reference targets."""
    worst = {"il_ant_rx_db": max(r["il_ant_rx_db"] for r in rows),
             "isolation_db": min(r["isolation_db"] for r in rows),
             "rl_db": min(r["rl_db"] for r in rows)}
    margin = {"il_ant_rx_db": REF_RX["il_ant_rx_db"] - worst["il_ant_rx_db"],
              "isolation_db": worst["isolation_db"] - REF_RX["isolation_db"],
              "rl_db": worst["rl_db"] - REF_RX["rl_db"]}
    return {"worst": worst, "reference": REF_RX, "margin_to_reference": margin,
            "modes": sorted({r["mode"] for r in rows})}


def power_summary(rows) -> dict:
    xs = crossovers(rows)
    return {"crossovers_dbm": xs,
            "reference_window_dbm": [REF_RX_BELOW_DBM, REF_TX_ABOVE_DBM],
            "modes": " ".join(r["mode"] for r in rows)}


def tx_probe(cfg: RunConfig, f: float, power_dbm: float, use_cache: bool = True) -> dict:
    """Tx-mode loss and isolation with the transmitter driven at ``power_dbm``."""
    op = solve(cfg, surfaces_for(cfg, use_cache), f, power_dbm, port="tx")
    got = {"il_ant_tx_db": insertion_loss_db(op.s_ij("ant", "tx")),
           "isolation_db": insertion_loss_db(op.s_ij("rx", "tx"))}
    return {"f_hz": f, "p_dbm": power_dbm, "mode": op.mode, "value": got,
            "reference": REF_TX,
            "margin_to_reference": {"il_ant_tx_db": REF_TX["il_ant_tx_db"] - got["il_ant_tx_db"],
                                "isolation_db": got["isolation_db"] - REF_TX["isolation_db"]}}


def do_surface(run: Run, name: str = "nc_surface.csv") -> None:
    cfg = run.cfg
    surfaces = run.timed("surface", surfaces_for, cfg, run.use_cache)
    path = run.out / name
    surfaces["nc1"].to_csv(path)
    run.add(path)
    if run.plots:
        from .plots import plot_surface
        run.add(plot_surface(surfaces["nc1"], path.with_suffix(".png")))


def do_sweep_freq(run: Run, power, f_start, f_stop, n, name="sweep_freq") -> list:
    cfg = run.cfg
    surfaces = run.timed("surface", surfaces_for, cfg, run.use_cache)
    rows, ops = run.timed("sweep", sweep_freq, cfg, surfaces, power, f_start, f_stop, n,
                          run.closed_form)
    run.add(write_rows(rows, run.out / f"{name}.csv", _columns(run.closed_form)))
    freqs = [r["f_hz"] for r in rows]
    for a, b in (("ant", "rx"), ("ant", "tx")):
        path = run.out / f"{name}_{a}_{b}.s2p"
        write_touchstone(freqs, pair_series(ops, a, b, cfg.design.z_p), path,
                         _touchstone_comments(cfg, f"{a}-{b} at {power:g} dBm"))
        run.add(path)
    if run.plots:
        from .plots import plot_freq_sweep
        run.add(plot_freq_sweep(rows, run.out / f"{name}.png"))
    run.results[name] = rx_margins(rows)
    return rows


def do_sweep_power(run: Run, f, p_start, p_stop, n, name="sweep_power") -> list:
    cfg = run.cfg
    surfaces = run.timed("surface", surfaces_for, cfg, run.use_cache)
    rows, _ = run.timed("sweep", sweep_power, cfg, surfaces, f, p_start, p_stop, n,
                        run.closed_form)
    run.add(write_rows(rows, run.out / f"{name}.csv", _columns(run.closed_form)))
    if run.plots:
        from .plots import plot_power_sweep
        run.add(plot_power_sweep(rows, run.out / f"{name}.png"))
    run.results[name] = power_summary(rows)
    return rows


def do_reproduce(run: Run, figure: str) -> None:
    cfg = run.cfg
    figs = ("fig3", "fig5", "fig6") if figure == "all" else (figure,)
    for fig in figs:
        if fig == "fig3":
            do_surface(run, "fig3_nc_surface.csv")
        elif fig == "fig5":
            s = cfg.freq_sweep
            do_sweep_freq(run, s["power_dbm"], s["f_start"], s["f_stop"], s["n"],
                          "fig5_sweep_freq")
        else:
            s = cfg.power_sweep
            do_sweep_power(run, s["f"], s["p_start"], s["p_stop"], s["n"],
                           "fig6_sweep_power")
            run.results["tx_probe"] = tx_probe(cfg, s["f"], s["p_stop"], run.use_cache)


def do_optimize(run: Run) -> None:
    cfg = run.cfg
    surfaces = run.timed("surface", surfaces_for, cfg, run.use_cache)
    rep = run.timed("optimize", ga_optimize, cfg.ga, cfg.objective, surfaces,
                    cfg.design,
                    progress=lambda g, b, m: log.info("gen %d best %.6g mean %.6g", g, b, m))
    for name, text in (("ga_trace.csv", rep.trace_csv()),
                       ("ga_report.json", rep.to_json() + "\n"),
                       ("ga_best_config.json",
                        json.dumps(rep.design_fragment(), indent=2, sort_keys=True) + "\n")):
        atomic_write(run.out / name, text)
        run.add(run.out / name)
    if run.plots:
        from .plots import plot_ga_trace
        run.add(plot_ga_trace(rep.best_trace, rep.mean_trace, run.out / "ga_trace.png"))
    run.results["optimize"] = {"best_score": rep.best_score,
                               "evaluations": rep.evaluations}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None,
                        help="JSON run configuration (default: bundled table1.json)")
    common.add_argument("--out", type=Path, default=None, help="output directory")
    common.add_argument("--solver", choices=("hb", "transient"), default=None)
    mode = common.add_mutually_exclusive_group()
    mode.add_argument("--direct", dest="self_consistent", action="store_false",
                      default=None, help="index NC surfaces by the excitation power")
    mode.add_argument("--self-consistent", dest="self_consistent", action="store_true",
                      help="solve the self-consistent operating point (default)")
    common.add_argument("--paper-eq4", dest="closed_form", action="store_true",
                        help="add the closed-form Rx-mode coefficient columns")
    common.add_argument("--seed", type=int, default=None, help="GA seed")
    common.add_argument("--workers", type=int, default=None,
                        help="processes for surface builds")
    common.add_argument("--no-cache", action="store_true", help="ignore the surface cache")
    common.add_argument("--no-plots", action="store_true", help="skip PNG rendering")
    common.add_argument("--print-effective-config", action="store_true",
                        help="print the validated configuration and exit")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="nltr", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"nltr {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("surface", parents=[common], help="tabulate the NC impedance")
    sf = sub.add_parser("sweep-freq", parents=[common], help="sweep frequency")
    sf.add_argument("--power", type=float, default=None, help="antenna power (dBm)")
    sf.add_argument("--f-start", type=float, default=None, help="Hz")
    sf.add_argument("--f-stop", type=float, default=None, help="Hz")
    sf.add_argument("-n", type=int, default=None, help="number of points")
    sp = sub.add_parser("sweep-power", parents=[common], help="sweep antenna power")
    sp.add_argument("--freq", type=float, default=None, help="Hz")
    sp.add_argument("--p-start", type=float, default=None, help="dBm")
    sp.add_argument("--p-stop", type=float, default=None, help="dBm")
    sp.add_argument("-n", type=int, default=None, help="number of points")
    rp = sub.add_parser("reproduce", parents=[common], help="canned figure data")
    rp.add_argument("figure", choices=("fig3", "fig5", "fig6", "all"))
    sub.add_parser("optimize", parents=[common], help="GA re-synthesis of the lines")
    sub.add_parser("validate-config", parents=[common], help="check a configuration")
    return p


def _overrides(args) -> dict:
    patch: dict = {}
    if args.solver:
        patch.setdefault("solver", {})["method"] = args.solver
    if args.workers:
        patch.setdefault("solver", {})["workers"] = args.workers
    if args.self_consistent is not None:
        patch["operating_point"] = {"self_consistent": args.self_consistent}
    if args.seed is not None:
        patch["optimizer"] = {"ga": {"seed": args.seed}}
    if args.out is not None:
        patch["output_dir"] = str(args.out)
    if args.command == "sweep-freq":
        sw = {k: v for k, v in (("power_dbm", args.power), ("f_start", args.f_start),
                                ("f_stop", args.f_stop), ("n", args.n)) if v is not None}
        patch["sweeps"] = {"freq": sw}
    elif args.command == "sweep-power":
        sw = {k: v for k, v in (("f", args.freq), ("p_start", args.p_start),
                                ("p_stop", args.p_stop), ("n", args.n)) if v is not None}
        patch["sweeps"] = {"power": sw}
    return patch


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config or bundled_config_path())
        cfg = cfg.override(_overrides(args))
        if args.print_effective_config:
            sys.stdout.write(cfg.effective_json())
            return EXIT_OK
        if args.command == "validate-config":
            print(f"ok {cfg.digest()}")
            return EXIT_OK
        r = Run(cfg, Path(cfg.output_dir), args.command, not args.no_plots)
        r.use_cache, r.closed_form = not args.no_cache, args.closed_form
        if args.command == "surface":
            do_surface(r)
        elif args.command == "sweep-freq":
            s = cfg.freq_sweep
            do_sweep_freq(r, s["power_dbm"], s["f_start"], s["f_stop"], s["n"])
        elif args.command == "sweep-power":
            s = cfg.power_sweep
            do_sweep_power(r, s["f"], s["p_start"], s["p_stop"], s["n"])
        elif args.command == "reproduce":
            do_reproduce(r, args.figure)
        elif args.command == "optimize":
            do_optimize(r)
        r.manifest()
        return EXIT_OK
    except (ConfigError, RangeError) as exc:
        print(f"nltr: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonConvergence, SurfaceBuildError, SingularNetwork) as exc:
        print(f"nltr: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"nltr: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
