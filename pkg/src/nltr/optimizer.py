"""Genetic-algorithm re-synthesis of the three line sections.

The six genes are the electrical lengths (deg) and characteristic
impedances (ohm) of IT1..IT3.  A candidate is scored by probing a Rx-mode
operating point (antenna driven at low power) and a Tx-mode operating point
(transmitter driven at high power) across the band; each metric's shortfall
against its target is taken at the worst band frequency and the shortfalls
are summed with weights.  Lower is better; zero meets every target.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .diode import NonConvergence
from .network import (
    SingularNetwork,
    SwitchDesign,
    insertion_loss_db,
    solve_operating_point,
)
from .surface import RangeError
from .units import ConfigError

GENES = ("theta1", "theta2", "theta3", "z1", "z2", "z3")
PENALTY = 1e3


@dataclass(frozen=True)
class DesignVector:
    theta1: float
    theta2: float
    theta3: float
    z1: float
    z2: float
    z3: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, g) for g in GENES], dtype=float)

    @classmethod
    def from_array(cls, x) -> "DesignVector":
        return cls(*(float(v) for v in x))

    @classmethod
    def from_design(cls, d: SwitchDesign) -> "DesignVector":
        return cls(d.it1.theta_ref, d.it2.theta_ref, d.it3.theta_ref,
                   d.it1.z0, d.it2.z0, d.it3.z0)

    def apply(self, d: SwitchDesign) -> SwitchDesign:
        return d.with_lines((self.theta1, self.theta2, self.theta3),
                            (self.z1, self.z2, self.z3))


@dataclass(frozen=True)
class Bounds:
    theta: tuple = (10.0, 120.0)
    z0: tuple = (30.0, 120.0)

    def __post_init__(self):
        for name, (lo, hi) in (("theta", self.theta), ("z0", self.z0)):
            if not lo < hi:
                raise ConfigError(f"{name} bounds must satisfy lo < hi")

    @property
    def lower(self) -> np.ndarray:
        return np.array([self.theta[0]] * 3 + [self.z0[0]] * 3)

    @property
    def upper(self) -> np.ndarray:
        return np.array([self.theta[1]] * 3 + [self.z0[1]] * 3)

    def contains(self, x) -> bool:
        x = np.asarray(x)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))


@dataclass(frozen=True)
class ObjectiveSpec:
    f_start: float = 0.8e9
    f_stop: float = 1.3e9
    n_freq: int = 6
    rx_probe_dbm: float = -30.0
    tx_probe_dbm: float = 30.0
    w_il_rx: float = 1.0
    w_il_tx: float = 1.0
    w_isolation: float = 1.0
    w_return_loss: float = 1.0
    target_il_rx: float = 1.0
    target_il_tx: float = 1.0
    target_isolation: float = 15.0
    target_return_loss: float = 10.0
    direct: bool = False

    def __post_init__(self):
        w = (self.w_il_rx, self.w_il_tx, self.w_isolation, self.w_return_loss)
        if min(w) < 0 or max(w) == 0:
            raise ConfigError("objective weights must be >= 0 and not all zero")
        if self.n_freq < 1 or not self.f_start <= self.f_stop:
            raise ConfigError("objective band is invalid")

    @property
    def frequencies(self) -> np.ndarray:
        if self.n_freq == 1:
            return np.array([self.f_start])
        return np.linspace(self.f_start, self.f_stop, self.n_freq)


@dataclass(frozen=True)
class GAConfig:
    population: int = 32
    generations: int = 40
    tournament: int = 3
    crossover_rate: float = 0.9
    mutation_sigma: float = 0.05
    elitism: int = 2
    seed: int = 0
    bounds: Bounds = field(default_factory=Bounds)

    def __post_init__(self):
        if self.population < 2 or self.generations < 0 or self.tournament < 1:
            raise ConfigError("GA population >= 2, generations >= 0, tournament >= 1")
        if not 1 <= self.elitism <= self.population:
            raise ConfigError("GA elitism must be in [1, population]")
        if not (0 <= self.crossover_rate <= 1 and 0 <= self.mutation_sigma <= 1):
            raise ConfigError("GA rates must lie in [0, 1]")


def band_metrics(design: SwitchDesign, spec: ObjectiveSpec, surfaces) -> dict:
    """Worst-case band metrics (dB) of a design at the two probe powers."""
    il_rx = il_tx = -math.inf
    iso = rl = math.inf
    for f in spec.frequencies:
        rx = solve_operating_point(design, surfaces, f, "ant", spec.rx_probe_dbm,
                                   direct=spec.direct)
        tx = solve_operating_point(design, surfaces, f, "tx", spec.tx_probe_dbm,
                                   direct=spec.direct)
        il_rx = max(il_rx, insertion_loss_db(rx.s_ij("rx", "ant")))
        il_tx = max(il_tx, insertion_loss_db(tx.s_ij("ant", "tx")))
        iso = min(iso, insertion_loss_db(rx.s_ij("rx", "tx")),
                  insertion_loss_db(tx.s_ij("rx", "tx")))
        rl = min(rl, insertion_loss_db(rx.s_ij("ant", "ant")),
                 insertion_loss_db(tx.s_ij("tx", "tx")))
    return {"il_rx_db": il_rx, "il_tx_db": il_tx, "isolation_db": iso,
            "return_loss_db": rl}


def score_metrics(m: dict, spec: ObjectiveSpec) -> float:
    return (spec.w_il_rx * max(0.0, m["il_rx_db"] - spec.target_il_rx)
            + spec.w_il_tx * max(0.0, m["il_tx_db"] - spec.target_il_tx)
            + spec.w_isolation * max(0.0, spec.target_isolation - m["isolation_db"])
            + spec.w_return_loss * max(0.0, spec.target_return_loss - m["return_loss_db"]))


def evaluate_objective(v: DesignVector, spec: ObjectiveSpec, surfaces,
                       base: SwitchDesign = SwitchDesign()) -> float:
    """Weighted worst-case hinge loss; a failed probe scores ``PENALTY``."""
    try:
        design = v.apply(base)
        score = score_metrics(band_metrics(design, spec, surfaces), spec)
    except (NonConvergence, SingularNetwork, ConfigError):
        return PENALTY
    except RangeError:
        raise
    return score if math.isfinite(score) else PENALTY


@dataclass
class GAReport:
    best: DesignVector
    best_score: float
    best_trace: list
    mean_trace: list
    evaluations: int

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["generation", "best_score", "mean_score"])
        for g, (b, m) in enumerate(zip(self.best_trace, self.mean_trace)):
            w.writerow([g, f"{b:.17g}", f"{m:.17g}"])
        return buf.getvalue()

    def design_fragment(self) -> dict:
        """Best design as a config ``lines`` fragment."""
        v = self.best
        return {"lines": {
            "it1": {"z0": v.z1, "theta_deg": v.theta1},
            "it2": {"z0": v.z2, "theta_deg": v.theta2},
            "it3": {"z0": v.z3, "theta_deg": v.theta3},
        }}

    def to_json(self) -> str:
        return json.dumps({"best": asdict(self.best), "best_score": self.best_score,
                           "evaluations": self.evaluations,
                           "best_trace": self.best_trace, "mean_trace": self.mean_trace},
                          indent=2, sort_keys=True)


def random_designs(n: int, bounds: Bounds, seed: int) -> list:
    rng = np.random.default_rng(seed)
    lo, hi = bounds.lower, bounds.upper
    return [DesignVector.from_array(lo + (hi - lo) * rng.random(lo.size)) for _ in range(n)]


def ga_optimize(cfg: GAConfig, spec: ObjectiveSpec, surfaces,
                base: SwitchDesign = SwitchDesign(), progress=None) -> GAReport:
    """Minimise :func:`evaluate_objective` over the six line genes.

    Tournament selection, uniform crossover, Gaussian mutation of every gene
    (sigma a fraction of the bound width) clamped to the bounds, and
    elitism.  Each offspring draws from its own generator seeded by
    ``(seed, generation, index)``, so results do not depend on evaluation
    order.
    """
    lo, hi = cfg.bounds.lower, cfg.bounds.upper
    width = hi - lo
    cache: dict = {}

    def score(x):
        key = tuple(x.tolist())
        if key not in cache:
            cache[key] = evaluate_objective(DesignVector.from_array(x), spec, surfaces, base)
        return cache[key]

    rng0 = np.random.default_rng([cfg.seed, 0, 0])
    pop = lo + width * rng0.random((cfg.population, lo.size))
    scores = np.array([score(x) for x in pop])
    best_trace, mean_trace = [], []

    def record():
        best_trace.append(float(scores.min()))
        mean_trace.append(float(scores.mean()))
        if progress:
            progress(len(best_trace) - 1, best_trace[-1], mean_trace[-1])

    record()
    for gen in range(1, cfg.generations + 1):
        order = np.argsort(scores, kind="stable")
        children = [pop[i].copy() for i in order[:cfg.elitism]]
        for idx in range(cfg.population - cfg.elitism):
            rng = np.random.default_rng([cfg.seed, gen, idx + 1])
            a = _tournament(rng, scores, cfg.tournament)
            b = _tournament(rng, scores, cfg.tournament)
            child = pop[a].copy()
            if rng.random() < cfg.crossover_rate:
                mask = rng.random(lo.size) < 0.5
                child[mask] = pop[b][mask]
            child += rng.normal(0.0, cfg.mutation_sigma, lo.size) * width
            children.append(np.clip(child, lo, hi))
        pop = np.array(children)
        scores = np.array([score(x) for x in pop])
        record()
    i = int(np.argmin(scores))
    return GAReport(DesignVector.from_array(pop[i]), float(scores[i]),
                    best_trace, mean_trace, len(cache))


def _tournament(rng, scores, k) -> int:
    picks = rng.integers(0, scores.size, size=k)
    return int(picks[np.argmin(scores[picks])])
