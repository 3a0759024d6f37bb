import csv
import io

import numpy as np
import pytest

import nltr.optimizer as opt
from nltr.diode import NonConvergence
from nltr.network import SwitchDesign
from nltr.optimizer import (
    PENALTY,
    Bounds,
    DesignVector,
    GAConfig,
    ObjectiveSpec,
    band_metrics,
    evaluate_objective,
    ga_optimize,
    random_designs,
    score_metrics,
)
from nltr.units import ConfigError

NOMINAL = DesignVector.from_design(SwitchDesign())
FAST = ObjectiveSpec(n_freq=3)


def test_nominal_vector():
    assert NOMINAL == DesignVector(28.0, 86.0, 25.0, 89.0, 97.0, 84.0)
    assert NOMINAL.apply(SwitchDesign()) == SwitchDesign()
    assert DesignVector.from_array(NOMINAL.as_array()) == NOMINAL


def test_bounds_defaults_and_validation():
    b = Bounds()
    assert list(b.lower) == [10, 10, 10, 30, 30, 30]
    assert list(b.upper) == [120, 120, 120, 120, 120, 120]
    assert b.contains(NOMINAL.as_array())
    with pytest.raises(ConfigError):
        Bounds(theta=(50, 10))


@pytest.mark.parametrize("kw", [dict(w_il_rx=-1.0),
                                dict(w_il_rx=0, w_il_tx=0, w_isolation=0, w_return_loss=0),
                                dict(n_freq=0)])
def test_objective_spec_validation(kw):
    with pytest.raises(ConfigError):
        ObjectiveSpec(**kw)


@pytest.mark.parametrize("kw", [dict(population=1), dict(elitism=0), dict(elitism=40),
                                dict(crossover_rate=1.5), dict(mutation_sigma=-0.1),
                                dict(tournament=0)])
def test_ga_config_validation(kw):
    with pytest.raises(ConfigError):
        GAConfig(**kw)


def test_score_zero_when_all_targets_met(surfaces):
    lax = ObjectiveSpec(n_freq=3, target_il_rx=50, target_il_tx=50, target_isolation=0,
                        target_return_loss=0)
    assert evaluate_objective(NOMINAL, lax, surfaces) == 0.0


def test_score_is_weighted_hinge_sum():
    m = {"il_rx_db": 1.5, "il_tx_db": 0.5, "isolation_db": 12.0, "return_loss_db": 11.0}
    spec = ObjectiveSpec(w_il_rx=2.0, w_isolation=0.5)
    assert score_metrics(m, spec) == pytest.approx(2.0 * 0.5 + 0.5 * 3.0)


def test_nominal_score_matches_band_metrics(surfaces):
    spec = ObjectiveSpec()
    m = band_metrics(SwitchDesign(), spec, surfaces)
    assert evaluate_objective(NOMINAL, spec, surfaces) == score_metrics(m, spec)
    assert 0 < evaluate_objective(NOMINAL, spec, surfaces) < PENALTY


def test_near_open_branch_is_worse(surfaces):
    spec = ObjectiveSpec()
    bad = DesignVector(179.9, 86.0, 25.0, 89.0, 97.0, 84.0)
    assert evaluate_objective(bad, spec, surfaces) > evaluate_objective(NOMINAL, spec, surfaces)


@pytest.mark.xfail(strict=True, reason=(
    "under the ideal-line model about 20% of uniform random designs score "
    "better than the published line set"))
def test_nominal_beats_95_percent_of_random(surfaces):
    spec = ObjectiveSpec()
    ref = evaluate_objective(NOMINAL, spec, surfaces)
    scores = [evaluate_objective(v, spec, surfaces) for v in random_designs(200, Bounds(), 1)]
    assert np.mean(np.array(scores) > ref) >= 0.95


def test_nonconvergence_scores_penalty(surfaces, monkeypatch):
    def boom(*a, **kw):
        raise NonConvergence("forced", 1.0, [1.0])
    monkeypatch.setattr(opt, "solve_operating_point", boom)
    assert evaluate_objective(NOMINAL, FAST, surfaces) == PENALTY


def test_ga_deterministic_and_serializable(surfaces):
    cfg = GAConfig(population=8, generations=3, seed=7)
    a = ga_optimize(cfg, FAST, surfaces)
    b = ga_optimize(cfg, FAST, surfaces)
    assert a.to_json() == b.to_json() and a.trace_csv() == b.trace_csv()
    c = ga_optimize(GAConfig(population=8, generations=3, seed=8), FAST, surfaces)
    assert c.to_json() != a.to_json()


def test_ga_trace_non_increasing_and_bounds(surfaces, monkeypatch):
    seen = []
    real = opt.evaluate_objective

    def spy(v, *a, **kw):
        seen.append(v.as_array())
        return real(v, *a, **kw)
    monkeypatch.setattr(opt, "evaluate_objective", spy)
    b = Bounds(theta=(20.0, 100.0), z0=(40.0, 110.0))
    rep = ga_optimize(GAConfig(population=10, generations=5, seed=3, mutation_sigma=0.5,
                               bounds=b), FAST, surfaces)
    assert np.all(np.diff(rep.best_trace) <= 0)
    assert len(rep.best_trace) == 6 and len(rep.mean_trace) == 6
    assert rep.best_score == rep.best_trace[-1]
    assert rep.evaluations == len(seen)
    assert all(b.contains(x) for x in seen)


def test_elitism_equal_population_freezes(surfaces):
    rep = ga_optimize(GAConfig(population=6, generations=4, elitism=6, seed=1), FAST, surfaces)
    assert len(set(rep.best_trace)) == 1
    assert len(set(rep.mean_trace)) == 1
    assert rep.evaluations == 6


def test_trace_csv_and_fragment(surfaces):
    rep = ga_optimize(GAConfig(population=4, generations=2, seed=2), FAST, surfaces)
    rows = list(csv.reader(io.StringIO(rep.trace_csv())))
    assert rows[0] == ["generation", "best_score", "mean_score"]
    assert [float(r[1]) for r in rows[1:]] == rep.best_trace
    frag = rep.design_fragment()
    assert frag["lines"]["it1"] == {"z0": rep.best.z1, "theta_deg": rep.best.theta1}


def test_fragment_loads_as_config(surfaces):
    from nltr.config import default_config
    rep = ga_optimize(GAConfig(population=4, generations=1, seed=4), FAST, surfaces)
    cfg = default_config().override(rep.design_fragment())
    assert DesignVector.from_design(cfg.design) == rep.best
