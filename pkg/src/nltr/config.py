"""JSON run configuration: schema, defaults, validation and echo."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from .diode import DiodeParams, NonlinearCircuit, SolverSettings
from .network import OperatingPointSettings, SwitchDesign, TransmissionLine
from .optimizer import Bounds, GAConfig, ObjectiveSpec
from .units import ConfigError, Grid2D, make_grid


def _num(minimum=None, exclusive=None):
    s = {"type": "number"}
    if minimum is not None:
        s["minimum"] = minimum
    if exclusive is not None:
        s["exclusiveMinimum"] = exclusive
    return s


def _int(minimum):
    return {"type": "integer", "minimum": minimum}


def _obj(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


_POS = _num(exclusive=0)
_LINE = _obj({"z0": _POS, "theta_deg": {"type": "number", "exclusiveMinimum": 0,
                                        "exclusiveMaximum": 180}})
_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

# SPICE model-card spellings accepted in the diode section
SPICE_NAMES = {"IS": "i_s", "N": "n_ideality", "RS": "r_s", "CJ0": "c_j0", "VJ": "v_j",
               "M": "m_grading", "LP": "l_p", "CP": "c_p", "FC": "fc", "TEMP": "temperature"}

_DIODE_FIELDS = {
    "i_s": _POS, "n_ideality": _POS, "r_s": _num(minimum=0), "c_j0": _num(minimum=0),
    "v_j": _POS, "m_grading": {"type": "number", "exclusiveMinimum": 0,
                               "exclusiveMaximum": 1},
    "l_p": _num(minimum=0), "c_p": _num(minimum=0),
    "fc": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    "temperature": _POS,
}

SCHEMA = _obj({
    "diode": _obj({**_DIODE_FIELDS,
                   **{k: _DIODE_FIELDS[v] for k, v in SPICE_NAMES.items()}}),
    "nc": _obj({"n_series": _int(1), "n_branches": _int(2)}),
    "lines": _obj({"f_ref": _POS, "it1": _LINE, "it2": _LINE, "it3": _LINE}),
    "z_p": _POS,
    "surface_grid": _obj({
        "f_start": _POS, "f_stop": _POS, "f_points": _int(2),
        "p_start": _num(), "p_stop": _num(), "p_points": _int(2),
    }),
    "solver": _obj({
        "method": {"enum": ["hb", "transient"]},
        "samples_per_period": _int(8), "transient_steps_per_period": _int(8),
        "tol": _POS, "max_iterations": _int(1), "max_periods": _int(2),
        "workers": _int(1),
    }),
    "operating_point": _obj({
        "self_consistent": {"type": "boolean"},
        "relaxation": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "tol_db": _POS, "max_iterations": _int(1), "mode_margin_db": _num(minimum=0),
    }),
    "sweeps": _obj({
        "freq": _obj({"power_dbm": _num(), "f_start": _POS, "f_stop": _POS, "n": _int(1)}),
        "power": _obj({"f": _POS, "p_start": _num(), "p_stop": _num(), "n": _int(1)}),
        "rx_il_threshold_db": _num(minimum=0),
    }),
    "optimizer": _obj({
        "ga": _obj({
            "population": _int(2), "generations": _int(0), "tournament": _int(1),
            "crossover_rate": {"type": "number", "minimum": 0, "maximum": 1},
            "mutation_sigma": {"type": "number", "minimum": 0, "maximum": 1},
            "elitism": _int(1), "seed": _int(0),
            "theta_bounds": _PAIR, "z0_bounds": _PAIR,
        }),
        "objective": _obj({
            "f_start": _POS, "f_stop": _POS, "n_freq": _int(1),
            "rx_probe_dbm": _num(), "tx_probe_dbm": _num(),
            **{k: _num(minimum=0) for k in (
                "w_il_rx", "w_il_tx", "w_isolation", "w_return_loss",
                "target_il_rx", "target_il_tx", "target_isolation",
                "target_return_loss")},
        }),
    }),
    "output_dir": {"type": "string", "minLength": 1},
})

DEFAULTS = {
    "diode": {"i_s": 4e-8, "n_ideality": 1.05, "r_s": 12.0, "c_j0": 1e-13, "v_j": 0.5,
              "m_grading": 0.35, "l_p": 2e-9, "c_p": 8e-14, "fc": 0.5,
              "temperature": 298.15},
    "nc": {"n_series": 2, "n_branches": 4},
    "lines": {"f_ref": 1e9,
              "it1": {"z0": 89.0, "theta_deg": 28.0},
              "it2": {"z0": 97.0, "theta_deg": 86.0},
              "it3": {"z0": 84.0, "theta_deg": 25.0}},
    "z_p": 50.0,
    "surface_grid": {"f_start": 0.6e9, "f_stop": 1.5e9, "f_points": 46,
                     "p_start": -40.0, "p_stop": 30.0, "p_points": 36},
    "solver": {"method": "hb", "samples_per_period": 256,
               "transient_steps_per_period": 512, "tol": 1e-6,
               "max_iterations": 200, "max_periods": 400, "workers": 1},
    "operating_point": {"self_consistent": True, "relaxation": 0.5, "tol_db": 0.05,
                        "max_iterations": 100, "mode_margin_db": 3.0},
    "sweeps": {"freq": {"power_dbm": -30.0, "f_start": 0.8e9, "f_stop": 1.3e9, "n": 101},
               "power": {"f": 1.2e9, "p_start": -40.0, "p_stop": 30.0, "n": 71},
               "rx_il_threshold_db": 2.0},
    "optimizer": {
        "ga": {"population": 32, "generations": 40, "tournament": 3,
               "crossover_rate": 0.9, "mutation_sigma": 0.05, "elitism": 2, "seed": 0,
               "theta_bounds": [10.0, 120.0], "z0_bounds": [30.0, 120.0]},
        "objective": {"f_start": 0.8e9, "f_stop": 1.3e9, "n_freq": 6,
                      "rx_probe_dbm": -30.0, "tx_probe_dbm": 30.0,
                      "w_il_rx": 1.0, "w_il_tx": 1.0, "w_isolation": 1.0,
                      "w_return_loss": 1.0, "target_il_rx": 1.0, "target_il_tx": 1.0,
                      "target_isolation": 15.0, "target_return_loss": 10.0},
    },
    "output_dir": "nltr-out",
}


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; ``raw`` holds the effective JSON document."""

    raw: dict
    design: SwitchDesign
    grid: Grid2D
    solver: str
    solver_settings: SolverSettings
    workers: int
    self_consistent: bool
    op_settings: OperatingPointSettings
    objective: ObjectiveSpec
    ga: GAConfig

    @property
    def nc(self) -> NonlinearCircuit:
        return self.design.nc1

    @property
    def freq_sweep(self) -> dict:
        return self.raw["sweeps"]["freq"]

    @property
    def power_sweep(self) -> dict:
        return self.raw["sweeps"]["power"]

    @property
    def rx_il_threshold_db(self) -> float:
        return self.raw["sweeps"]["rx_il_threshold_db"]

    @property
    def output_dir(self) -> str:
        return self.raw["output_dir"]

    def effective_json(self) -> str:
        return json.dumps(self.raw, indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.effective_json().encode()).hexdigest()

    def override(self, patch: dict) -> "RunConfig":
        return from_dict(_merge(self.raw, patch))


def _merge(base: dict, patch: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in patch.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _field(err: jsonschema.ValidationError) -> str:
    path = ".".join(str(p) for p in err.absolute_path)
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        path = ".".join(filter(None, [path, extra[0] if extra else ""]))
        return f"{path}: unknown key"
    return f"{path or '<root>'}: {err.message}"


def _canonical_diode(doc: dict) -> dict:
    card = doc.get("diode")
    if not card:
        return doc
    out = {}
    for k, v in card.items():
        name = SPICE_NAMES.get(k, k)
        if name in out:
            raise ConfigError(f"diode.{k}: duplicates diode.{name}")
        out[name] = v
    return {**doc, "diode": out}


def _build(field: str, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"{field}: {exc}") from None


def from_dict(doc: dict) -> RunConfig:
    """Validate ``doc`` against :data:`SCHEMA`, fill defaults and build objects."""
    if not isinstance(doc, dict):
        raise ConfigError("<root>: configuration must be a JSON object")
    errors = sorted(jsonschema.Draft202012Validator(SCHEMA).iter_errors(doc),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ConfigError("; ".join(_field(e) for e in errors))
    doc = _canonical_diode(doc)
    raw = _merge(DEFAULTS, doc)

    diode = _build("diode", DiodeParams, **raw["diode"])
    nc = _build("nc", NonlinearCircuit, diode, **raw["nc"])
    ln = raw["lines"]
    lines = [_build(f"lines.{k}", TransmissionLine, ln[k]["z0"], ln[k]["theta_deg"],
                    ln["f_ref"]) for k in ("it1", "it2", "it3")]
    design = _build("z_p", SwitchDesign, *lines, nc, nc, nc, nc, z_p=raw["z_p"])
    g = raw["surface_grid"]
    grid = _build("surface_grid", make_grid, g["f_start"], g["f_stop"], g["f_points"],
                  g["p_start"], g["p_stop"], g["p_points"])
    s = dict(raw["solver"])
    method, workers = s.pop("method"), s.pop("workers")
    settings = _build("solver", SolverSettings, **s)
    op = dict(raw["operating_point"])
    self_consistent = op.pop("self_consistent")
    op_settings = _build("operating_point", OperatingPointSettings, **op)
    for name, sw, lo, hi in (("sweeps.freq", raw["sweeps"]["freq"], "f_start", "f_stop"),
                             ("sweeps.power", raw["sweeps"]["power"], "p_start", "p_stop")):
        if sw[lo] > sw[hi]:
            raise ConfigError(f"{name}: {lo} must not exceed {hi}")
    o = raw["optimizer"]
    objective = _build("optimizer.objective", ObjectiveSpec, **o["objective"],
                       direct=not self_consistent)
    ga = dict(o["ga"])
    bounds = _build("optimizer.ga", Bounds, tuple(ga.pop("theta_bounds")),
                    tuple(ga.pop("z0_bounds")))
    ga_cfg = _build("optimizer.ga", GAConfig, **ga, bounds=bounds)
    return RunConfig(raw, design, grid, method, settings, workers, self_consistent,
                     op_settings, objective, ga_cfg)


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: JSON parse error: "
                          f"{exc.msg}") from None
    return from_dict(doc)


def load_config(path) -> RunConfig:
    """Read, validate and default a JSON configuration file."""
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def bundled_config_path(name: str = "table1.json") -> Path:
    return Path(str(resources.files("nltr") / "data" / name))


def default_config() -> RunConfig:
    return load_config(bundled_config_path())
