"""Simulation and design synthesis for a diode-based passive T/R switch.

The package models the power-dependent impedance of antiparallel Schottky
diode stacks, evaluates the three-port switch network built around them, and
re-synthesizes the line parameters with a genetic algorithm.
"""

__version__ = "0.1.0"

from .units import (
    Grid2D,
    Immittance,
    amplitude_to_db,
    dbm_to_watts,
    make_grid,
    ratio_to_db,
    watts_to_dbm,
)
from .diode import (
    DiodeParams,
    DriveSpec,
    NonConvergence,
    SteadyStateResult,
    describing_function_impedance,
    diode_current,
    junction_capacitance,
    transient_steady_state,
)
from .surface import ImpedanceSurface, NonlinearCircuit, build_surface, interpolate
from .network import (
    OperatingPoint,
    SParams,
    SwitchDesign,
    TransmissionLine,
    TwoPortABCD,
    solve_operating_point,
)
from .optimizer import DesignVector, GAConfig, GAReport, ObjectiveSpec, evaluate_objective, ga_optimize
from .config import RunConfig, default_config, load_config
from .touchstone import parse_touchstone, write_touchstone
