import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nltr.units import (
    ConfigError,
    Grid2D,
    Immittance,
    amplitude_to_db,
    dbm_to_watts,
    make_grid,
    ratio_to_db,
    sweep_axis,
    watts_to_dbm,
)


@pytest.mark.parametrize("dbm, watts", [(0, 1e-3), (30, 1.0), (-30, 1e-6)])
def test_dbm_to_watts_reference_points(dbm, watts):
    assert dbm_to_watts(dbm) == pytest.approx(watts, rel=1e-15)


@pytest.mark.parametrize("r, db", [(1.0, 0.0), (0.5, -3.0103), (100, 20.0)])
def test_ratio_to_db_reference_points(r, db):
    assert ratio_to_db(r) == pytest.approx(db, abs=5e-5)


def test_ratio_to_db_half_exact():
    assert ratio_to_db(0.5) == pytest.approx(-10 * math.log10(2), abs=1e-15)


@pytest.mark.parametrize("r", [0.0, -1.0])
def test_ratio_to_db_rejects_nonpositive(r):
    with pytest.raises(ValueError):
        ratio_to_db(r)


def test_amplitude_to_db_is_twenty_log():
    assert amplitude_to_db(0.1) == pytest.approx(-20.0)
    assert amplitude_to_db(-10j) == pytest.approx(20.0)


@given(st.floats(-60, 40))
def test_dbm_watts_round_trip(dbm):
    back = watts_to_dbm(dbm_to_watts(dbm))
    assert abs(back - dbm) <= 1e-12 * max(1.0, abs(dbm))
    assert dbm_to_watts(dbm) > 0


@given(st.floats(1e-6, 1e6), st.floats(1e-6, 1e6))
def test_ratio_to_db_additive(a, b):
    assert abs(ratio_to_db(a * b) - ratio_to_db(a) - ratio_to_db(b)) <= 1e-10


def test_make_grid_default_axes_exact():
    g = make_grid(0.6e9, 1.5e9, 10, -40, 30, 8)
    assert g.f_axis[0] == 0.6e9 and g.f_axis[-1] == 1.5e9
    assert g.p_axis[0] == -40 and g.p_axis[-1] == 30
    assert g.shape == (10, 8)


def test_make_grid_two_points():
    g = make_grid(1e9, 2e9, 2, 0, 10, 2)
    assert list(g.f_axis) == [1e9, 2e9] and list(g.p_axis) == [0, 10]


@pytest.mark.parametrize("args", [(2e9, 1e9, 5, 0, 10, 3), (1e9, 2e9, 1, 0, 10, 3),
                                  (1e9, 2e9, 3, 10, 0, 3), (1e9, 2e9, 3, 0, 10, 1)])
def test_make_grid_rejects_bad_axes(args):
    with pytest.raises(ConfigError):
        make_grid(*args)


@given(st.floats(1e8, 5e9), st.floats(1e6, 5e9), st.integers(2, 60),
       st.floats(-80, 20), st.floats(0.5, 60), st.integers(2, 60))
def test_grid_endpoints_bit_exact(f0, df, nf, p0, dp, npnt):
    g = make_grid(f0, f0 + df, nf, p0, p0 + dp, npnt)
    assert g.f_axis[0] == f0 and g.f_axis[-1] == f0 + df
    assert g.p_axis[0] == p0 and g.p_axis[-1] == p0 + dp
    assert np.all(np.diff(g.f_axis) > 0) and np.all(np.diff(g.p_axis) > 0)


def test_grid_rejects_unsorted_axes():
    with pytest.raises(ConfigError):
        Grid2D(np.array([1.0, 1.0]), np.array([0.0, 1.0]))


def test_grid_axes_are_read_only():
    g = make_grid(1e9, 2e9, 3, 0, 10, 3)
    with pytest.raises(ValueError):
        g.f_axis[0] = 0


def test_sweep_axis_single_point():
    assert list(sweep_axis(5.0, 5.0, 1)) == [5.0]


@given(st.complex_numbers(min_magnitude=1e-6, max_magnitude=1e6))
def test_immittance_reciprocal(z):
    y = Immittance(z).inverse()
    assert y.kind == "admittance"
    assert abs(y.value * z - 1) < 1e-12
    assert abs(y.as_impedance() - z) <= 1e-12 * abs(z)
    assert Immittance(z).as_admittance() == y.value


def test_open_is_zero_admittance():
    y = Immittance(0j, "admittance")
    with pytest.raises(ZeroDivisionError):
        y.as_impedance()
    with pytest.raises(ValueError):
        Immittance(complex("inf"))
