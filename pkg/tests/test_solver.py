import math

import numpy as np
import pytest

from conftest import hemisphere
from rvkit.solver import (NonexistenceError, catenoid_threshold, end_expansions,
                          extract_coefficients, solve_rotational, tail_volume)


def test_hemisphere_profile_is_exact():
    sol = solve_rotational("hemisphere", {"R": 1.0})
    e = sol.ends[0]
    assert np.max(np.abs(e.r - np.sqrt(1 - e.x ** 2))) < 1e-12


def test_hemisphere_fit_recovers_u2():
    fit = extract_coefficients(solve_rotational("hemisphere", {"R": 2.0}))[0]
    assert fit["u"][2] == pytest.approx(-0.25, rel=1e-9)
    assert abs(fit["u"][3]) < 1e-9


def test_hemisphere_tail_volume_closed_form():
    sol = solve_rotational("hemisphere", {"R": 1.0})
    delta = 0.1
    # area of {x > delta} on the unit hemisphere in H^3
    assert tail_volume(sol, delta) == pytest.approx(2 * math.pi * (1 / delta - 1), rel=1e-9)


def test_catenoid_boundary_radii(catenoid):
    _, gs = catenoid
    R = sorted(g.boundary.R for g in gs)
    assert R[0] == pytest.approx(math.exp(-0.25), rel=1e-9)
    assert R[1] == pytest.approx(math.exp(0.25), rel=1e-9)


def test_catenoid_fits_match_expansions():
    sol = solve_rotational("catenoid", {"rho": 1.0, "separation": 0.5})
    fits = extract_coefficients(sol)
    for fit, g in zip(fits, end_expansions(sol, fits)):
        assert fit["u"][2] == pytest.approx(-1 / (2 * fit["radius"]), rel=1e-7)
        assert g.coefficient(3) == pytest.approx(fit["u"][3], rel=1e-12)


def test_catenoid_nonexistence():
    d_max = catenoid_threshold()[0]
    assert 0.9 < d_max < 1.1
    with pytest.raises(NonexistenceError):
        solve_rotational("catenoid", {"rho": 1.0, "separation": d_max + 0.1})


def test_inversion_symmetry():
    sol = solve_rotational("catenoid", {"rho": 1.0, "separation": 0.4})
    assert sol.validation["inversion_defect"] < 1e-8


@pytest.mark.parametrize("bad", [{"R": -1.0}])
def test_bad_parameters(bad):
    with pytest.raises(ValueError):
        solve_rotational("hemisphere", bad)
    with pytest.raises(ValueError):
        solve_rotational("torus")


def test_csv_rows_are_pairs_per_end():
    sol = solve_rotational("hemisphere", {"R": 1.0})
    rows = sol.csv_rows()
    assert all(len(r) == 4 for r in rows) and rows[0][0] == 0
