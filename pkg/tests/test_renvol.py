import math

import numpy as np
import pytest

from conftest import hemisphere
from rvkit.boundary import RoundSphere
from rvkit.phg import PhgSeries
from rvkit.renvol import (HemisphereTail, RenvolError, check_equivalence, finite_part,
                          hadamard_rv, pole_ledger, riesz_rv, special_bdf_localized)

HEMISPHERE_RV = {2: -2 * math.pi, 3: -7.496764834197, 4: 4 * math.pi ** 2 / 3}


def _const(m, order=8):
    return PhgSeries.constant(1.0, order, m=m, codim1=True)


def test_finite_part_by_order():
    m = 3
    c = PhgSeries.from_terms({(k, False): float(k + 1) for k in range(8)}
                             | {(4, True): 0.7}, 7, m=m, codim1=True)
    b = RoundSphere(1.0, m, m - 1)
    vol = b.volume
    j = 2
    assert finite_part(c, _const(m), m, j, 1, boundary=b).value == pytest.approx(
        c.coeff(m + j - 1) * vol)
    assert finite_part(c, _const(m), m, j, 2, boundary=b).value == pytest.approx(
        -c.coeff(m + j - 1, True) * vol)
    assert finite_part(c, _const(m), m, j, 3, boundary=b).value == 0.0


@pytest.mark.parametrize("m", [2, 3, 4])
def test_hemisphere_riesz(m):
    res = riesz_rv(hemisphere(1.0, m), HemisphereTail(1.0, m), 0.1)
    assert res.value == pytest.approx(HEMISPHERE_RV[m], abs=1e-8)


@pytest.mark.parametrize("delta", [0.05, 0.1, 0.3])
def test_riesz_independent_of_split(delta):
    res = riesz_rv(hemisphere(1.0, 2), HemisphereTail(1.0, 2), delta)
    assert res.value == pytest.approx(-2 * math.pi, abs=1e-10)


def test_scaling_invariance_even_m():
    # renormalized volume is scale invariant in even dimension
    R = 2.5
    res = riesz_rv(hemisphere(R, 4), HemisphereTail(R, 4), 0.1 * R)
    assert res.value == pytest.approx(HEMISPHERE_RV[4], rel=1e-9)


def test_hadamard_matches_riesz_m2():
    tail = HemisphereTail(1.0, 2)
    res = hadamard_rv(lambda e: tail.tail(e)[0], 2)
    assert res.value == pytest.approx(-2 * math.pi, abs=1e-9)
    assert res.divergent["eps^-1"] == pytest.approx(2 * math.pi, rel=1e-9)


def test_hadamard_rejects_bad_ladder():
    with pytest.raises(RenvolError):
        hadamard_rv(np.ones(3), 2, np.array([0.1, 0.05, 0.01]))
    with pytest.raises(RenvolError):
        hadamard_rv(np.ones(24), 2, -np.geomspace(0.1, 1e-3, 24))


def test_pole_ledger_rejects_low_logs():
    q = PhgSeries.from_terms({(0, False): 1.0, (1, True): 1.0}, 6, m=3, codim1=True)
    with pytest.raises(RenvolError):
        pole_ledger(_const(3, 6), q, 3, RoundSphere(1.0, 3, 2))


def test_equivalence_even_and_odd():
    for m in (2, 3):
        eq = check_equivalence(hemisphere(1.0, m), HemisphereTail(1.0, m))
        assert eq["passed"], eq


def test_special_bdf_localized_vanishes_even():
    assert abs(special_bdf_localized(hemisphere(1.0, 2))["value"]) < 1e-12


def test_result_serializes():
    d = riesz_rv(hemisphere(1.0, 2), HemisphereTail(1.0, 2)).to_dict()
    assert d["method"] and d["value"] == pytest.approx(-2 * math.pi)
