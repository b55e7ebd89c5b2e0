import numpy as np
import pytest

from conftest import hemisphere
from rvkit.boundary import RoundSphere, circle, ellipse
from rvkit.expansion import (apply_indicial, expand_minimal_graph, indicial_polynomial,
                             solve_indicial, special_bdf, special_bdf_residual)
from rvkit.phg import PhgSeries


@pytest.mark.parametrize("m", [2, 3, 4, 5])
@pytest.mark.parametrize("R", [0.5, 2.0])
def test_hemisphere_u2(m, R):
    g = hemisphere(R, m)
    assert g.u2 == pytest.approx(-1 / (2 * R), rel=1e-12)


def test_hemisphere_matches_exact_profile():
    # r = sqrt(R^2 - x^2) - R has only even powers
    g = hemisphere(1.0, 2, order=8)
    exact = {2: -1 / 2, 4: -1 / 8, 6: -1 / 16, 8: -5 / 128}
    for k, v in exact.items():
        assert g.coefficient(k) == pytest.approx(v, abs=1e-12)
    assert g.coefficient(3) == 0.0


def test_odd_dimension_has_log_term():
    g = hemisphere(1.0, 3, order=6)
    assert abs(g.coefficient(4, log=True)) < 1e-12 or g.u[0].has_term(4, True)
    assert g.coefficient(4) == pytest.approx(-1 / 8)


def test_circle_curve_agrees_with_round_sphere():
    gc = expand_minimal_graph(circle(1.0, P=16), 2, 2)
    gs = hemisphere(1.0, 2)
    for k in range(gs.order + 1):
        np.testing.assert_allclose(gc.coefficient(k), gs.coefficient(k), atol=1e-10)


def test_curve_u2_is_half_curvature(ellipse_graph):
    k = ellipse_graph.boundary.kappa[:, 0]
    # kappa is the curvature component along the outward normal
    np.testing.assert_allclose(ellipse_graph.u2, 0.5 * k, atol=1e-10)


def test_expansion_residual_small(ellipse_graph):
    assert ellipse_graph.residual < 1e-8


def test_order_too_small_rejected():
    with pytest.raises(ValueError):
        expand_minimal_graph(RoundSphere(1.0, 2), 2, 2, order=3)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_indicial_roundtrip(m):
    src = PhgSeries.from_terms({(k, False): 1.0 + k for k in range(m + 4)}, m + 3, m=m)
    src = src - PhgSeries.monomial(m, m + 3, coeff=src.coeff(m), m=m)
    back = apply_indicial(solve_indicial(src, m), m)
    assert np.max(np.abs(back.array - src.array)) < 1e-12
    assert indicial_polynomial(m, m) == 0 and indicial_polynomial(-1, m) == 0


def test_special_bdf_solves_eikonal(ellipse_graph):
    w = special_bdf(ellipse_graph)
    r = special_bdf_residual(ellipse_graph, w)
    assert np.max(np.abs(r.array[: w.order + 1])) < 1e-9


def test_expansion_serializes(disk):
    d = disk.to_dict()
    assert d["m"] == 2 and d["boundary"]["mode"] == "sphere"
    assert PhgSeries.from_dict(d["u"][0]).allclose(disk.u[0])
