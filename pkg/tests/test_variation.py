import numpy as np
import pytest

from conftest import catenoid_volume, d_family, hemisphere
from rvkit.boundary import RoundSphere
from rvkit.expansion import expand_minimal_graph
from rvkit.variation import (VariationError, first_variation, jacobi_expansion,
                             killing_check, killing_field, second_variation,
                             variation_report)


@pytest.fixture(scope="module")
def random_jacobi(ellipse_graph):
    P = ellipse_graph.boundary.P
    s = 2 * np.pi * np.arange(P) / P
    return jacobi_expansion(ellipse_graph, 1.0 + 0.3 * np.cos(s), 0.2 * np.sin(2 * s))


def test_zero_data_gives_zero_field(ellipse_graph):
    J = jacobi_expansion(ellipse_graph, 0.0, 0.0)
    assert J.phidot.max_abs() == 0.0
    sv = second_variation(ellipse_graph, J.phidot)
    assert sv["theorem"] == 0.0 and sv["closed_form"] == 0.0


def test_jacobi_respects_data(random_jacobi, ellipse_graph):
    J = random_jacobi
    P = ellipse_graph.boundary.P
    s = 2 * np.pi * np.arange(P) / P
    np.testing.assert_allclose(J.phidot.coeff(0), 1.0 + 0.3 * np.cos(s), atol=1e-12)
    np.testing.assert_allclose(J.phidot.coeff(3), 0.2 * np.sin(2 * s), atol=1e-10)
    assert J.residual < 1e-8


def test_dilation_jacobi_matches_difference_of_expansions():
    R, h = 1.0, 1e-4
    g = hemisphere(R)
    up, dn = hemisphere(R + h), hemisphere(R - h)
    # radial graph displacement of the hemisphere family at fixed height x
    du = (up.u[0] - dn.u[0]) * (1 / (2 * h)) + 1.0
    phidot_fd = g.c_z * du.truncate(g.c_z.order)
    phidot, _ = killing_field(g, "dilation")
    J = jacobi_expansion(g, R, phidot.coeff(3))
    for k in range(g.c_z.order):
        assert phidot_fd.coeff(k) == pytest.approx(phidot.coeff(k), abs=1e-6)
        assert J.phidot.coeff(k) == pytest.approx(phidot.coeff(k), abs=1e-10)


def test_pure_acceleration_gives_neumann_pairing(ellipse_graph):
    g = ellipse_graph
    P = g.boundary.P
    s = 2 * np.pi * np.arange(P) / P
    acc = np.cos(s) + 0.5
    sv = second_variation(g, 0.0, acc)
    expected = g.boundary.integrate(-3 * acc * g.u_neumann)
    assert sv["theorem"] == pytest.approx(expected, abs=1e-9)
    assert sv["closed_form"] == pytest.approx(expected, abs=1e-9)
    assert sv["family_form"] == pytest.approx(expected, abs=1e-9)


def test_first_variation_closed_form(ellipse_graph, random_jacobi):
    fv = first_variation(ellipse_graph, random_jacobi.phidot)
    assert fv["difference"] < 1e-9


def test_second_variation_polarization(ellipse_graph):
    g = ellipse_graph
    P = g.boundary.P
    s = 2 * np.pi * np.arange(P) / P
    a = jacobi_expansion(g, np.cos(s), 0.1).phidot
    b = jacobi_expansion(g, 1.0, np.sin(s)).phidot
    Q = {k: second_variation(g, v)["theorem"]
         for k, v in {"a": a, "b": b, "a+b": a + b, "a-b": a - b}.items()}
    assert Q["a+b"] + Q["a-b"] == pytest.approx(2 * Q["a"] + 2 * Q["b"], rel=1e-9)


def test_vanishing_terms_even_dimension(ellipse_graph, random_jacobi):
    terms = second_variation(ellipse_graph, random_jacobi.phidot)["terms"]
    assert abs(terms["I1"]) < 1e-10 and abs(terms["I5"]) < 1e-10


def test_theorem_matches_closed_form(ellipse_graph, random_jacobi):
    P = ellipse_graph.boundary.P
    acc = np.linspace(-1, 1, P)
    sv = second_variation(ellipse_graph, random_jacobi.phidot, acc)
    assert sv["theorem"] == pytest.approx(sv["closed_form"], rel=1e-8)


def test_killing_fields_hemisphere():
    g = hemisphere(1.0)
    kc = killing_check(g)
    assert abs(kc["dilation"]["first"]["general"]) < 1e-10
    assert abs(kc["dilation"]["second"]["family_form"]) < 1e-10
    assert abs(kc["translation-sum"]["second"]["family_form"]) < 1e-10


def test_family_form_matches_finite_differences(catenoid):
    d, h = 0.5, 1e-3
    V = {t: catenoid_volume(*d_family(d + t)) for t in (-h, h)}
    V0, gs = catenoid
    fd2 = (V[h][0] - 2 * V0 + V[-h][0]) / h ** 2
    R = {t: d_family(d + t) for t in (-h, 0.0, h)}
    phis, accs = [], []
    for i, g in enumerate(gs):
        p0 = (R[h][i] - R[-h][i]) / (2 * h)
        du3 = (V[h][1][i].coefficient(3) - V[-h][1][i].coefficient(3)) / (2 * h)
        p3 = du3 - 6 * g.u2 * g.coefficient(3) * p0
        phis.append(jacobi_expansion(g, p0, p3).phidot)
        accs.append((R[h][i] - 2 * R[0.0][i] + R[-h][i]) / h ** 2)
    sv = second_variation(gs, phis, accs)
    assert sv["family_form"] == pytest.approx(fd2, rel=1e-4)


def test_codimension_two_rejected():
    g = expand_minimal_graph(RoundSphere(1.0, 3, 1), 2, 3)
    with pytest.raises(VariationError):
        first_variation(g, 1.0)


def test_report_is_deterministic(ellipse_graph, random_jacobi):
    a = variation_report(ellipse_graph, random_jacobi.phidot).to_dict()
    b = variation_report(ellipse_graph, random_jacobi.phidot).to_dict()
    assert a == b
