import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rvkit.phg import (EVEN, NEGLIGIBLE, ODD, LogOverflowError, PhgSeries, SeriesError,
                       inverse_x_dx, parity, parity_consistent, periodic_derivative,
                       x_dx)

ORDER = 7
coef = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def series(vals, m=2, logs=None):
    terms = {(k, False): v for k, v in enumerate(vals)}
    for k, v in (logs or {}).items():
        terms[(k, True)] = v
    return PhgSeries.from_terms(terms, ORDER, m=m)


@st.composite
def smooth(draw, lead=None):
    vals = draw(st.lists(coef, min_size=ORDER + 1, max_size=ORDER + 1))
    if lead is not None:
        vals[0] = lead
    return series(vals)


@given(smooth(), smooth())
def test_multiplication_commutes(a, b):
    assert (a * b).allclose(b * a, 1e-10)


@given(smooth(), smooth(), smooth())
@settings(max_examples=30)
def test_multiplication_distributes(a, b, c):
    assert (a * (b + c)).allclose(a * b + a * c, 1e-9)


@given(smooth(lead=1.5))
def test_invert_is_reciprocal(a):
    one = a * a.invert()
    assert one.allclose(PhgSeries.constant(1.0, ORDER, m=2), 1e-8)


@given(smooth(lead=2.0))
def test_sqrt_squares_back(a):
    assert (a.sqrt() ** 2).allclose(a, 1e-8)


@given(smooth(lead=0.0))
def test_exp_of_sum(a):
    b = a * 0.5
    assert (b.exp() * b.exp()).allclose(a.exp(), 1e-8)


def test_log_terms_multiply_with_product_rule():
    a = series([1.0, 0, 0, 0], logs={2: 1.0})
    b = series([2.0, 1.0])
    p = a * b
    assert p.coeff(2, True) == pytest.approx(2.0)
    assert p.coeff(3, True) == pytest.approx(1.0)


def test_log_squared_is_rejected():
    a = series([0.0], logs={2: 1.0})
    with pytest.raises(LogOverflowError):
        a * a


def test_x_dx_on_monomials_and_logs():
    a = series([1.0, 2.0, 3.0], logs={3: 1.0})
    d = x_dx(a)
    assert d.coeff(1) == 2.0 and d.coeff(2) == 6.0
    # x d/dx (x^3 log x) = 3 x^3 log x + x^3
    assert d.coeff(3, True) == 3.0 and d.coeff(3) == 1.0


def test_inverse_x_dx_undoes_x_dx():
    a = series([0.0, 1.0, -2.0, 0.5], logs={3: 0.25})
    assert inverse_x_dx(x_dx(a)).allclose(a, 1e-14)


def test_shift_and_truncate():
    a = series([1.0, 2.0, 3.0])
    assert a.shift(2).coeff(2) == 1.0
    assert a.shift(2).unshift(2).allclose(a.truncate(ORDER - 2))
    assert a.truncate(1).order == 1


def test_parity_classification():
    even = series([1.0, 0, 2.0, 0, 3.0])
    odd = series([0, 1.0, 0, 2.0])
    assert parity(even) == EVEN and parity(odd) == ODD
    assert parity(PhgSeries.zeros(ORDER, m=2)) == NEGLIGIBLE
    assert parity_consistent(even, EVEN) and not parity_consistent(odd, EVEN)


def test_roundtrip_json():
    a = series([1.0, -0.5, 0.25], logs={3: 2.0})
    assert PhgSeries.from_json(a.to_json()).allclose(a, 0.0)


def test_grid_coefficients_and_evaluate():
    P = 16
    s = 2 * np.pi * np.arange(P) / P
    a = PhgSeries.from_terms({(0, False): np.cos(s), (2, False): 1.0}, 4, P=P)
    val = a.evaluate(0.1)
    np.testing.assert_allclose(val, np.cos(s) + 0.01)


def test_periodic_derivative_is_spectral():
    P = 32
    s = 2 * np.pi * np.arange(P) / P
    np.testing.assert_allclose(periodic_derivative(np.sin(3 * s)), 3 * np.cos(3 * s),
                               atol=1e-12)


def test_complex_step_derivative_has_clean_imaginary_part():
    P = 32
    s = 2 * np.pi * np.arange(P) / P
    h = 1e-30
    z = np.exp(np.sin(s)) + 1j * h * np.cos(s)
    d = periodic_derivative(z)
    np.testing.assert_allclose(d.imag / h, -np.sin(s), atol=1e-12)


def test_nonfinite_rejected():
    with pytest.raises(SeriesError):
        series([math.nan])
