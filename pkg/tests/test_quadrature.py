import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from utm.atoms import FunctionAtom
from utm.contours import Arc, ContourParams, ContourSet, Line, truncate
from utm.errors import NonConvergentPV, ValidationError
from utm.quadrature import (contour_nodes, contour_quad, convolution_parts, joint_principal_value, pv_trace,
                            time_convolution)


def real_line(R=1.0):
    pieces = (Line("G0+", 0, 0j, -1.0, np.inf, reverse=True), Line("G0+", 0, 0j, 1.0, np.inf))
    return ContourSet(pieces, ContourParams(0.1, R, (64.0,)), 0)


def test_circle_integrals():
    circle = Arc("G0+", 0, 0.3 + 0.1j, 2.0, 0.0, 2 * np.pi)
    assert abs(contour_quad(lambda z: 1 / z, circle).value - 2j * np.pi) <= 1e-12
    assert abs(contour_quad(lambda z: np.exp(z) * z**3, circle).value) <= 1e-12
    assert abs(contour_quad(lambda z: 1 / (z - 5), circle).value) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.0]) | st.floats(1e-3, 20) | st.floats(-20, -1e-3), st.floats(0.1, 5), st.floats(-np.pi, np.pi))
def test_segment_antiderivative(x, length, angle):
    d = np.exp(1j * angle)
    seg = Line("G0+", 0, 0.5 + 0.2j, d, length)
    end = 0.5 + 0.2j + length * d
    exact = (np.exp(1j * end * x) - np.exp(1j * (0.5 + 0.2j) * x)) / (1j * x) if x != 0 else end - (0.5 + 0.2j)
    got = contour_quad(lambda z: np.exp(1j * z * x), seg).value
    assert abs(got - exact) <= 1e-10 * max(1.0, abs(exact))


def test_reverse_line_changes_sign():
    f = lambda z: z**2
    fwd = contour_quad(f, Line("G0+", 0, 1j, 1.0, 2.0)).value
    back = contour_quad(f, Line("G0+", 0, 1j, 1.0, 2.0, reverse=True)).value
    assert abs(fwd + back) <= 1e-13


def test_gaussian_principal_value():
    rep = joint_principal_value(lambda z: np.exp(-z**2), real_line(), (2.0, 4.0, 8.0))
    assert abs(rep.value - np.sqrt(np.pi)) <= 1e-12
    # the odd part only converges in the symmetric (joint) sense
    rep = joint_principal_value(lambda z: z / (1 + z**2), real_line(), (2.0, 4.0, 8.0, 16.0))
    assert abs(rep.value) <= 1e-12


def test_joint_pv_linear_and_zero():
    cs = real_line()
    sched = (2.0, 4.0, 8.0, 16.0)
    f = lambda z: np.exp(-z**2) * np.cos(3 * z)
    g = lambda z: 1 / (1 + z**2)
    zero = joint_principal_value(lambda z: np.zeros(z.shape), cs, sched)
    assert zero.value == 0
    a = joint_principal_value(lambda z: f(z) + 2 * g(z), cs, sched, strict=False).value
    b = joint_principal_value(f, cs, sched, strict=False).value + 2 * joint_principal_value(g, cs, sched, strict=False).value
    assert abs(a - b) <= 1e-13
    assert abs(b - (np.sqrt(np.pi) * np.exp(-9 / 4) + 4 * np.arctan(16.0))) <= 1e-12


def test_families_select_integrands():
    cs = real_line()
    rep = joint_principal_value({"Ga+": lambda z: np.ones(z.shape)}, cs, (2.0, 4.0))
    assert rep.value == 0


def test_divergent_pv_is_reported():
    right = ContourSet((Line("G0+", 0, 0j, 1.0, np.inf),), ContourParams(0.1, 1.0, (64.0,)), 0)
    with pytest.raises(NonConvergentPV):
        joint_principal_value(lambda z: np.ones(z.shape), right, (2.0, 4.0, 8.0))
    with pytest.raises(ValidationError):
        joint_principal_value(lambda z: np.ones(z.shape), right, (4.0, 2.0))
    with pytest.raises(ValidationError):
        joint_principal_value(lambda z: np.ones(z.shape), right, (0.5, 2.0))


def test_pv_trace_is_cumulative():
    cs = real_line()
    nodes = contour_nodes(truncate(cs, 3.0).pieces, radii=(1.0, 2.0, 3.0))
    tr = pv_trace(lambda z: np.ones(z.shape), nodes, (1.0, 2.0, 3.0))
    np.testing.assert_allclose(tr, [2.0, 4.0, 6.0], atol=1e-12)


def test_time_convolution_constant():
    B = np.array([0.0 + 0j, 1.0, -2.0 + 3j, 40j])
    t = 0.7
    got = time_convolution(FunctionAtom.polynomial([1.0]), B, t)
    with np.errstate(divide="ignore", invalid="ignore"):
        want = np.where(B == 0, t, (1 - np.exp(-B * t)) / B)
    np.testing.assert_allclose(got, want, rtol=1e-13)
    assert np.all(time_convolution(FunctionAtom.polynomial([1.0]), B, 0.0) == 0)
    with pytest.raises(ValidationError):
        time_convolution(FunctionAtom.polynomial([1.0]), B, -1.0)


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=30), st.floats(0.01, 2.0))
def test_time_convolution_cubic(B, t):
    g = FunctionAtom.polynomial([0.5, -1, 2, 1j]) + FunctionAtom.exponential(-0.3 + 2j, (1.0,))
    gs = lambda s: g(np.array([s]))[0]
    f = lambda s: np.exp(B * (s - t)) * gs(s)
    re = quad(lambda s: f(s).real, 0, t, epsabs=1e-13, limit=200)[0]
    im = quad(lambda s: f(s).imag, 0, t, epsabs=1e-13, limit=200)[0]
    got = time_convolution(g, np.array([B]), t)[0]
    assert abs(got - (re + 1j * im)) <= 1e-9 * max(1.0, abs(re + 1j * im))


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(min_magnitude=0.5, max_magnitude=30), st.floats(0.01, 2.0))
def test_convolution_parts_sum(B, t):
    g = FunctionAtom.polynomial([0.5, -1, 2, 1j]) + FunctionAtom.exponential(-0.3 + 2j, (1.0, 0.5))
    if min(abs(B - p) for p in (0.0, 0.3 - 2j)) < 0.5:
        return
    steady, transient = convolution_parts(g, np.array([B]), t)
    full = time_convolution(g, np.array([B]), t)
    assert abs(steady[0] + transient[0] - full[0]) <= 1e-9 * max(1.0, abs(steady[0]), abs(transient[0]))
