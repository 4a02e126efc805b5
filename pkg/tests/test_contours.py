import time

import numpy as np
import pytest

from utm.characteristic import principal_exponential_sum
from utm.contours import (Arc, ContourParams, Line, Zero, ZeroSet, build_contours, classify_halfplane,
                          locate_zeros, select_params, truncate, winding_number)
from utm.errors import ValidationError
from utm.spectral_poly import MonicPolynomial, NuBranch

ALPHA3 = np.exp(2j * np.pi / 3)


@pytest.fixture(scope="module")
def third_zeros(third):
    return locate_zeros(principal_exponential_sum(third.ctx), (-20, 20, -20, 20))


def artificial(mods, window=100.0):
    return ZeroSet(tuple(Zero(complex(m), 1, 0.0) for m in mods), (-window, window, -window, window), len(mods))


def test_third_order_ray_zeros(third):
    start = time.perf_counter()
    zs = locate_zeros(principal_exponential_sum(third.ctx), (-20, 20, -20, 20))
    assert time.perf_counter() - start < 10
    vals = zs.values
    for j in range(3):
        for k in range(1, 6):
            target = -1j * ALPHA3**j * (np.pi / np.sqrt(3)) * (1 / 3 + 2 * k)
            assert np.min(np.abs(vals - target)) <= 0.1
    origin = [z for z in zs.zeros if abs(z.value) < 1e-3]
    assert len(origin) == 1 and origin[0].multiplicity == 3


def test_count_matches_argument_principle(third_zeros):
    assert sum(third_zeros.multiplicities) == third_zeros.count
    es_total = third_zeros.count
    assert es_total >= 18


def test_dirichlet_zeros_are_multiples_of_pi(heat):
    zs = locate_zeros(principal_exponential_sum(heat.ctx), (-20, 20, -1, 1))
    vals = np.sort(zs.values.real)
    k = np.arange(-6, 7)
    np.testing.assert_allclose(vals, k * np.pi, atol=1e-9)
    assert np.all(np.abs(zs.values.imag) < 1e-9)


def test_empty_window(third):
    zs = locate_zeros(principal_exponential_sum(third.ctx), (0.1, 0.2, 0.1, 0.2))
    assert zs.count == 0 and zs.zeros == ()
    with pytest.raises(ValidationError):
        locate_zeros(principal_exponential_sum(third.ctx), (1, 0, 0, 1))


def test_winding_number_of_single_zero(heat):
    es = principal_exponential_sum(heat.ctx)
    assert winding_number(es, (2.5, 3.5, -0.5, 0.5)) == 1
    assert winding_number(es, (0.5, 2.5, -0.5, 0.5)) == 0


def test_third_order_parameters(third, third_zeros):
    p = select_params(third_zeros, third.ctx.branches)
    assert p.epsilon <= 0.2
    assert 0.8 <= p.R <= 1.0
    assert 5 * p.epsilon < np.min(np.abs(np.subtract.outer(third_zeros.values, third_zeros.values))
                                  + np.eye(len(third_zeros.values)) * 1e9)
    assert np.min(np.abs(np.abs(third_zeros.values) - p.R)) > 3 * p.epsilon


def test_epsilon_cap_and_scaling():
    wide = NuBranch(MonicPolynomial.monomial(2), 10.0)
    p = select_params(artificial([30.0, 40.0, 50.0]), (wide,))
    assert p.epsilon == 0.5
    assert p.R == pytest.approx(11.0)
    doubled = select_params(artificial([60.0, 80.0, 100.0], 200.0), (NuBranch(MonicPolynomial.monomial(2), 20.0),))
    assert doubled.epsilon == 0.5
    assert doubled.R == pytest.approx(2 * p.R)


def test_radius_is_pushed_past_close_zeros():
    b = NuBranch(MonicPolynomial.monomial(2), 10.0)
    p = select_params(artificial([11.2, 30.0]), (b,))
    assert abs(p.R - 11.2) > 3 * p.epsilon
    with pytest.raises(ValidationError):
        select_params(artificial([11.2, 30.0]), (b,), schedule=(5.0, 20.0))


def test_classify_halfplane(third):
    ctx = third.ctx
    assert classify_halfplane(ctx, 0, 2j) == "plus"
    assert classify_halfplane(ctx, 0, -2j) == "minus"
    assert classify_halfplane(ctx, 0, 3.0) == "boundary"
    from utm.adjoint import IntervalOperatorSpec
    from utm.characteristic import make_context
    mono = make_context(IntervalOperatorSpec((MonicPolynomial.monomial(3),), (1j,)), ctx.pkg)
    lam = np.array([1 + 2j, 3 - 1j, -4 + 0.5j])
    assert list(classify_halfplane(mono, 0, lam)) == ["plus", "minus", "plus"]


def _pieces(cs, fam):
    return [p for p in cs.pieces if p.family == fam]


def test_third_order_contour_geometry(third, third_zeros):
    ctx = third.ctx
    params = select_params(third_zeros, ctx.branches)
    cs = build_contours(params, third_zeros, ctx, 0, hat=False, cancel=True)
    cuts = _pieces(cs, "Gcuts")
    assert len(cuts) == 1 and cuts[0].closed and cuts[0].radius == params.R
    assert not _pieces(cs, "G0+") and not _pieces(cs, "G0-")
    ray_angles = {"Ga+": set(), "Ga-": set()}
    for fam in ray_angles:
        for p in _pieces(cs, fam):
            if isinstance(p, Line):
                ray_angles[fam].add(round(float(np.angle(p.direction)) / (np.pi / 3)))
    # after the cancellation of shared rays, the plus side keeps args 0 and 2 pi/3, minus -pi/3 and -2 pi/3
    assert ray_angles["Ga+"] >= {0, 2} and ray_angles["Ga-"] == {-1, -2}


def test_contour_points_satisfy_their_definitions(third, third_zeros):
    ctx = third.ctx
    params = select_params(third_zeros, ctx.branches)
    cs = truncate(build_contours(params, third_zeros, ctx, 0, hat=True, cancel=False), 30.0)
    a = ctx.rate(0)
    vals = third_zeros.values
    for p in cs.pieces:
        if isinstance(p, Arc):
            pts = p.point(np.linspace(0, 1, 33))
        elif isinstance(p, Line):
            pts = p.point(np.linspace(0, p.length, 33))
        else:
            pts = p.point(np.linspace(p.s0, p.s1, 33))
        if p.family.startswith("G0"):
            d = np.abs(pts - p.center)
            assert np.allclose(d, params.epsilon, atol=1e-9)
            side = classify_halfplane(ctx, 0, p.center)
            assert (side != "minus") == (p.family == "G0+")
            continue
        level = np.abs((a * pts**3).real) <= 1e-9 * np.abs(pts) ** 3
        on_r = np.abs(np.abs(pts) - params.R) <= 1e-9
        on_hole = np.min(np.abs(np.abs(pts[:, None] - vals[None, :]) - 2 * params.epsilon), axis=1) <= 1e-9
        real_nu = np.zeros(pts.shape, bool)
        far = np.abs(pts) > ctx.branches[0].domain_radius * 1.001
        real_nu[far] = np.abs(ctx.nu(0, pts[far]).imag) <= 1e-9 * np.abs(pts[far])
        assert np.all(level | on_r | on_hole | real_nu), p.family


def test_truncation_geometry(third, third_zeros):
    params = ContourParams(0.1, 1.0, (2.0,), 0.8)
    from utm.contours import ContourSet
    ray = Line("Ga+", 0, 1.0 + 0j, 1.0 + 0j, np.inf)
    circle = Arc("Gcuts", 0, 0j, 1.0, 0.0, 2 * np.pi)
    cs = ContourSet((ray, circle), params, 0)
    out = truncate(cs, 50.0)
    assert out.pieces[0].length == pytest.approx(49.0)
    assert out.pieces[1] == circle
    big = truncate(cs, 1e12)
    assert big.pieces[1] == circle
    with pytest.raises(ValidationError):
        truncate(cs, 0.5)
    real = build_contours(select_params(third_zeros, third.ctx.branches), third_zeros, third.ctx, 0)
    lengths = []
    for rho in (2.0, 5.0, 10.0, 20.0, 40.0):
        total = 0.0
        for p in truncate(real, rho).pieces:
            if isinstance(p, (Arc, Line)):
                total += p.length
            else:
                s = np.linspace(p.s0, p.s1, 400)
                total += float(np.sum(np.abs(np.diff(p.point(s)))))
        lengths.append(total)
    assert np.all(np.diff(lengths) >= -1e-9)
