import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utm.adjoint import traces
from utm.atoms import FunctionAtom, Term
from utm.characteristic import char_matrices
from utm.contours import truncate
from utm.errors import NearZeroDelta, NotInDomain, UntaggedLambda
from utm.quadrature import contour_nodes
from utm.spectral_poly import MonicPolynomial, branch_eval, make_branch
from utm.transforms import (apply_operator, diag_identity_residual, formal_forward, formal_inverse, forward,
                            forward_both, forward_pm, inhomogeneous_boundary_term, kernel_coefficients, kernel_psi,
                            remainder_polynomial, remainder_transform)

ALPHA3 = np.exp(2j * np.pi / 3)
GL_X, GL_W = np.polynomial.legendre.leggauss(80)
GL_X, GL_W = 0.5 * (GL_X + 1), 0.5 * GL_W


def contour_lambdas(prob, count, r=0, rho=50.0):
    cs = truncate(prob.contours(r, False, False), rho)
    ns = contour_nodes(tuple(p for p in cs.pieces if p.family in ("G0+", "Ga+", "G0-", "Ga-", "Gcuts")))
    return ns.lam[np.linspace(0, len(ns) - 1, count).astype(int)]


def rel(a, b):
    return np.max(np.abs(a - b)) / max(1e-300, np.max(np.abs(b)))


def test_formal_forward_examples():
    b = make_branch(MonicPolynomial.monomial(2))
    lam = np.array([1.5 + 0.3j, -2.0 + 1j])
    one = FunctionAtom.polynomial([1.0])
    np.testing.assert_allclose(formal_forward(one, b, lam), (1 - np.exp(-1j * lam)) / (1j * lam), rtol=1e-14)
    assert formal_forward(FunctionAtom.zero(), b, 3.0) == 0
    third = make_branch(MonicPolynomial(3, (0, 1)))
    phi = FunctionAtom.polynomial([0, 1, -2, 1])
    x = (np.arange(10000) + 0.5) / 10000  # midpoint rule, error O(h^2 |f''|)
    nu = complex(branch_eval(third, 3.0))
    f = x * (1 - x) ** 2 * np.exp(-1j * nu * x)
    brute = np.sum(f) / x.size
    # Richardson step with the 5000-point rule removes the h^2 term
    x2 = (np.arange(5000) + 0.5) / 5000
    brute2 = np.sum(x2 * (1 - x2) ** 2 * np.exp(-1j * nu * x2)) / x2.size
    brute = (4 * brute - brute2) / 3
    assert abs(formal_forward(phi, third, 3.0) - brute) <= 1e-10


def test_formal_round_trip():
    b = make_branch(MonicPolynomial.monomial(2))
    phi = FunctionAtom.polynomial([0, 1, -1])
    rep = formal_inverse(lambda lam: formal_forward(phi, b, lam), b, 0.5, (12.5, 25, 50, 100, 200), strict=False)
    assert abs(rep.value[0] - 0.25) <= 1e-3
    errs = [abs(v[0] - 0.25) for _, v in rep.trace]
    assert errs[-1] < errs[0]
    zero = formal_inverse(lambda lam: np.zeros(np.shape(lam)), b, 0.5, (12.5, 25))
    assert zero.value[0] == 0


def third_closed_forms(ctx, phi, lam):
    nu = lambda z: ctx.nu(0, z)
    nup = ctx.nu_prime(0, lam)
    f = lambda z: phi.transform(nu(z), 0)
    e = lambda z: np.exp(-1j * nu(z))
    delta = -1j * sum(e(ALPHA3**j * lam) * (nu(ALPHA3 ** (j + 1) * lam) - nu(ALPHA3 ** (j + 2) * lam)) for j in range(3))
    plus = sum(((nu(ALPHA3 ** (j + 1) * lam) * e(ALPHA3**j * lam) - nu(ALPHA3**j * lam) * e(ALPHA3 ** (j + 1) * lam))
                + (e(ALPHA3 ** (j + 1) * lam) - e(ALPHA3**j * lam)) * nu(lam)) * f(ALPHA3 ** (j - 1) * lam)
               for j in range(1, 4))
    minus = e(lam) * sum((nu(ALPHA3**j * lam) - nu(ALPHA3 ** (j + 1) * lam)) * f(ALPHA3 ** (j - 1) * lam)
                         for j in range(1, 4))
    return -1j * nup / (2 * np.pi * delta) * plus, 1j * nup / (2 * np.pi * delta) * minus


def test_third_order_closed_forms(third):
    lam = 2 + 1j
    for phi in (third.Q, FunctionAtom.polynomial([1, -3, 0.5j, 2]), FunctionAtom.exponential(0.7j, (1, 1))):
        Fp, Fm = forward_both(third.ctx, phi, lam)
        cp, cm = third_closed_forms(third.ctx, phi, lam)
        assert abs(Fp - cp) <= 1e-9 * abs(cp)
        assert abs(Fm - cm) <= 1e-9 * abs(cm)
    assert forward_pm(third.ctx, FunctionAtom.zero(), lam, 1) == 0


def test_cancellation_on_contours(third_prob, heat_prob):
    for prob in (third_prob, heat_prob):
        ctx = prob.ctx
        lam = contour_lambdas(prob, 100)
        Fp, Fm = forward_both(ctx, prob.Q, lam)
        formal = ctx.nu_prime(0, lam) / (2 * np.pi) * prob.Q.transform(ctx.nu(0, lam), 0)
        assert rel(Fp - Fm, formal) <= 1e-10


def test_dispatch(third):
    lam = np.array([3 + 1j, -2 - 3j])
    np.testing.assert_array_equal(forward(third.ctx, third.Q, lam, "G0-")[:, 0], forward_pm(third.ctx, third.Q, lam, -1))
    np.testing.assert_array_equal(forward(third.ctx, third.Q, lam, "Gcuts")[:, 0], forward_pm(third.ctx, third.Q, lam, 1))
    assert forward(third.ctx, third.Q, lam, "Ga+").shape == (2, 1)
    with pytest.raises(UntaggedLambda):
        forward(third.ctx, third.Q, lam, "elsewhere")


def test_near_zero_delta_is_an_error(heat):
    with pytest.raises(NearZeroDelta):
        forward_pm(heat.ctx, heat.Q, 2 * np.pi, 1)


def test_kernel_traces_third_order(third):
    ctx = third.ctx
    lam = 2.5 - 0.5j
    K, mu, s = kernel_coefficients(ctx, lam, 1)
    conj_psi = lambda x: np.sum(K * s * np.exp(-1j * mu * x))
    conj_dpsi0 = np.sum(K * s * (-1j * mu))
    nu, nup = ctx.nu(0, lam), ctx.nu_prime(0, lam)
    assert abs(conj_psi(1.0)) <= 1e-12
    assert abs(conj_psi(0.0) - nup / (2 * np.pi)) <= 1e-12
    assert abs(conj_dpsi0 - (-1j * nu * nup / (2 * np.pi))) <= 1e-12
    np.testing.assert_allclose(kernel_psi(ctx, [0.0, 1.0], lam, 1)[:, 0].conj(), [conj_psi(0.0), conj_psi(1.0)],
                               atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from([1, -1]))
def test_kernel_duality(seed, sign):
    ctx = _multipoint_ctx()
    rng = np.random.default_rng(seed)
    phi = FunctionAtom.polynomial(*(rng.normal(size=5) + 1j * rng.normal(size=5) for _ in range(2)))
    lam = 3 * np.exp(2j * np.pi * rng.random()) * (1 + rng.random())
    for r in range(2):
        psi = kernel_psi(ctx, GL_X, lam, sign, r)
        inner = sum(np.sum(GL_W * phi(GL_X, u) * np.conj(psi[:, u])) for u in range(2))
        want = forward_pm(ctx, phi, lam, sign, r)
        assert abs(inner - want) <= 1e-9 * max(1.0, abs(want))


_CTX = {}


def _multipoint_ctx():
    if "mp" not in _CTX:
        from utm.problems import multipoint_diffusion
        _CTX["mp"] = multipoint_diffusion().ctx
    return _CTX["mp"]


def test_adjoint_trace_identity(third, multipoint, rng):
    for ctx in (third.ctx, multipoint.ctx):
        Z = np.hstack([np.hstack([zl, zr]) for zl, zr in zip(ctx.adj_left, ctx.adj_right)])
        for lam in 3 * np.exp(2j * np.pi * rng.random(50)):
            _, Mp, Mm = char_matrices(ctx, lam)
            for sign, Mpm in ((1, Mp), (-1, Mm)):
                for r in range(ctx.m):
                    K, mu, s = kernel_coefficients(ctx, lam, sign, r)
                    pieces = [[] for _ in range(ctx.m)]
                    for j in range(ctx.N):
                        pieces[ctx.row_interval(j)].append(Term((np.conj(K[j] * s[j]),), 1j * np.conj(mu[j])))
                    psi = FunctionAtom(tuple(tuple(p) for p in pieces))
                    lhs = np.conj(Z @ traces(psi, ctx.op.orders))
                    want = sign * ctx.nu_prime(r, lam) / (2 * np.pi) * Mpm[ctx.first_row(r)]
                    assert np.max(np.abs(lhs - want)) <= 1e-10 * max(1.0, np.max(np.abs(want)))


def test_third_order_remainder_closed_forms(third, rng):
    ctx = third.ctx
    phi = FunctionAtom.polynomial(rng.normal(size=6) + 1j * rng.normal(size=6))
    d1, d2 = phi.derivative(1), phi.derivative(2)
    for lam in 4 * np.exp(2j * np.pi * rng.random(10)):
        nu, nup = ctx.nu(0, lam), ctx.nu_prime(0, lam)
        Pp = remainder_polynomial(ctx, phi, lam, 1)
        Pm = remainder_polynomial(ctx, phi, lam, -1)
        assert abs(Pp - nup / (2 * np.pi) * (-1j * d2(0.0) - 1j * nu * 1j * d1(0.0))) <= 1e-12 * max(1, abs(Pp))
        # the sign is the one that makes the diagonalization identity hold
        assert abs(Pm - nup / (2 * np.pi) * (-1j * d2(1.0))) <= 1e-12 * max(1, abs(Pm))
        assert abs(remainder_transform(ctx, phi, lam, "G0-") - np.exp(-1j * nu) * Pm) <= 1e-12 * max(1, abs(Pm))


def test_remainder_vanishes_without_endpoint_data(third):
    phi = FunctionAtom.polynomial([0, 0, 0, 1, -3, 3, -1])  # x^3 (1 - x)^3
    lam = np.array([3 + 1j, -5j])
    assert np.max(np.abs(remainder_polynomial(third.ctx, phi, lam, 1))) <= 1e-13
    assert np.max(np.abs(remainder_polynomial(third.ctx, phi, lam, -1))) <= 1e-13


def test_remainder_growth(third, multipoint):
    mods = np.logspace(1, 3, 9)
    for ctx, phi, n in ((third.ctx, FunctionAtom.polynomial([1, 2, 3, 4]), 3),
                        (multipoint.ctx, FunctionAtom.polynomial([1, 2, 3], [3, -1, 1]), 2)):
        for sign in (1, -1):
            for arg in (0.3, 2.0, -1.0):
                lam = mods * np.exp(1j * arg)
                P = np.abs(remainder_polynomial(ctx, phi, lam, sign))
                slope = np.polyfit(np.log(mods), np.log(P + 1e-300), 1)[0]
                assert slope <= n - 1 + 0.1


def test_diagonalization_identity(third_prob, heat_prob):
    for prob in (third_prob, heat_prob):
        lam = contour_lambdas(prob, 50)
        for tag in ("G0+", "G0-"):
            res = diag_identity_residual(prob.ctx, prob.Q, lam, tag)
            scale = np.maximum(1.0, np.abs(lam**prob.ctx.n * forward_pm(prob.ctx, prob.Q, lam, tag)))
            assert np.max(np.abs(res) / scale) <= 1e-8
        zero = diag_identity_residual(prob.ctx, FunctionAtom.zero(), lam, "G0+")
        assert np.all(zero == 0)


def test_diagonalization_requires_domain(third):
    with pytest.raises(NotInDomain):
        diag_identity_residual(third.ctx, FunctionAtom.polynomial([1.0]), 3.0, "G0+")


def test_inhomogeneous_boundary_term(third, rng):
    ctx = third.ctx
    lam = 3 * np.exp(2j * np.pi * rng.random(20))
    assert np.all(inhomogeneous_boundary_term(ctx, np.zeros(3), lam, "G0+") == 0)
    h1, h2 = rng.normal(size=3) + 1j * rng.normal(size=3), rng.normal(size=3)
    for tag in ("G0+", "G0-"):
        a = inhomogeneous_boundary_term(ctx, h1 + h2, lam, tag)
        b = inhomogeneous_boundary_term(ctx, h1, lam, tag) + inhomogeneous_boundary_term(ctx, h2, lam, tag)
        assert np.max(np.abs(a - b)) <= 1e-12 * np.max(np.abs(a))
    phi = FunctionAtom.polynomial(rng.normal(size=7) + 1j * rng.normal(size=7))
    h = ctx.pkg.boundary.apply(phi)
    for tag in ("G0+", "G0-"):
        res = diag_identity_residual(ctx, phi, lam, tag, h=h)
        scale = np.maximum(1.0, np.abs(lam**3 * forward_pm(ctx, phi, lam, tag)))
        assert np.max(np.abs(res) / scale) <= 1e-8


def test_apply_operator(third):
    phi = FunctionAtom.polynomial([0, 0, 0, 1])  # x^3; L = (-i d)^3 + (-i d) = i d^3 - i d
    Lphi = apply_operator(third.ctx, phi)
    x = np.linspace(0, 1, 5)
    np.testing.assert_allclose(Lphi(x), 1j * 6 - 1j * 3 * x**2, atol=1e-14)
