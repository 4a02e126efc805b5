import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from utm.adjoint import BoundaryFormSet, IntervalOperatorSpec, adjoint_for, traces
from utm.atoms import FunctionAtom
from utm.characteristic import (char_determinant, char_matrices, cofactor_minors, cyclic_cofactors, exponents,
                                kernel_exponent, make_context, principal_determinant, principal_exponential_sum,
                                scaled_char_matrices)
from utm.errors import ValidationError
from utm.spectral_poly import MonicPolynomial

ALPHA3 = np.exp(2j * np.pi / 3)


def random_context(rng, m=2, n=2):
    omegas = tuple(MonicPolynomial(n, tuple(rng.normal(size=n - 1))) for _ in range(m))
    op = IntervalOperatorSpec(omegas, (1.0,) * m if n % 2 == 0 else (1j,) * m)
    N = n * m
    B = BoundaryFormSet.from_matrix(rng.normal(size=(N, 2 * N)) + 1j * rng.normal(size=(N, 2 * N)), op.orders)
    return make_context(op, adjoint_for(op, B))


def third_delta_closed_form(ctx, lam):
    nu = lambda z: ctx.nu(0, z)
    return -1j * sum(np.exp(-1j * nu(ALPHA3**j * lam)) * (nu(ALPHA3 ** (j + 1) * lam) - nu(ALPHA3 ** (j + 2) * lam))
                     for j in range(3))


def test_roots_of_unity_and_rows(third, multipoint):
    for ctx in (third.ctx, multipoint.ctx):
        n = ctx.n
        assert abs(ctx.alpha**n - 1) <= 1e-14
        assert all(abs(ctx.alpha**k - 1) > 1e-3 for k in range(1, n))
        assert [ctx.row_interval(j) for j in range(ctx.N)] == [j // n for j in range(ctx.N)]
        with pytest.raises(ValidationError):
            ctx.row_interval(ctx.N)


def test_kernel_exponents(third):
    ctx = third.ctx
    lam = 3 - 1j
    assert kernel_exponent(ctx, 0, lam) == ctx.nu(0, lam)
    mu = kernel_exponent(ctx, 1, lam)
    w = ctx.op.omegas[0]
    assert abs(w(mu) - (ALPHA3 * lam) ** 3) <= 1e-12 * abs(lam) ** 3
    mono = make_context(IntervalOperatorSpec((MonicPolynomial.monomial(3),), (1j,)), third.ctx.pkg)
    np.testing.assert_allclose(exponents(mono, lam), lam * ALPHA3 ** np.arange(3), rtol=1e-15)


def test_third_order_matrices(third):
    ctx = third.ctx
    lam = 2 + 1j
    M, Mp, Mm = char_matrices(ctx, lam)
    for j in range(3):
        nu = ctx.nu(0, ALPHA3**j * lam)
        np.testing.assert_allclose(Mp[j], [1, 0, -1j * nu], atol=1e-14)
        np.testing.assert_allclose(Mm[j], [0, np.exp(-1j * nu), 0], atol=1e-14)
    np.testing.assert_array_equal(M, Mp + Mm)


def test_matrix_entries_apply_adjoint_forms(rng):
    ctx = random_context(rng)
    lam = 2.5 + 0.7j
    M, _, _ = char_matrices(ctx, lam)
    Z = np.hstack([np.hstack([zl, zr]) for zl, zr in zip(ctx.adj_left, ctx.adj_right)])
    mu = exponents(ctx, lam)
    for j in range(ctx.N):
        pieces = [()] * ctx.m
        pieces[ctx.row_interval(j)] = FunctionAtom.exponential(1j * np.conj(mu[j])).pieces[0]
        y = FunctionAtom(tuple(pieces))
        np.testing.assert_allclose(M[j], np.conj(Z @ traces(y, ctx.op.orders)), rtol=1e-12)


def test_third_order_delta_closed_form(third, rng):
    ctx = third.ctx
    for lam in [2 + 1j, 2.0] + list(4 * np.exp(2j * np.pi * rng.random(10))):
        want = third_delta_closed_form(ctx, lam)
        assert abs(char_determinant(ctx, lam) - want) <= 1e-10 * abs(want)


def test_delta_lu_against_cofactor_expansion(third, multipoint, rng):
    for ctx in (third.ctx, multipoint.ctx):
        for lam in 5 * np.exp(2j * np.pi * rng.random(10)):
            M, _, _ = char_matrices(ctx, lam)
            by_cofactors = np.sum(M[0] * cyclic_cofactors(M)[0])
            lu = np.linalg.det(M)
            assert abs(by_cofactors - lu) <= 1e-11 * max(abs(lu), 1e-300)


def test_two_by_two_minors():
    M = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_allclose(cofactor_minors(M), [[4.0, 3.0], [2.0, 1.0]], rtol=1e-14)


def test_cyclic_identity(third, multipoint, rng):
    for ctx in (third.ctx, multipoint.ctx):
        for lam in 4 * np.exp(2j * np.pi * rng.random(50)):
            M, _, _ = char_matrices(ctx, lam)
            C = cyclic_cofactors(M)
            delta = np.linalg.det(M)
            for r in range(ctx.m):
                row = ctx.first_row(r)
                lhs = C @ M[row]
                want = np.zeros(ctx.N, complex)
                want[row] = delta
                assert np.max(np.abs(lhs - want)) <= 1e-9 * abs(delta)


def test_delta_from_minors_at_two(third):
    M, _, _ = char_matrices(third.ctx, 2.0)
    d = np.sum(M[0] * cyclic_cofactors(M)[0])
    assert abs(d - char_determinant(third.ctx, 2.0)) <= 1e-10 * abs(d)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.5, 30), st.floats(-np.pi, np.pi))
def test_conjugation_symmetry(mod, arg):
    ctx = _third_ctx()
    lam = mod * np.exp(1j * arg)
    a, b = abs(char_determinant(ctx, lam)), abs(char_determinant(ctx, -np.conj(lam)))
    assert abs(a - b) <= 1e-9 * max(a, b, 1e-300)


_CACHE = {}


def _third_ctx():
    if "third" not in _CACHE:
        from utm.problems import third_order_example
        _CACHE["third"] = third_order_example().ctx
    return _CACHE["third"]


def test_principal_determinant_closed_form(third, rng):
    ctx = third.ctx
    for lam in 3 * np.exp(2j * np.pi * rng.random(10)):
        want = -1j * sum(np.exp(-1j * ALPHA3**j * lam) * (ALPHA3 ** (j + 1) - ALPHA3 ** (j + 2)) * lam for j in range(3))
        assert abs(principal_determinant(ctx, lam) - want) <= 1e-10 * abs(want)
        es = principal_exponential_sum(ctx)
        assert abs(es(lam) - want) <= 1e-10 * abs(want)


def test_dirichlet_principal_zeros(heat):
    es = principal_exponential_sum(heat.ctx)
    k = np.arange(1, 6)
    vals = np.abs(es.scaled(k * np.pi + 0j))
    assert np.max(vals) <= 1e-12
    # 2 x 2 closed form: rows (1, e^{-i lam}) and (1, e^{i lam}) give e^{i lam} - e^{-i lam}
    lam = 1.3 + 0.4j
    d = principal_determinant(heat.ctx, lam)
    ratio = d / (np.exp(1j * lam) - np.exp(-1j * lam))
    ratio2 = principal_determinant(heat.ctx, 2 * lam) / (np.exp(2j * lam) - np.exp(-2j * lam))
    assert abs(ratio - ratio2) <= 1e-12 * abs(ratio)  # constant prefactor


def test_delta_over_principal_tends_to_one(third):
    ctx = third.ctx
    for arg in (0.0, np.pi / 2, -np.pi / 6, 7 * np.pi / 6):
        lam = 1e3 * np.exp(1j * arg)
        mu = exponents(ctx, lam)
        mp = exponents(ctx, lam, principal=True)
        M = scaled_char_matrices(ctx, lam, mu)[0]
        P = scaled_char_matrices(ctx, lam, mp)[0]
        shift = np.sum(np.maximum(0, mu.imag) - np.maximum(0, mp.imag))
        ratio = np.linalg.det(M) / np.linalg.det(P) * np.exp(shift)
        assert abs(ratio - 1) <= 0.01
