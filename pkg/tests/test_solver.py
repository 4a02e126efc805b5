import warnings
from dataclasses import replace

import numpy as np
import pytest

from conftest import instance
from oracles import sine_series_heat
from utm.adjoint import BoundaryFormSet, IntervalOperatorSpec, adjoint_for
from utm.atoms import FunctionAtom
from utm.characteristic import make_context
from utm.errors import GridTooCoarse, ValidationError
from utm.solver import (BoundaryData, Forcing, ProblemInstance, SolutionField, SolverConfig, prepare, pde_residual,
                        resample_slice, solve, solve_homogeneous, solve_inhomogeneous, solve_interface)
from utm.spectral_poly import MonicPolynomial
from utm.transforms import apply_operator

X21 = np.linspace(0, 1, 21)


def test_heat_matches_sine_series(heat_prob):
    f = solve_homogeneous(heat_prob, X21, [0.0, 0.05])
    oracle = sine_series_heat(lambda s: np.sin(np.pi * s), X21, 0.05)
    assert np.max(np.abs(f.values[0, :, 1] - oracle)) <= 1e-6
    assert np.max(np.abs(f.values[0, :, 1] - np.exp(-np.pi**2 * 0.05) * np.sin(np.pi * X21))) <= 1e-6
    assert np.max(np.abs(f.values[0, :, 0] - np.sin(np.pi * X21))) <= 1e-3
    # real data, real coefficients: the field is real
    assert np.max(np.abs(f.values.imag)) <= 1e-8
    assert np.all(np.isfinite(f.errors))


def test_third_order_boundary_residuals(third_prob):
    x = np.linspace(0, 1, 41)
    f = solve_homogeneous(third_prob, x, [0.01, 0.1])
    h = x[1] - x[0]
    for k in range(2):
        q = f.values[0, :, k]
        qx1 = (3 * q[-1] - 4 * q[-2] + q[-3]) / (2 * h)
        assert max(abs(q[0]), abs(q[-1]), abs(qx1)) <= 1e-4


def test_zero_forcing_matches_homogeneous(heat, heat_prob):
    zero = Forcing((FunctionAtom.zero(),), (FunctionAtom.polynomial([1.0]),))
    hzero = BoundaryData((np.zeros(2),), (FunctionAtom.polynomial([1.0]),))
    prob = replace(heat_prob, forcing=zero, h=hzero)
    a = solve_inhomogeneous(prob, X21, [0.05])
    b = solve_homogeneous(heat_prob, X21, [0.05])
    assert np.max(np.abs(a.values - b.values)) <= 1e-12


def test_mode_preconditions(heat_prob):
    forcing = Forcing((FunctionAtom.polynomial([1.0]),), (FunctionAtom.polynomial([1.0]),))
    with pytest.raises(ValidationError):
        solve_homogeneous(replace(heat_prob, forcing=forcing), X21, [0.05])
    with pytest.raises(ValidationError):
        solve_inhomogeneous(heat_prob, X21, [0.05])
    with pytest.raises(ValidationError):
        Forcing((FunctionAtom.zero(),), ())
    with pytest.raises(ValidationError):
        replace(heat_prob, T=0.0)


def test_incompatible_datum_warns(heat):
    with pytest.warns(UserWarning, match="boundary conditions"):
        instance(replace(heat, Q=FunctionAtom.polynomial([1.0])))


def manufactured(third):
    """``q* = exp(-t) x^2 (1 - x)^2`` meets the homogeneous conditions, so ``h = 0``."""
    X = FunctionAtom.polynomial([0, 0, 1, -2, 1])
    a = third.op.time_coeffs[0]
    space = (X.scale(-1) + apply_operator(third.op, X).scale(a),)
    return X, Forcing(space, (FunctionAtom.exponential(-1.0),))


def test_manufactured_solution(third):
    X, forcing = manufactured(third)
    prob = prepare(instance(replace(third, Q=X), forcing=forcing))
    x = np.linspace(0.1, 0.9, 9)
    t = np.array([0.05, 0.5, 1.0])
    f = solve_inhomogeneous(prob, x, t)
    assert np.max(np.abs(f.values[0] - np.exp(-t)[None, :] * X(x)[:, None])) <= 1e-3


def test_boundary_data_path(heat):
    # q = x t solves q_t = q_xx with q(0, t) = 0, q(1, t) = t, Q = 0
    h = BoundaryData((np.array([0.0, 1.0]),), (FunctionAtom.polynomial([0.0, 1.0]),))
    forcing = Forcing((FunctionAtom.polynomial([0.0, 1.0]),), (FunctionAtom.polynomial([1.0]),))
    # nonzero boundary data converge slowly in rho, so go further out than the default
    cfg = SolverConfig(rho_max=800.0)
    prob = prepare(instance(replace(heat, Q=FunctionAtom.zero()), h=h, forcing=forcing), cfg)
    x = np.linspace(0.1, 0.9, 9)
    f = solve_inhomogeneous(prob, x, [0.05, 0.2], cfg)
    exact = np.outer(x, [0.05, 0.2])
    assert np.max(np.abs(f.values[0] - exact)) <= 1e-3


def test_linearity(third, third_prob):
    X, forcing = manufactured(third)
    x = np.linspace(0.1, 0.9, 5)
    t = [0.1]
    p1 = third_prob
    p2 = prepare(instance(replace(third, Q=X), forcing=forcing))
    both = prepare(instance(replace(third, Q=third.Q + X.scale(2.0)),
                            forcing=Forcing(tuple(s.scale(2.0) for s in forcing.space), forcing.time)))
    a = solve(both, x, t).values
    b = solve(p1, x, t).values + 2 * solve(p2, x, t).values
    assert np.max(np.abs(a - b)) <= 1e-10 * np.max(np.abs(a))


def test_semigroup(heat, heat_prob):
    x = np.linspace(0.1, 0.9, 9)
    direct = solve(heat_prob, x, [0.05])
    mid = resample_slice(heat_prob, 0.02)
    assert mid.error_bound <= 1e-8
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        restart = prepare(instance(replace(heat, Q=mid)))
    again = solve(restart, x, [0.03])
    tol = 1e-6
    assert np.max(np.abs(direct.values - again.values)) <= 2 * tol


def test_cancel_flag_paths_agree(third_prob, heat_prob):
    x = np.linspace(0.1, 0.9, 9)
    for prob in (third_prob, heat_prob):
        a = solve(prob, x, [0.05], SolverConfig(cancel=True)).values
        b = solve(prob, x, [0.05], SolverConfig(cancel=False)).values
        assert np.max(np.abs(a - b)) <= 1e-6


def glued_heat():
    """Two copies of [0, 1] glued by continuity: heat on [0, 2] with Dirichlet ends."""
    w = MonicPolynomial(2, (0,))
    op = IntervalOperatorSpec((w, w), (1.0, 1.0))
    B = BoundaryFormSet.from_matrix([[1, 0, 0, 0, 0, 0, 0, 0], [0, 0, 1, 0, -1, 0, 0, 0],
                                     [0, 0, 0, 1, 0, -1, 0, 0], [0, 0, 0, 0, 0, 0, 1, 0]], [2, 2])
    pkg = adjoint_for(op, B)
    Q = FunctionAtom.stack([FunctionAtom.sin_pi(0.5), FunctionAtom.cos_pi(0.5)])
    return prepare(ProblemInstance(op, B, pkg, make_context(op, pkg), Q))


def test_glued_interface_matches_single_interval():
    prob = glued_heat()
    x = np.linspace(0.1, 0.9, 9)
    f = solve_interface(prob, x, [0.05])
    # y = 2 x maps [0, 2] to [0, 1] with diffusivity 1/4
    oracle = lambda y: sine_series_heat(lambda s: np.sin(np.pi * s), y, 0.05, a=0.25)
    assert np.max(np.abs(f.values[0, :, 0] - oracle(x / 2))) <= 1e-3
    assert np.max(np.abs(f.values[1, :, 0] - oracle((x + 1) / 2))) <= 1e-3


def test_single_interval_interface_path(heat_prob):
    x = np.linspace(0.1, 0.9, 5)
    a = solve_interface(heat_prob, x, [0.05])
    b = solve_homogeneous(heat_prob, x, [0.05])
    np.testing.assert_array_equal(a.values, b.values)
    with pytest.raises(ValidationError):
        solve_interface(heat_prob, x, [0.05], SolverConfig(interface="other"))


def test_pde_residual_basics(heat):
    x = np.linspace(0, 1, 41)
    t = np.linspace(0.01, 0.1, 41)
    prob = instance(heat)
    zero = SolutionField(x, t, np.zeros((1, 41, 41), complex), np.zeros((1, 41, 41)))
    # the zero field has no scale; its residual is zero
    assert pde_residual(zero, prob) == 0
    exact = np.exp(-np.pi**2 * t)[None, None, :] * np.sin(np.pi * x)[None, :, None]
    field = SolutionField(x, t, exact.astype(complex), np.zeros_like(exact))
    # second-order stencils: relative truncation error about (pi h)^2 / 12 plus the time term
    h, k = x[1] - x[0], t[1] - t[0]
    bound = (np.pi * h) ** 2 / 12 + (np.pi**2 * k) ** 2 / 6
    assert pde_residual(field, prob) <= 1.1 * bound
    with pytest.raises(GridTooCoarse):
        pde_residual(SolutionField(x[:3], t, exact[:, :3], exact[:, :3]), prob)
    with pytest.raises(GridTooCoarse):
        pde_residual(SolutionField(x ** 2, t, exact, exact), prob)
