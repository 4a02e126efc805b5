"""Reference problems used by the tests, scripts and command line."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adjoint import BoundaryFormSet, IntervalOperatorSpec, adjoint_for
from .atoms import FunctionAtom
from .characteristic import CharacteristicContext, make_context
from .spectral_poly import MonicPolynomial, make_branch

__all__ = [
    "ReferenceProblem",
    "third_order_example",
    "heat_dirichlet",
    "multipoint_diffusion",
    "interface_initial_profile",
]


@dataclass(frozen=True)
class ReferenceProblem:
    name: str
    op: IntervalOperatorSpec
    B: BoundaryFormSet
    ctx: CharacteristicContext
    Q: FunctionAtom


def third_order_example(tighten: bool = True) -> ReferenceProblem:
    """``q_t + q_xxx - q_x = 0`` with ``q(0) = q(1) = q_x(1) = 0``.

    Here ``omega(k) = k^3 + k`` and ``a = -i``.  The adjoint forms are taken
    in the basis ``(psi(0), psi(1), psi'(0))`` so that closed forms compare
    entry by entry.
    """
    w = MonicPolynomial(3, (0, 1))
    op = IntervalOperatorSpec((w,), (-1j,))
    B = BoundaryFormSet.from_matrix([[1, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0], [0, 0, 0, 0, 1, 0]], [3])
    pkg = adjoint_for(op, B)
    canon = BoundaryFormSet.from_matrix([[1, 0, 0, 0, 0, 0], [0, 0, 0, 1, 0, 0], [0, 1, 0, 0, 0, 0]], [3])
    ctx = make_context(op, pkg, (make_branch(w, tighten=tighten),), adjoint_forms=canon)
    Q = FunctionAtom.polynomial([0, 1, -2, 1])  # x (1 - x)^2
    return ReferenceProblem("third_order", op, B, ctx, Q)


def heat_dirichlet() -> ReferenceProblem:
    """``q_t = q_xx`` with ``q(0) = q(1) = 0`` and ``Q = sin(pi x)``."""
    w = MonicPolynomial(2, (0,))
    op = IntervalOperatorSpec((w,), (1.0,))
    B = BoundaryFormSet.from_matrix([[1, 0, 0, 0], [0, 0, 1, 0]], [2])
    pkg = adjoint_for(op, B)
    canon = BoundaryFormSet.from_matrix([[1, 0, 0, 0], [0, 0, 1, 0]], [2])
    ctx = make_context(op, pkg, adjoint_forms=canon)
    return ReferenceProblem("heat_dirichlet", op, B, ctx, FunctionAtom.sin_pi(1.0))


def interface_initial_profile(y):
    """``U(y) = (3 - y)^2 (9 + 2 y)``: ``U'(0) = U'(1)`` and ``U(3) = 0``."""
    y = np.asarray(y, dtype=float)
    return (3 - y) ** 2 * (9 + 2 * y)


def multipoint_diffusion() -> ReferenceProblem:
    """Diffusion on [0, 3] with ``u_y(0) = u_y(1)``, ``u(3) = 0``, split at ``y = 1``.

    ``q_1(x) = u(x)`` and ``q_2(x) = u(2x + 1)`` give ``a = (1, 1/4)``.
    """
    w = MonicPolynomial(2, (0,))
    op = IntervalOperatorSpec((w, w), (1.0, 0.25))
    mat = [[0, 1, 0, -1, 0, 0, 0, 0],
           [0, 0, 0, 0, 0, 0, 1, 0],
           [0, 0, 1, 0, -1, 0, 0, 0],
           [0, 0, 0, 2, 0, -1, 0, 0]]
    B = BoundaryFormSet.from_matrix(mat, [2, 2])
    pkg = adjoint_for(op, B)
    ctx = make_context(op, pkg)
    # U(y) = 81 - 36y - 3y^2 + 2y^3, composed with y = 2x + 1 on the second piece
    u = np.polynomial.Polynomial([81.0, -36.0, -3.0, 2.0])
    q1 = u.coef
    q2 = u(np.polynomial.Polynomial([1.0, 2.0])).coef
    Q = FunctionAtom.polynomial(q1, q2)
    return ReferenceProblem("multipoint_diffusion", op, B, ctx, Q)
