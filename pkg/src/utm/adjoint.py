"""Adjoint boundary forms for constant-coefficient multipoint operators.

Conventions.  On interval ``r`` the operator is ``omega_r(-i d/dx)``.  The
trace vector of ``phi`` is ``(phi_1(0), phi_1(1), ..., phi_m(0), phi_m(1))``
with ``phi_r(x) = (phi, phi', ..., phi^(n_r - 1))``, so a vector of boundary
forms is an ``l x 2N`` matrix acting on traces.  ``u (.) v`` denotes the
sesquilinear product ``sum_k u_k conj(v_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .atoms import FunctionAtom, apply_dispersion, moments
from .errors import RankDeficient, SingularH, ValidationError
from .spectral_poly import MonicPolynomial, schwarz_conjugate

__all__ = [
    "IntervalOperatorSpec",
    "BoundaryFormSet",
    "AdjointPackage",
    "to_monic_derivative_form",
    "from_monic_derivative_form",
    "green_boundary_matrix",
    "extend_to_complementary",
    "build_adjoint",
    "adjoint_for",
    "check_adjointness",
    "greens_residual",
    "formal_adjoint",
    "row_space_projector",
    "polynomial_inner",
]

RANK_TOL = 1e-10


@dataclass(frozen=True)
class IntervalOperatorSpec:
    """Operators ``omega_r(-i d/dx)`` with time coefficients ``a_r`` on ``m`` intervals."""

    omegas: tuple[MonicPolynomial, ...]
    time_coeffs: tuple[complex, ...]

    def __post_init__(self) -> None:
        omegas = tuple(self.omegas)
        a = tuple(complex(v) for v in self.time_coeffs)
        if len(omegas) == 0 or len(omegas) != len(a):
            raise ValidationError("need one time coefficient per interval")
        for w, ar in zip(omegas, a):
            if ar == 0:
                raise ValidationError("time coefficient must be nonzero")
            arg = np.angle(ar)
            if abs(arg) > np.pi / 2 + 1e-12:
                raise ValidationError(f"arg(a) = {arg:.4f} lies outside [-pi/2, pi/2]")
            if w.degree % 2 == 1:
                if abs(abs(arg) - np.pi / 2) > 1e-12:
                    raise ValidationError("odd order requires arg(a) = +-pi/2")
                if not w.is_real:
                    raise ValidationError("odd order requires real dispersion coefficients")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "time_coeffs", a)

    @property
    def m(self) -> int:
        return len(self.omegas)

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(w.degree for w in self.omegas)

    @property
    def total_order(self) -> int:
        return sum(self.orders)

    def column_slices(self) -> list[tuple[slice, slice]]:
        """Column ranges of ``b^r`` and ``beta^r`` inside a trace-space matrix."""
        out, start = [], 0
        for n in self.orders:
            out.append((slice(start, start + n), slice(start + n, start + 2 * n)))
            start += 2 * n
        return out


@dataclass(frozen=True)
class BoundaryFormSet:
    """Forms ``B phi = sum_r b^r phi_r(0) + beta^r phi_r(1)``."""

    left_mats: tuple[np.ndarray, ...]
    right_mats: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        left = tuple(np.atleast_2d(np.asarray(b, dtype=complex)) for b in self.left_mats)
        right = tuple(np.atleast_2d(np.asarray(b, dtype=complex)) for b in self.right_mats)
        if len(left) != len(right) or not left:
            raise ValidationError("need left and right matrices for each interval")
        rows = {b.shape[0] for b in left + right}
        if len(rows) != 1:
            raise ValidationError("all boundary matrices must have the same number of rows")
        for b, beta in zip(left, right):
            if b.shape != beta.shape:
                raise ValidationError("b^r and beta^r must have equal shapes")
        for b in left + right:
            b.setflags(write=False)
        object.__setattr__(self, "left_mats", left)
        object.__setattr__(self, "right_mats", right)
        mat = self.matrix
        if mat.shape[0] > mat.shape[1]:
            raise ValidationError("more forms than trace dimensions")
        if mat.shape[0] and numerical_rank(mat) < mat.shape[0]:
            raise RankDeficient(
                f"boundary matrix has rank {numerical_rank(mat)} < {mat.shape[0]} forms "
                "(rows must be linearly independent)"
            )

    @classmethod
    def from_matrix(cls, mat, orders: Sequence[int]) -> "BoundaryFormSet":
        """Split an ``l x 2N`` matrix ``[b^1 : beta^1 : ... : b^m : beta^m]``."""
        mat = np.atleast_2d(np.asarray(mat, dtype=complex))
        if mat.shape[1] != 2 * sum(orders):
            if mat.size == 0:
                mat = np.zeros((0, 2 * sum(orders)), dtype=complex)
            else:
                raise ValidationError(f"expected {2 * sum(orders)} columns, got {mat.shape[1]}")
        left, right, start = [], [], 0
        for n in orders:
            left.append(mat[:, start:start + n])
            right.append(mat[:, start + n:start + 2 * n])
            start += 2 * n
        return cls(tuple(left), tuple(right))

    @property
    def count(self) -> int:
        return self.left_mats[0].shape[0]

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(b.shape[1] for b in self.left_mats)

    @property
    def matrix(self) -> np.ndarray:
        return np.hstack([np.hstack([b, beta]) for b, beta in zip(self.left_mats, self.right_mats)])

    def apply(self, phi) -> np.ndarray:
        """Form values on a function with ``jets(r, n)`` (an atom)."""
        return self.matrix @ traces(phi, self.orders)


def traces(phi, orders: Sequence[int]) -> np.ndarray:
    parts = []
    for r, n in enumerate(orders):
        left, right = phi.jets(r, n)
        parts += [left, right]
    return np.concatenate(parts)


def numerical_rank(mat: np.ndarray, tol: float = RANK_TOL) -> int:
    if mat.size == 0:
        return 0
    s = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def row_space_projector(mat: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto the row space (as a subspace of column vectors)."""
    mat = np.atleast_2d(np.asarray(mat, dtype=complex))
    if mat.shape[0] == 0:
        return np.zeros((mat.shape[1], mat.shape[1]), dtype=complex)
    q, _ = np.linalg.qr(mat.conj().T)
    q = q[:, : numerical_rank(mat)]
    return q @ q.conj().T


def to_monic_derivative_form(omega: MonicPolynomial) -> np.ndarray:
    """``c_hat_j = c_j (-i)^(j-n)`` so that ``omega(-i d) = (-i)^n (d^n + sum c_hat_j d^j)``."""
    n = omega.degree
    j = np.arange(n + 1)
    return omega.coeffs * (-1j) ** (j - n)


def from_monic_derivative_form(coeffs) -> MonicPolynomial:
    c = np.asarray(coeffs, dtype=complex)
    n = len(c) - 1
    back = c * (-1j) ** (n - np.arange(n + 1))
    return MonicPolynomial(n, tuple(back[: n - 1]))


def green_boundary_matrix(coeffs, endpoint: float = 0.0) -> np.ndarray:
    """``F`` with ``F_jk = (-1)^(j-1) c_hat_(j-1+k)`` for ``j + k <= n + 1``.

    For constant coefficients ``F`` is the same at both endpoints; the
    argument is kept so the call reads like the boundary it refers to.
    """
    c = np.asarray(coeffs, dtype=complex)
    n = len(c) - 1
    F = np.zeros((n, n), dtype=complex)
    for j in range(1, n + 1):
        for k in range(1, n + 2 - j):
            F[j - 1, k - 1] = (-1) ** (j - 1) * c[j - 1 + k]
    return F


def formal_adjoint(omega: MonicPolynomial) -> MonicPolynomial:
    """In the ``omega(-i d/dx)`` normalisation the formal adjoint is ``conj(omega)(-i d/dx)``."""
    return schwarz_conjugate(omega)


@dataclass(frozen=True)
class AdjointPackage:
    """Everything produced from ``(B, B_c)``.

    ``F_left``/``F_right`` are the plain matrices (determinant 1);
    ``scales`` holds ``(-i)^(n_r)``.  Green's formula for ``omega(-i d)``
    uses the scaled blocks, so ``S = blockdiag(-s_r F_r(0), s_r F_r(1))``.
    """

    op: IntervalOperatorSpec
    boundary: BoundaryFormSet
    complementary: BoundaryFormSet
    F_left: tuple[np.ndarray, ...]
    F_right: tuple[np.ndarray, ...]
    scales: tuple[complex, ...]
    S: np.ndarray
    H: np.ndarray
    J: np.ndarray
    adjoint: BoundaryFormSet
    adjoint_complementary: BoundaryFormSet = field(repr=False)
    weights: tuple[complex, ...] | None = None  # per-interval operator weights; None means all 1

    def effective_F(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        return ([s * F for s, F in zip(self.scales, self.F_left)],
                [s * F for s, F in zip(self.scales, self.F_right)])


def extend_to_complementary(B: BoundaryFormSet) -> BoundaryFormSet:
    """Orthonormal basis of the orthogonal complement of the row space of ``B``."""
    mat = B.matrix
    if mat.shape[0] and numerical_rank(mat) < mat.shape[0]:
        raise RankDeficient("boundary forms are not linearly independent")
    if mat.shape[0] == 0:
        comp = np.eye(mat.shape[1], dtype=complex)
    else:
        _, _, vh = np.linalg.svd(mat)
        comp = vh[mat.shape[0]:]
    return BoundaryFormSet.from_matrix(comp.reshape(-1, mat.shape[1]), B.orders)


def build_adjoint(op: IntervalOperatorSpec, B: BoundaryFormSet, B_c: BoundaryFormSet,
                  weights: Sequence[complex] | None = None) -> AdjointPackage:
    """Adjoint forms for ``omega_r(-i d/dx)``, or for ``w_r omega_r(-i d/dx)`` when ``weights`` are given."""
    if weights is not None and len(weights) != op.m:
        raise ValidationError("need one weight per interval")
    if B.orders != op.orders or B_c.orders != op.orders:
        raise ValidationError("boundary form orders do not match the operator")
    N = op.total_order
    if B.count + B_c.count != 2 * N:
        raise ValidationError("B and B_c must together have 2N forms")
    F_left, F_right, scales, blocks = [], [], [], []
    for r, w in enumerate(op.omegas):
        c_hat = to_monic_derivative_form(w)
        F0 = green_boundary_matrix(c_hat, 0.0)
        F1 = green_boundary_matrix(c_hat, 1.0)
        s = (-1j) ** w.degree * (1.0 if weights is None else complex(weights[r]))
        F_left.append(F0)
        F_right.append(F1)
        scales.append(s)
        blocks += [-s * F0, s * F1]
    S = _block_diag(blocks)
    H = np.vstack([B.matrix, B_c.matrix])
    sv = np.linalg.svd(H, compute_uv=False)
    if sv[-1] <= 1e-12 * sv[0]:
        raise SingularH("B and B_c are not complementary (H is singular)")
    SHinv = np.linalg.solve(H.T, S.T).T
    J = SHinv.conj().T
    ell = B.count
    adj_c = BoundaryFormSet.from_matrix(J[:ell], op.orders) if ell else BoundaryFormSet.from_matrix(
        np.zeros((0, 2 * N)), op.orders)
    adj = BoundaryFormSet.from_matrix(J[ell:], op.orders) if ell < 2 * N else BoundaryFormSet.from_matrix(
        np.zeros((0, 2 * N)), op.orders)
    wts = None if weights is None else tuple(complex(v) for v in weights)
    return AdjointPackage(op, B, B_c, tuple(F_left), tuple(F_right), tuple(scales), S, H, J, adj, adj_c, wts)


def adjoint_for(op: IntervalOperatorSpec, B: BoundaryFormSet,
                weights: Sequence[complex] | None = None) -> AdjointPackage:
    """``build_adjoint`` with the orthonormal complement."""
    return build_adjoint(op, B, extend_to_complementary(B), weights)


def _block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size), dtype=complex)
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


def check_adjointness(B: BoundaryFormSet, Z: BoundaryFormSet, F_left, F_right) -> float:
    """``|| sum_r b^r F_r(0)^-1 z^r* - beta^r F_r(1)^-1 zeta^r* ||_F``; zero iff ``Z`` is adjoint to ``B``.

    ``F_left``/``F_right`` must be the matrices of the sesquilinear Green
    form actually used (``AdjointPackage.effective_F``).
    """
    total = np.zeros((B.count, Z.count), dtype=complex)
    for b, beta, z, zeta, F0, F1 in zip(B.left_mats, B.right_mats, Z.left_mats, Z.right_mats, F_left, F_right):
        total += b @ np.linalg.solve(F0, z.conj().T) - beta @ np.linalg.solve(F1, zeta.conj().T)
    return float(np.linalg.norm(total))


def polynomial_inner(p, q) -> complex:
    """``int_0^1 p(x) conj(q(x)) dx`` for ascending coefficient arrays, exactly."""
    p = np.asarray(p, dtype=complex)
    q = np.asarray(q, dtype=complex).conj()
    prod = np.convolve(p, q)
    return complex(np.sum(prod / np.arange(1, len(prod) + 1)))


def _atom_inner(f: FunctionAtom, g: FunctionAtom, r: int) -> complex:
    tf, tg = f.pieces[r], g.pieces[r]
    total = 0j
    for a in tf:
        for b in tg:
            if a.kappa == 0 and b.kappa == 0:
                total += polynomial_inner(a.coeffs, b.coeffs)
            else:
                # int x^p e^{(ka + conj kb) x}: a moment at mu = i (ka + conj kb)
                prod = np.convolve(np.array(a.coeffs), np.array(b.coeffs).conj())
                mom = moments(1j * (a.kappa + np.conj(b.kappa)), len(prod) - 1)
                total += complex(prod @ mom)
    return total


def greens_residual(op: IntervalOperatorSpec, phi: FunctionAtom, psi: FunctionAtom,
                    pkg: AdjointPackage) -> complex:
    """``<L phi, psi> - <phi, L* psi> - (B phi (.) B*_c psi + B_c phi (.) B* psi)``."""
    lhs = 0j
    for r, w in enumerate(op.omegas):
        k = 1.0 if pkg.weights is None else pkg.weights[r]
        Lphi = apply_dispersion(w.low_coeffs, w.degree, phi.interval(r))
        wa = formal_adjoint(w)
        Lpsi = apply_dispersion(wa.low_coeffs, wa.degree, psi.interval(r))
        lhs += k * (_atom_inner(Lphi, psi.interval(r), 0) - _atom_inner(phi.interval(r), Lpsi, 0))
    orders = op.orders
    xphi = traces(phi, orders)
    xpsi = traces(psi, orders)
    rhs = np.vdot(pkg.adjoint_complementary.matrix @ xpsi, pkg.boundary.matrix @ xphi)
    rhs += np.vdot(pkg.adjoint.matrix @ xpsi, pkg.complementary.matrix @ xphi)
    return complex(lhs - rhs)
