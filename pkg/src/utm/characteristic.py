"""Characteristic matrices and determinants built from adjoint boundary forms.

Row ``j`` (zero based) belongs to interval ``r = j // n`` and carries the
exponent ``mu_j = nu_r(alpha**j * lam)``; the conjugated eigenfunction is
``exp(-i mu_j x)``.  Every routine is vectorised over an array of ``lam``.

Large ``Im mu_j`` makes ``exp(-i mu_j)`` overflow, so the working quantities
are row-scaled by ``s_j = 1 / max(1, |exp(-i mu_j)|)``.  Scaled and unscaled
versions differ only by these positive factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .adjoint import (AdjointPackage, BoundaryFormSet, IntervalOperatorSpec, build_adjoint,
                      extend_to_complementary, row_space_projector)
from .errors import DegeneratePrincipalPart, ValidationError
from .spectral_poly import MonicPolynomial, NuBranch, branch_derivative, branch_eval, make_branch

__all__ = [
    "CharacteristicContext",
    "SpectralSample",
    "ExponentialSum",
    "make_context",
    "rate_normalised_context",
    "kernel_exponent",
    "char_matrices",
    "scaled_char_matrices",
    "char_determinant",
    "principal_determinant",
    "principal_exponential_sum",
    "cofactor_minors",
    "cyclic_cofactors",
    "spectral_sample",
]


@dataclass(frozen=True)
class CharacteristicContext:
    """Immutable data shared by all per-``lam`` evaluations.

    ``adj_left[r]``/``adj_right[r]`` are the ``N x n`` coefficient blocks of
    the adjoint forms used to build ``M``; ``comp_matrix`` is the
    complementary ``B_c`` paired with them, and ``adjc_left``/``adjc_right``
    the blocks of ``B*_c``.
    """

    op: IntervalOperatorSpec
    pkg: AdjointPackage
    branches: tuple[NuBranch, ...]
    adj_left: tuple[np.ndarray, ...]
    adj_right: tuple[np.ndarray, ...]
    adjc_left: tuple[np.ndarray, ...]
    adjc_right: tuple[np.ndarray, ...]
    comp_matrix: np.ndarray = field(repr=False)
    stretch: tuple[complex, ...] | None = None  # nu_r = (stored branch)(lam) / stretch_r
    common_rate: complex | None = None  # one time coefficient for all intervals

    def rate(self, r: int) -> complex:
        """Time coefficient multiplying ``lam^n`` in the evolution of interval ``r``."""
        return self.op.time_coeffs[r] if self.common_rate is None else self.common_rate

    def weight(self, r: int) -> complex:
        """Factor on ``omega_r`` in the operator the transforms diagonalise."""
        return 1.0 if self.stretch is None else self.stretch[r] ** self.n

    def nu(self, r: int, lam):
        v = branch_eval(self.branches[r], lam)
        return v if self.stretch is None else v / self.stretch[r]

    def nu_prime(self, r: int, lam, nu=None):
        c = 1.0 if self.stretch is None else self.stretch[r]
        base = None if nu is None else nu * c
        return branch_derivative(self.branches[r], lam, nu=base) / c

    @property
    def n(self) -> int:
        return self.op.orders[0]

    @property
    def m(self) -> int:
        return self.op.m

    @property
    def N(self) -> int:
        return self.n * self.m

    @property
    def alpha(self) -> complex:
        return np.exp(2j * np.pi / self.n)

    def row_interval(self, j: int) -> int:
        """Interval of zero-based row ``j``."""
        if not 0 <= j < self.N:
            raise ValidationError(f"row {j} out of range")
        return j // self.n

    def first_row(self, r: int) -> int:
        return r * self.n

    @property
    def rho_max(self) -> float:
        return max(b.domain_radius for b in self.branches)


def make_context(op: IntervalOperatorSpec, pkg: AdjointPackage, branches=None,
                 adjoint_forms: BoundaryFormSet | None = None) -> CharacteristicContext:
    """Context from an adjoint package.

    ``adjoint_forms`` may replace ``pkg.adjoint`` by another basis of the same
    row space (``Z = T B*``).  The complementary forms are then transformed
    to ``T^-dagger B_c`` so Green's formula, and hence every transform,
    stays consistent.
    """
    orders = set(op.orders)
    if len(orders) != 1:
        raise ValidationError("transform solver needs equal orders on every interval")
    n = op.orders[0]
    N = n * op.m
    if pkg.adjoint.count != N:
        raise ValidationError(f"need {N} boundary forms for a square characteristic matrix, got {pkg.boundary.count}")
    if branches is None:
        branches = tuple(make_branch(w) for w in op.omegas)
    A = pkg.adjoint.matrix
    comp = pkg.complementary.matrix
    if adjoint_forms is not None:
        Z = adjoint_forms.matrix
        if Z.shape != A.shape or np.linalg.norm(row_space_projector(Z) - row_space_projector(A)) > 1e-8:
            raise ValidationError("supplied adjoint forms do not span the adjoint row space")
        T = Z @ np.linalg.pinv(A)
        comp = np.linalg.solve(T.conj().T, comp)
        A = Z
    adj = BoundaryFormSet.from_matrix(A, op.orders)
    adjc = pkg.adjoint_complementary
    return CharacteristicContext(op, pkg, tuple(branches), adj.left_mats, adj.right_mats,
                                 adjc.left_mats, adjc.right_mats, comp)


def rate_normalised_context(op: IntervalOperatorSpec, B: BoundaryFormSet, rate: complex | None = None,
                            adjoint_forms: BoundaryFormSet | None = None) -> CharacteristicContext:
    """Context with one time coefficient ``rate`` (default ``a_1``) shared by every interval.

    ``a_r omega_r(-i d/dx)`` is written as ``rate * k_r omega_r(-i d/dx)``
    with ``k_r = a_r / rate``; the adjoint forms are those of the weighted
    operator and ``nu_r(lam) = nuhat_r(lam) / c_r`` with ``c_r = k_r^(1/n)``,
    ``nuhat_r`` the branch of the monic ``c_r^n omega_r(z / c_r)``.  Then
    ``k_r omega_r(nu_r(lam)) = lam^n`` on every interval.
    """
    a = np.asarray(op.time_coeffs, dtype=complex)
    rate = complex(a[0] if rate is None else rate)
    if rate == 0:
        raise ValidationError("common rate must be nonzero")
    k = a / rate
    if np.any(np.abs(k.imag) > 1e-14 * np.abs(k)) or np.any(k.real <= 0):
        raise ValidationError("rate normalisation needs every a_r / rate to be real and positive")
    k = k.real
    n = op.orders[0]
    c = k ** (1.0 / n)
    branches = []
    for w, cr in zip(op.omegas, c):
        low = tuple(complex(v) * cr ** (n - l) for l, v in enumerate(w.low_coeffs))
        branches.append(make_branch(MonicPolynomial(n, low)))
    pkg = build_adjoint(op, B, extend_to_complementary(B), weights=tuple(k))
    ctx = make_context(op, pkg, tuple(branches), adjoint_forms=adjoint_forms)
    return replace(ctx, stretch=tuple(complex(v) for v in c), common_rate=rate)


def _rows(ctx: CharacteristicContext):
    return np.arange(ctx.N) // ctx.n, ctx.alpha ** (np.arange(ctx.N) % ctx.n)


def _stretch(ctx: CharacteristicContext) -> np.ndarray:
    if ctx.stretch is None:
        return np.ones(ctx.N, dtype=complex)
    return np.repeat(np.asarray(ctx.stretch, dtype=complex), ctx.n)


def kernel_exponent(ctx: CharacteristicContext, j, lam):
    """``mu_j = nu_{r(j)}(alpha**j lam)`` for zero-based ``j``."""
    r = ctx.row_interval(j)
    return ctx.nu(r, ctx.alpha ** (j % ctx.n) * np.asarray(lam, dtype=complex))


def exponents(ctx: CharacteristicContext, lam, principal: bool = False) -> np.ndarray:
    """All ``mu_j`` as an array of shape ``lam.shape + (N,)``."""
    lam = np.asarray(lam, dtype=complex)
    interval, rot = _rows(ctx)
    c = _stretch(ctx)
    out = np.empty(lam.shape + (ctx.N,), dtype=complex)
    for j in range(ctx.N):
        z = rot[j] * lam
        out[..., j] = (z if principal else branch_eval(ctx.branches[interval[j]], z)) / c[j]
    return out


def _form_parts(mu: np.ndarray, interval: np.ndarray, left, right):
    """Polynomial parts ``sum_l conj(coef_kl) (-i mu_j)^l`` for left and right blocks."""
    n = left[0].shape[1]
    powers = (-1j * mu)[..., None] ** np.arange(n)  # (..., N, n)
    P = np.empty(mu.shape + (left[0].shape[0],), dtype=complex)
    Q = np.empty_like(P)
    for r in np.unique(interval):
        sel = interval == r
        P[..., sel, :] = powers[..., sel, :] @ left[r].conj().T
        Q[..., sel, :] = powers[..., sel, :] @ right[r].conj().T
    return P, Q


def row_scale(mu: np.ndarray) -> np.ndarray:
    """``1 / max(1, |exp(-i mu)|)``."""
    return np.exp(-np.maximum(0.0, np.imag(mu)))


def form_parts(ctx: CharacteristicContext, mu: np.ndarray):
    """``(P, Q)``: ``M_plus = P`` and ``M_minus = exp(-i mu) Q`` row-wise, with no exponential factor."""
    interval, _ = _rows(ctx)
    return _form_parts(mu, interval, ctx.adj_left, ctx.adj_right)


def char_matrices(ctx: CharacteristicContext, lam, mu=None):
    """``(M, M_plus, M_minus)`` with rows indexed by ``j`` and columns by form ``k``."""
    lam = np.asarray(lam, dtype=complex)
    if mu is None:
        mu = exponents(ctx, lam)
    interval, _ = _rows(ctx)
    P, Q = _form_parts(mu, interval, ctx.adj_left, ctx.adj_right)
    Mp = P
    Mm = np.exp(-1j * mu)[..., None] * Q
    return Mp + Mm, Mp, Mm


def scaled_char_matrices(ctx: CharacteristicContext, lam, mu=None, left=None, right=None):
    """Row-scaled ``(M, M_plus, M_minus, s)``; ``left``/``right`` select other forms (for ``B*_c``)."""
    lam = np.asarray(lam, dtype=complex)
    if mu is None:
        mu = exponents(ctx, lam)
    interval, _ = _rows(ctx)
    P, Q = _form_parts(mu, interval, left or ctx.adj_left, right or ctx.adj_right)
    s = row_scale(mu)
    Mp = s[..., None] * P
    Mm = np.exp(-1j * mu - np.maximum(0.0, mu.imag))[..., None] * Q
    return Mp + Mm, Mp, Mm, s


def char_determinant(ctx: CharacteristicContext, lam):
    """``Delta(lam) = det M(lam)``; analytic in ``lam``."""
    M, _, _ = char_matrices(ctx, lam)
    return np.linalg.det(M)


def _windows(N: int) -> np.ndarray:
    return (np.arange(N)[:, None] + 1 + np.arange(N - 1)[None, :]) % N


def cofactor_minors(M: np.ndarray) -> np.ndarray:
    """``det X_jk``, ``X_jk`` the cyclic ``(N-1)``-window of ``[[M, M], [M, M]]`` at ``(j+1, k+1)``."""
    M = np.asarray(M, dtype=complex)
    N = M.shape[-1]
    w = _windows(N)
    sub = M[..., w[:, None, :, None], w[None, :, None, :]]  # (..., N, N, N-1, N-1)
    return np.linalg.det(sub)


def cyclic_cofactors(M: np.ndarray) -> np.ndarray:
    """``(-1)^((N-1)(j+k)) det X_jk``; equals the ordinary cofactor matrix."""
    N = M.shape[-1]
    idx = np.arange(N)
    sign = (-1.0) ** ((N - 1) * (idx[:, None] + idx[None, :]))
    return sign * cofactor_minors(M)


@dataclass(frozen=True)
class SpectralSample:
    lam: complex
    M: np.ndarray
    M_plus: np.ndarray
    M_minus: np.ndarray
    delta: complex
    minor_dets: np.ndarray


def spectral_sample(ctx: CharacteristicContext, lam: complex) -> SpectralSample:
    M, Mp, Mm = char_matrices(ctx, complex(lam))
    return SpectralSample(complex(lam), M, Mp, Mm, complex(np.linalg.det(M)), cofactor_minors(M))


# principal part ------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialSum:
    """``sum_i P_i(lam) exp(-i lam w_i)``; ``polys[i]`` ascending coefficients."""

    polys: tuple[np.ndarray, ...]
    weights: tuple[complex, ...]

    def _terms(self, lam, deriv: bool):
        lam = np.asarray(lam, dtype=complex)
        w = np.array(self.weights)
        expo = -1j * lam[..., None] * w  # (..., T)
        shift = expo.real.max(axis=-1, keepdims=True)
        e = np.exp(expo - shift)
        vals = np.stack([np.polynomial.polynomial.polyval(lam, p) for p in self.polys], axis=-1)
        if not deriv:
            return vals * e, shift[..., 0]
        dp = np.stack([np.polynomial.polynomial.polyval(lam, np.polynomial.polynomial.polyder(p))
                       if len(p) > 1 else np.zeros(lam.shape, complex) for p in self.polys], axis=-1)
        return (dp - 1j * w * vals) * e, vals * e, shift[..., 0]

    def __call__(self, lam):
        t, shift = self._terms(lam, False)
        return t.sum(axis=-1) * np.exp(shift)

    def scaled(self, lam):
        """Value divided by ``exp(max_i Re(-i lam w_i))`` (a positive real factor)."""
        t, _ = self._terms(lam, False)
        return t.sum(axis=-1)

    def log_derivative(self, lam):
        d, v, _ = self._terms(lam, True)
        with np.errstate(divide="ignore", invalid="ignore"):
            return d.sum(axis=-1) / v.sum(axis=-1)

    def scaled_with_derivative(self, lam):
        d, v, _ = self._terms(lam, True)
        return v.sum(axis=-1), d.sum(axis=-1)

    @property
    def degree(self) -> int:
        return max(len(p) for p in self.polys) - 1


def principal_exponential_sum(ctx: CharacteristicContext, tol: float = 1e-11) -> ExponentialSum:
    """Collect ``det M^P`` as an exponential sum by expanding over left/right row choices.

    Each subset ``S`` of rows takes the right (exponential) part on ``S``
    and the left part elsewhere; its polynomial ``det M_S`` is recovered by
    FFT of samples on the unit circle.
    """
    N, n = ctx.N, ctx.n
    if N > 12:
        raise ValidationError("exact principal-part expansion is limited to N <= 12")
    deg = N * (n - 1)
    K = 1 << int(np.ceil(np.log2(deg + 1)))
    z = np.exp(2j * np.pi * np.arange(K) / K)
    interval, rot = _rows(ctx)
    rot = rot / _stretch(ctx)
    mu = z[:, None] * rot[None, :]
    P, Q = _form_parts(mu, interval, ctx.adj_left, ctx.adj_right)
    groups: dict[tuple[float, float], list] = {}
    for choice in product((0, 1), repeat=N):
        sel = np.array(choice, dtype=bool)
        mat = np.where(sel[None, :, None], Q, P)
        d = np.linalg.det(mat)
        coeffs = np.fft.fft(d) / K
        w = complex(rot[sel].sum())
        key = (round(w.real, 9) + 0.0, round(w.imag, 9) + 0.0)
        if key in groups:
            groups[key][0] = groups[key][0] + coeffs
        else:
            groups[key] = [coeffs, w]
    scale = max(np.abs(c).max() for c, _ in groups.values())
    polys, weights = [], []
    for coeffs, w in groups.values():
        coeffs = np.where(np.abs(coeffs) > tol * scale, coeffs, 0)
        nz = np.flatnonzero(coeffs)
        if nz.size:
            polys.append(coeffs[: nz[-1] + 1])
            weights.append(w)
    if len(weights) < 2:
        raise DegeneratePrincipalPart(
            f"principal determinant has {len(weights)} distinct exponent(s); at least two are needed")
    return ExponentialSum(tuple(polys), tuple(weights))


def principal_determinant(ctx: CharacteristicContext, lam):
    """``Delta^P(lam)``: the determinant with every ``nu_r`` replaced by the identity (entire)."""
    lam = np.asarray(lam, dtype=complex)
    mu = exponents(ctx, lam, principal=True)
    interval, _ = _rows(ctx)
    P, Q = _form_parts(mu, interval, ctx.adj_left, ctx.adj_right)
    return np.linalg.det(P + np.exp(-1j * mu)[..., None] * Q)


def branch_derivatives(ctx: CharacteristicContext, lam, r: int):
    return ctx.nu_prime(r, lam)
