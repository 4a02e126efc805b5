"""Forward and inverse transforms, kernels, remainder and boundary terms.

For interval ``r`` with first characteristic row ``row = r n`` the
``plus``/``minus`` transforms are

    F_r(lam) = +-(nu_r'/2 pi) sum_j K_j <phi, y_j>,   K = M^-T v,

where ``v`` is row ``row`` of the left/right characteristic matrix.  This is
the cofactor expansion ``sum_k C_jk v_k / Delta`` written as one linear
solve.  Rows are scaled as in :mod:`utm.characteristic`: the solve uses the
scaled matrix, which turns ``<phi, y_j>`` into its scaled version.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .adjoint import traces
from .atoms import FunctionAtom, SampledAtom, apply_dispersion
from .characteristic import CharacteristicContext, exponents, form_parts, scaled_char_matrices
from .contours import MINUS, PLUS, Arc, ContourSet, Curve, ContourParams, Line
from .errors import NearZeroDelta, NotInDomain, UntaggedLambda, ValidationError
from .quadrature import QuadratureConfig, QuadratureReport, joint_principal_value
from .spectral_poly import NuBranch, branch_derivative, branch_eval

__all__ = [
    "FunctionAtom",
    "SampledAtom",
    "DELTA_FLOOR",
    "sign_for_tag",
    "apply_operator",
    "formal_forward",
    "formal_inverse",
    "formal_contour",
    "forward_pm",
    "forward",
    "forward_both",
    "kernel_coefficients",
    "kernel_psi",
    "remainder_transform",
    "remainder_polynomial",
    "diag_identity_residual",
    "inhomogeneous_boundary_term",
]

DELTA_FLOOR = 1e-13


def sign_for_tag(tag: str) -> int:
    """``+1`` for plus-side families and ``Gcuts``, ``-1`` for minus-side families."""
    if tag in (PLUS, "G0+", "Ga+", "Ghat+", "Gcuts"):
        return 1
    if tag in (MINUS, "G0-", "Ga-", "Ghat-"):
        return -1
    raise UntaggedLambda(f"unknown contour tag {tag!r}")


def _sign(sign) -> int:
    if isinstance(sign, str):
        return sign_for_tag(sign)
    if sign in (1, -1):
        return int(sign)
    raise ValidationError("sign must be +1, -1 or a contour tag")


def apply_operator(ctx_or_op, phi: FunctionAtom) -> FunctionAtom:
    """``L phi`` interval by interval, ``L_r = omega_r(-i d/dx)``.

    A rate-normalised context diagonalises ``k_r L_r``; that weight is applied too.
    """
    op = getattr(ctx_or_op, "op", ctx_or_op)
    weight = getattr(ctx_or_op, "weight", lambda r: 1.0)
    parts = [apply_dispersion(w.low_coeffs, w.degree, phi.interval(r)).scale(weight(r))
             for r, w in enumerate(op.omegas)]
    return FunctionAtom.stack(parts)


# formal pair ----------------------------------------------------------------

def formal_forward(phi, branch: NuBranch, lam, r: int = 0):
    """``int_0^1 phi_r(x) exp(-i nu(lam) x) dx``."""
    return phi.transform(branch_eval(branch, lam), r)


def formal_contour(branch: NuBranch, radius: float | None = None) -> ContourSet:
    """The real-axis path with its middle replaced by an upper arc of ``C(0, radius)``.

    For complex ``omega`` the two rays are arms of ``{nu(lam) real}``.
    """
    radius = float(1.1 * branch.domain_radius if radius is None else radius)
    if branch.omega.is_real:
        pieces = (Line("formal", 0, complex(-radius), -1 + 0j, np.inf, reverse=True),
                  Arc("formal", 0, 0j, radius, np.pi, 0.0),
                  Line("formal", 0, complex(radius), 1 + 0j, np.inf))
    else:
        probe_r = Curve("formal", 0, branch, radius, np.inf)
        probe_l = Curve("formal", 0, branch, -radius, -np.inf)
        sr, sl = probe_r.param_at_radius(radius), probe_l.param_at_radius(radius)
        zr, zl = probe_r.point(np.array([sr]))[0], probe_l.point(np.array([sl]))[0]
        th_l, th_r = float(np.angle(zl)), float(np.angle(zr))
        if th_l < th_r:
            th_l += 2 * np.pi
        pieces = (Curve("formal", 0, branch, -np.inf, sl), Arc("formal", 0, 0j, radius, th_l, th_r),
                  Curve("formal", 0, branch, sr, np.inf))
    return ContourSet(pieces, ContourParams(0.0, radius, (), branch.domain_radius), 0)


def formal_inverse(F: Callable, branch: NuBranch, x, schedule: Sequence[float],
                   cfg: QuadratureConfig = QuadratureConfig(), strict: bool = True) -> QuadratureReport:
    """``(1/2 pi) PV int exp(i nu x) nu' F dlam`` over :func:`formal_contour`; ``x`` may be an array."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any((x <= 0) | (x >= 1)):
        raise ValidationError("x must lie in (0, 1)")
    cs = formal_contour(branch, min(1.1 * branch.domain_radius, 0.5 * (branch.domain_radius + min(schedule))))

    def integrand(lam):
        nu = branch_eval(branch, lam)
        nup = branch_derivative(branch, lam, nu=nu)
        f = np.asarray(F(lam), dtype=complex)
        return (np.exp(1j * np.outer(nu, x)) * (nup * f)[:, None]) / (2 * np.pi)

    rate = lambda lam: np.abs(branch_derivative(branch, lam)) * max(1.0, float(x.max()))
    return joint_principal_value(integrand, cs, schedule, rate=rate, cfg=cfg, strict=strict)


# boundary-respecting transforms --------------------------------------------

def _expansion_scale(Mp: np.ndarray, Mm: np.ndarray) -> np.ndarray:
    """``sum_S |det(rows j in S from Mm, other rows from Mp)|``: the size of the exponential terms of the determinant."""
    N = Mp.shape[-1]
    out = np.zeros(Mp.shape[:-2])
    for bits in range(1 << N):
        pick = np.array([(bits >> j) & 1 for j in range(N)], dtype=bool)
        out += np.abs(np.linalg.det(np.where(pick[:, None], Mm, Mp)))
    return out


def _check_delta(M: np.ndarray, Mp: np.ndarray, Mm: np.ndarray) -> None:
    """Raise when ``|det M|`` is negligible next to its own exponential terms.

    Row norms are a cheap upper bound and settle most points; the term
    expansion is only formed where that bound is inconclusive.
    """
    det = np.abs(np.linalg.det(M))
    norms = np.prod(np.linalg.norm(M, axis=-1), axis=-1)
    maybe = det <= DELTA_FLOOR * norms
    if np.any(maybe):
        scale = _expansion_scale(Mp[maybe], Mm[maybe])
        if np.any(det[maybe] <= DELTA_FLOOR * scale):
            raise NearZeroDelta("characteristic determinant is numerically zero at a requested point")


def _nu_parts(ctx: CharacteristicContext, r: int, lam: np.ndarray, mu: np.ndarray):
    nu = mu[..., ctx.first_row(r)]
    return nu, ctx.nu_prime(r, lam, nu=nu)


def kernel_coefficients(ctx: CharacteristicContext, lam, sign, r: int = 0):
    """``(K, mu, s)``: ``K_j`` multiplies the scaled ``<phi, y_j>`` (and ``s_j exp(-i mu_j x)`` in the kernel).

    ``K`` already carries the prefactor ``+-nu_r'/2 pi``.
    """
    sgn = _sign(sign)
    lam = np.asarray(lam, dtype=complex)
    mu = exponents(ctx, lam)
    M, Mp, Mm, s = scaled_char_matrices(ctx, lam, mu)
    _check_delta(M, Mp, Mm)
    row = ctx.first_row(r)
    # the unscaled row, formed directly so an underflowed s never divides
    P, Q = form_parts(ctx, mu)
    v = P[..., row, :] if sgn > 0 else np.exp(-1j * mu[..., row, None]) * Q[..., row, :]
    K = np.linalg.solve(np.swapaxes(M, -1, -2), v[..., None])[..., 0]
    _, nup = _nu_parts(ctx, r, lam, mu)
    return (sgn * nup / (2 * np.pi))[..., None] * K, mu, s


def _scaled_products(ctx: CharacteristicContext, phi, mu: np.ndarray) -> np.ndarray:
    out = np.empty(mu.shape, dtype=complex)
    for j in range(ctx.N):
        out[..., j] = phi.scaled_transform(mu[..., j], ctx.row_interval(j))
    return out


def forward_pm(ctx: CharacteristicContext, phi, lam, sign, r: int = 0):
    """``F_r^+-[phi](lam)`` (vectorised over ``lam``)."""
    if phi.m != ctx.m:
        raise ValidationError(f"datum has {phi.m} intervals, operator has {ctx.m}")
    K, mu, _ = kernel_coefficients(ctx, lam, sign, r)
    return np.sum(K * _scaled_products(ctx, phi, mu), axis=-1)


def forward_both(ctx: CharacteristicContext, phi, lam, r: int = 0):
    """``(F_r^+, F_r^-)``."""
    return forward_pm(ctx, phi, lam, 1, r), forward_pm(ctx, phi, lam, -1, r)


def forward(ctx: CharacteristicContext, phi, lam, tag: str) -> np.ndarray:
    """The ``m``-vector ``(F_1, ..., F_m)`` with the branch chosen by the contour tag."""
    sgn = sign_for_tag(tag)
    lam = np.asarray(lam, dtype=complex)
    return np.stack([forward_pm(ctx, phi, lam, sgn, r) for r in range(ctx.m)], axis=-1)


def kernel_psi(ctx: CharacteristicContext, x, lam: complex, sign, r: int = 0) -> np.ndarray:
    """``psi_u(x; lam, r)`` for every interval ``u``: array of shape ``x.shape + (m,)``.

    ``<phi, psi> = F_r^+-[phi](lam)`` with the inner product summed over intervals.
    """
    x = np.asarray(x, dtype=float)
    K, mu, s = kernel_coefficients(ctx, complex(lam), sign, r)
    conj_psi = np.zeros(x.shape + (ctx.m,), dtype=complex)
    for j in range(ctx.N):
        u = ctx.row_interval(j)
        conj_psi[..., u] += K[j] * np.exp(-1j * mu[j] * x - np.maximum(0.0, mu[j].imag))
    return conj_psi.conj()


def remainder_polynomial(ctx: CharacteristicContext, phi, lam, sign, r: int = 0):
    """``P_r^+-[phi](lam)``: polynomially bounded, built from ``B_c phi``."""
    sgn = _sign(sign)
    lam = np.asarray(lam, dtype=complex)
    mu = exponents(ctx, lam)
    row = ctx.first_row(r)
    bc = ctx.comp_matrix @ traces(phi, ctx.op.orders)
    nu, nup = _nu_parts(ctx, r, lam, mu)
    # unscaled polynomial parts, so the value stays finite where exp(-i nu) overflows
    P, Q = form_parts(ctx, mu)
    v = (P if sgn > 0 else Q)[..., row, :]
    return sgn * nup / (2 * np.pi) * (v @ bc)


def remainder_transform(ctx: CharacteristicContext, phi, lam, tag, r: int = 0):
    """``R_r[phi](lam)``: ``P^+`` on plus contours and ``exp(-i nu_r) P^-`` on minus contours."""
    sgn = _sign(tag)
    P = remainder_polynomial(ctx, phi, lam, sgn, r)
    if sgn > 0:
        return P
    nu = ctx.nu(r, np.asarray(lam, dtype=complex))
    return np.exp(-1j * nu) * P


def inhomogeneous_boundary_term(ctx: CharacteristicContext, h, lam, tag, r: int = 0):
    """``H_r[h](lam) = h (.) B*_c psi^+-(.; lam, r)`` (vectorised over ``lam``; ``h`` has ``N`` entries)."""
    h = np.asarray(h, dtype=complex)
    if h.shape[-1] != ctx.N:
        raise ValidationError(f"boundary data needs {ctx.N} entries")
    K, mu, _ = kernel_coefficients(ctx, lam, tag, r)
    _, Cp, Cm, _ = scaled_char_matrices(ctx, np.asarray(lam, dtype=complex), mu,
                                        left=ctx.adjc_left, right=ctx.adjc_right)
    Mc = Cp + Cm  # rows: conj(B*_c,k) applied to s_j exp(-i mu_j x)
    return np.einsum("...j,...jk,...k->...", K, Mc, h)


def diag_identity_residual(ctx: CharacteristicContext, phi, lam, tag, r: int = 0, h=None, tol: float = 1e-8):
    """``F[L phi] - lam^n F[phi] - R[phi] - H[B phi]``.

    Without ``h`` the datum must satisfy ``B phi = 0`` (else
    :class:`NotInDomain`); with ``h`` it must satisfy ``B phi = h``.
    """
    lam = np.asarray(lam, dtype=complex)
    bphi = ctx.pkg.boundary.apply(phi)
    target = np.zeros(ctx.N) if h is None else np.asarray(h, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(traces(phi, ctx.op.orders)))))
    if np.max(np.abs(bphi - target)) > tol * scale:
        raise NotInDomain("datum does not satisfy the boundary conditions")
    Lphi = apply_operator(ctx, phi)
    out = forward_pm(ctx, Lphi, lam, tag, r) - lam ** ctx.n * forward_pm(ctx, phi, lam, tag, r)
    out = out - remainder_transform(ctx, phi, lam, tag, r)
    if h is not None:
        out = out - inhomogeneous_boundary_term(ctx, bphi, lam, tag, r)
    return out
