"""Dispersion polynomials and the large-|lambda| inverse branch.

A dispersion polynomial is monic with a vanishing subleading coefficient,
``omega(k) = k**n + sum_{j <= n-2} c_j k**j``.  Outside a disc the equation
``omega(nu) = lambda**n`` has a unique solution with ``nu / lambda -> 1``;
:func:`branch_eval` computes it by Newton's method.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DerivativeSingular, NoConvergence, OutsideDomain, ValidationError

__all__ = [
    "MonicPolynomial",
    "NuBranch",
    "schwarz_conjugate",
    "estimate_domain_radius",
    "conservative_radius",
    "make_branch",
    "branch_eval",
    "branch_derivative",
    "branch_rotated",
    "inverse_map",
]


@dataclass(frozen=True)
class MonicPolynomial:
    """``k**n + c_{n-2} k**(n-2) + ... + c_0``; only ``c_0..c_{n-2}`` are stored."""

    degree: int
    low_coeffs: tuple[complex, ...] = ()

    def __post_init__(self) -> None:
        if int(self.degree) != self.degree or self.degree < 2:
            raise ValidationError(f"degree must be an integer >= 2, got {self.degree!r}")
        low = tuple(complex(c) for c in self.low_coeffs)
        if len(low) == 0:
            low = (0j,) * (self.degree - 1)
        if len(low) != self.degree - 1:
            raise ValidationError(
                f"expected {self.degree - 1} low coefficients c_0..c_{self.degree - 2}, got {len(low)}"
            )
        if not all(np.isfinite(c) for c in low):
            raise ValidationError("coefficients must be finite")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "low_coeffs", low)

    @classmethod
    def monomial(cls, n: int) -> "MonicPolynomial":
        return cls(n, (0j,) * (n - 1))

    @property
    def coeffs(self) -> np.ndarray:
        """Ascending coefficients ``c_0..c_n`` including the implied ones."""
        return np.array(list(self.low_coeffs) + [0.0, 1.0], dtype=complex)

    @property
    def is_monomial(self) -> bool:
        return all(c == 0 for c in self.low_coeffs)

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.low_coeffs)

    def __call__(self, k):
        k = np.asarray(k, dtype=complex)
        out = np.ones_like(k)
        for c in self.coeffs[-2::-1]:
            out = out * k + c
        return out

    def derivative(self, k):
        k = np.asarray(k, dtype=complex)
        c = self.coeffs
        d = c[1:] * np.arange(1, len(c))
        out = np.full_like(k, d[-1])
        for cj in d[-2::-1]:
            out = out * k + cj
        return out


def schwarz_conjugate(p: MonicPolynomial) -> MonicPolynomial:
    """Polynomial whose coefficients are the complex conjugates of ``p``'s."""
    return MonicPolynomial(p.degree, tuple(np.conj(p.low_coeffs)))


def _coefficient_sums(omega: MonicPolynomial, r: float) -> tuple[float, float]:
    """Bounds ``sum |c_j| r^(j-n)`` and ``sum (n-j)|c_j| r^(j-n)`` on ``|nu| = r``."""
    n = omega.degree
    j = np.arange(n - 1)
    a = np.abs(np.array(omega.low_coeffs))
    w = a * r ** (j - n)
    return float(w.sum()), float(((n - j) * w).sum())


def _derivative_bound(omega: MonicPolynomial, r: float) -> float:
    # |lambda'(nu) - 1| for lambda(nu) = nu (1 + g(nu))^(1/n) with |g| <= G.
    n = omega.degree
    g, h = _coefficient_sums(omega, r)
    if g >= 1.0:
        return np.inf
    return (1.0 - (1.0 - g) ** (1.0 / n)) + (1.0 - g) ** ((1.0 - n) / n) * h / n


def conservative_radius(omega: MonicPolynomial) -> float:
    """Radius from the near-identity argument, no numerical probing.

    The nu-radius is the smallest ``r >= max(1, sum|c_j|)`` with
    ``|lambda'(nu) - 1| <= 1/pi`` on ``|nu| >= r``; it is mapped to a
    lambda-radius through ``|lambda| <= r (1 + G(r))^(1/n)``.
    """
    if omega.is_monomial:
        return 1.0
    n = omega.degree
    lo = max(1.0, float(np.abs(omega.low_coeffs).sum()))
    if _derivative_bound(omega, lo) > 1.0 / np.pi:
        hi = 2.0 * lo
        while _derivative_bound(omega, hi) > 1.0 / np.pi:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if _derivative_bound(omega, mid) > 1.0 / np.pi:
                lo = mid
            else:
                hi = mid
        lo = hi
    g, _ = _coefficient_sums(omega, lo)
    return lo * (1.0 + g) ** (1.0 / n)


@dataclass(frozen=True)
class NuBranch:
    """Evaluable branch ``nu`` with ``omega(nu(lam)) = lam**n`` and ``nu/lam -> 1``.

    ``safe_radius`` is the radius beyond which Newton seeded at ``lam`` is
    guaranteed; between ``domain_radius`` and ``safe_radius`` values are
    obtained by continuation along the ray.
    """

    omega: MonicPolynomial
    domain_radius: float
    newton_tol: float = 1e-13
    max_iter: int = 60
    safe_radius: float = field(default=0.0)

    def __post_init__(self) -> None:
        if not self.domain_radius > 0:
            raise ValidationError("domain_radius must be positive")
        if self.safe_radius <= 0:
            object.__setattr__(self, "safe_radius", max(conservative_radius(self.omega), self.domain_radius))

    @property
    def degree(self) -> int:
        return self.omega.degree


def _newton(omega: MonicPolynomial, target: np.ndarray, seed: np.ndarray, max_iter: int) -> np.ndarray:
    nu = seed.astype(complex).copy()
    active = np.ones(nu.shape, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        v = nu[active]
        step = (omega(v) - target[active]) / omega.derivative(v)
        nu[active] = v - step
        done = np.abs(step) <= 1e-15 * np.maximum(np.abs(v), 1.0)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    # one polishing step everywhere: cheap, and removes the last rounding
    step = (omega(nu) - target) / omega.derivative(nu)
    return nu - np.where(np.isfinite(step), step, 0)


def _residual_ok(branch: NuBranch, lam: np.ndarray, nu: np.ndarray) -> np.ndarray:
    n = branch.degree
    res = np.abs(branch.omega(nu) - lam**n)
    return np.isfinite(nu) & (res <= branch.newton_tol * np.maximum(1.0, np.abs(lam) ** n) * 10)


def _continuation(branch: NuBranch, lam: np.ndarray, start_radius: np.ndarray) -> np.ndarray:
    """Walk Newton inward along each ray from ``start_radius`` to ``|lam|``."""
    n = branch.degree
    mod = np.abs(lam)
    direction = lam / mod
    ratio = np.clip(mod / start_radius, 1e-300, 1.0)
    steps = max(1, int(np.ceil(np.max(np.log(ratio) / np.log(0.9)))))
    cur = direction * start_radius
    nu = _newton(branch.omega, cur**n, cur, branch.max_iter)
    for k in range(1, steps + 1):
        nxt = direction * start_radius * ratio ** (k / steps)
        nu = _newton(branch.omega, nxt**n, nu, branch.max_iter)
    return nu


def branch_eval(branch: NuBranch, lam, *, check_domain: bool = True):
    """Value of the branch at ``lam`` (scalar or array).

    Raises :class:`OutsideDomain` if any ``|lam| <= domain_radius`` and
    :class:`NoConvergence` if Newton fails.
    """
    lam_arr = np.asarray(lam, dtype=complex)
    scalar = lam_arr.ndim == 0
    lam_arr = np.atleast_1d(lam_arr)
    if branch.omega.is_monomial:
        out = lam_arr.copy()
        return out[0] if scalar else out
    mod = np.abs(lam_arr)
    if check_domain and np.any(mod <= branch.domain_radius):
        raise OutsideDomain(
            f"|lambda| = {mod.min():.6g} is not beyond the branch radius {branch.domain_radius:.6g}"
        )
    n = branch.degree
    out = np.empty_like(lam_arr)
    far = mod >= branch.safe_radius
    if far.any():
        out[far] = _newton(branch.omega, lam_arr[far] ** n, lam_arr[far], branch.max_iter)
    near = ~far
    if near.any():
        out[near] = _continuation(branch, lam_arr[near], np.full(near.sum(), branch.safe_radius))
    bad = ~_residual_ok(branch, lam_arr, out)
    bad |= far & (np.abs(out / lam_arr - 1.0) >= 1.0)
    if bad.any():
        # homotopy fallback from a point twice as far out
        out[bad] = _continuation(branch, lam_arr[bad], np.maximum(2.0 * mod[bad], 2.0 * branch.safe_radius))
        still = ~_residual_ok(branch, lam_arr[bad], out[bad])
        if still.any():
            raise NoConvergence(f"branch Newton failed at {lam_arr[bad][still][:3]}")
    return out[0] if scalar else out


def branch_derivative(branch: NuBranch, lam, *, nu=None):
    """``n lam^(n-1) / omega'(nu(lam))``."""
    lam_arr = np.asarray(lam, dtype=complex)
    if branch.omega.is_monomial:
        one = np.ones_like(lam_arr)
        return one[()] if one.ndim == 0 else one
    if nu is None:
        nu = branch_eval(branch, lam_arr)
    n = branch.degree
    d = branch.omega.derivative(nu)
    if np.any(np.abs(d) <= 1e-12 * n * np.maximum(np.abs(lam_arr), 1.0) ** (n - 1)):
        raise DerivativeSingular("omega'(nu) vanishes: the branch radius is too small")
    return n * lam_arr ** (n - 1) / d


def branch_rotated(branch: NuBranch, j: int, lam):
    """``nu(alpha^(j-1) lam)`` with ``alpha = exp(2 pi i / n)``."""
    alpha = np.exp(2j * np.pi / branch.degree)
    return branch_eval(branch, alpha ** (j - 1) * np.asarray(lam, dtype=complex))


def inverse_map(omega: MonicPolynomial, nu):
    """``lambda(nu) = nu (omega(nu)/nu^n)^(1/n)`` with the principal root (large |nu|)."""
    nu = np.asarray(nu, dtype=complex)
    return nu * (omega(nu) / nu**omega.degree) ** (1.0 / omega.degree)


def _critical_radius(omega: MonicPolynomial) -> float:
    """``max |omega(k_c)|^(1/n)`` over critical points of ``omega``."""
    c = omega.coeffs
    d = c[1:] * np.arange(1, len(c))
    crit = np.roots(d[::-1])
    if crit.size == 0:
        return 0.0
    return float(np.max(np.abs(omega(crit))) ** (1.0 / omega.degree))


def _radius_passes(omega: MonicPolynomial, radius: float, safe: float, samples: int = 512) -> bool:
    trial = NuBranch(omega, radius, safe_radius=safe)
    n = omega.degree
    theta = 2 * np.pi * np.arange(samples) / samples
    lam = radius * 1.0001 * np.exp(1j * theta)
    try:
        nu = branch_eval(trial, lam)
    except (NoConvergence, OutsideDomain):
        return False
    closed = np.append(nu, nu[0])
    jumps = np.abs(np.diff(closed))
    spacing = np.abs(lam[1] - lam[0])
    if jumps.max() > 10 * spacing * max(1.0, np.abs(branch_derivative(trial, lam, nu=nu)).max()):
        return False
    winding = np.round(np.sum(np.angle(closed[1:] / closed[:-1])) / (2 * np.pi))
    if winding != 1:
        return False
    if np.min(np.abs(omega.derivative(nu))) < 1e-6 * n * radius ** (n - 1):
        return False
    # distinct values on each fibre lam^n = const, otherwise nu is not injective
    shift = samples // n
    for k in range(1, n):
        if np.min(np.abs(np.roll(nu, -k * shift) - nu)) < 1e-8 * radius:
            return False
    return True


def estimate_domain_radius(omega: MonicPolynomial, tighten: bool = True) -> float:
    """Radius outside which the branch is used.

    Without ``tighten`` this is :func:`conservative_radius`.  With it, the
    radius starts at 1.05 times the largest critical value modulus and grows
    by 10% until a sampled validation (residual, continuity, winding number,
    fibre injectivity) passes, never exceeding the conservative value.
    """
    safe = conservative_radius(omega)
    if omega.is_monomial or not tighten:
        return safe
    cand = max(1.05 * _critical_radius(omega), 1e-3 * safe)
    while cand < safe:
        if _radius_passes(omega, cand, safe):
            return cand
        cand *= 1.1
    return safe


def make_branch(omega: MonicPolynomial, *, tighten: bool = True, newton_tol: float = 1e-13,
                max_iter: int = 60) -> NuBranch:
    radius = estimate_domain_radius(omega, tighten=tighten)
    return NuBranch(omega, radius, newton_tol=newton_tol, max_iter=max_iter,
                    safe_radius=max(conservative_radius(omega), radius))


def poly_from_sequence(coeffs: Sequence[complex]) -> MonicPolynomial:
    """Build from the full ascending coefficient list ``c_0..c_n`` (checks ``c_n=1, c_{n-1}=0``)."""
    c = [complex(x) for x in coeffs]
    if len(c) < 3 or c[-1] != 1 or c[-2] != 0:
        raise ValidationError("full coefficient list must end with (..., 0, 1)")
    return MonicPolynomial(len(c) - 1, tuple(c[:-2]))
