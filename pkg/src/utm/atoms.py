"""Piecewise exponential-polynomial functions on copies of [0, 1].

Each interval carries a short list of terms ``P(x) exp(kappa x)``.  This
covers polynomials, ``sin``/``cos`` of ``k pi x`` and exponentials, and it is
closed under differentiation, so endpoint derivatives and moments
``int_0^1 phi(x) exp(-i mu x) dx`` are available in closed form.
:class:`SampledAtom` holds Chebyshev interpolants for data with no closed form.
"""

from __future__ import annotations

from functools import lru_cache

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import ValidationError

__all__ = [
    "Term",
    "FunctionAtom",
    "SampledAtom",
    "moments",
    "scaled_moments",
    "apply_dispersion",
]


@dataclass(frozen=True)
class Term:
    """``sum_p coeffs[p] x**p * exp(kappa x)``."""

    coeffs: tuple[complex, ...]
    kappa: complex = 0j

    def __post_init__(self) -> None:
        c = tuple(complex(v) for v in self.coeffs) or (0j,)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "kappa", complex(self.kappa))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = np.polynomial.polynomial.polyval(x, np.array(self.coeffs))
        return p * np.exp(self.kappa * x) if self.kappa != 0 else p + 0j

    def derivative(self) -> "Term":
        c = np.array(self.coeffs)
        d = c[1:] * np.arange(1, len(c)) if len(c) > 1 else np.zeros(1, complex)
        out = self.kappa * c
        out[: len(d)] += d
        return Term(tuple(out), self.kappa)


def _merge(terms: Sequence[Term]) -> tuple[Term, ...]:
    by_kappa: dict[complex, np.ndarray] = {}
    for t in terms:
        c = np.array(t.coeffs)
        if t.kappa in by_kappa:
            a = by_kappa[t.kappa]
            size = max(len(a), len(c))
            a = np.pad(a, (0, size - len(a))) + np.pad(c, (0, size - len(c)))
            by_kappa[t.kappa] = a
        else:
            by_kappa[t.kappa] = c
    out = []
    for k, c in by_kappa.items():
        nz = np.flatnonzero(c)
        if nz.size:
            out.append(Term(tuple(c[: nz[-1] + 1]), k))
    return tuple(out)


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1), 0.5 * w


def moments(mu, pmax: int) -> np.ndarray:
    """``I_p(mu) = int_0^1 x**p exp(-i mu x) dx`` for ``p = 0..pmax``; shape ``(pmax+1,) + mu.shape``."""
    return scaled_moments(mu, pmax, scaled=False)


def scaled_moments(mu, pmax: int, scaled: bool = True) -> np.ndarray:
    """Moments multiplied by ``s(mu) = 1 / max(1, |exp(-i mu)|)``.

    The scaling keeps values bounded when ``Im mu`` is large and positive.
    Small ``|mu|`` uses Gauss-Legendre, large ``|mu|`` the forward recurrence
    ``I_p = exp(-i mu)/(-i mu) + (p/(i mu)) I_{p-1}``, which is stable there.
    """
    mu = np.asarray(mu, dtype=complex)
    shape = mu.shape
    flat = mu.ravel()
    shift = np.maximum(0.0, flat.imag) if scaled else np.zeros(flat.shape)
    out = np.empty((pmax + 1, flat.size), dtype=complex)
    thresh = max(25.0, 2.0 * pmax)
    small = np.abs(flat) < thresh
    if small.any():
        x, w = _gl(64 + int(2 * thresh))
        ms = flat[small]
        e = np.exp(-1j * np.outer(ms, x) - shift[small, None]) * w
        powers = x[None, :] ** np.arange(pmax + 1)[:, None]
        out[:, small] = powers @ e.T
    big = ~small
    if big.any():
        mb = flat[big]
        eb = np.exp(-1j * mb - shift[big])
        sb = np.exp(-shift[big])
        cur = (sb - eb) / (1j * mb)
        out[0, big] = cur
        for p in range(1, pmax + 1):
            cur = eb / (-1j * mb) + (p / (1j * mb)) * cur
            out[p, big] = cur
    return out.reshape((pmax + 1,) + shape)


@dataclass(frozen=True)
class FunctionAtom:
    """A function on each of ``m`` copies of [0, 1], as exponential-polynomial terms."""

    pieces: tuple[tuple[Term, ...], ...]

    def __post_init__(self) -> None:
        if len(self.pieces) == 0:
            raise ValidationError("an atom needs at least one interval")
        object.__setattr__(self, "pieces", tuple(_merge(list(p)) for p in self.pieces))

    # constructors -------------------------------------------------------
    @classmethod
    def polynomial(cls, *coeff_lists: Sequence[complex]) -> "FunctionAtom":
        """One ascending coefficient list per interval."""
        return cls(tuple((Term(tuple(c)),) for c in coeff_lists))

    @classmethod
    def zero(cls, m: int = 1) -> "FunctionAtom":
        return cls(tuple(() for _ in range(m)))

    @classmethod
    def exponential(cls, kappa: complex, coeffs: Sequence[complex] = (1.0,)) -> "FunctionAtom":
        return cls(((Term(tuple(coeffs), kappa),),))

    @classmethod
    def sin_pi(cls, k: float = 1.0, amplitude: complex = 1.0) -> "FunctionAtom":
        """``amplitude * sin(k pi x)``."""
        a = complex(amplitude) / 2j
        return cls(((Term((a,), 1j * np.pi * k), Term((-a,), -1j * np.pi * k)),))

    @classmethod
    def cos_pi(cls, k: float = 1.0, amplitude: complex = 1.0) -> "FunctionAtom":
        a = complex(amplitude) / 2
        return cls(((Term((a,), 1j * np.pi * k), Term((a,), -1j * np.pi * k)),))

    @classmethod
    def stack(cls, atoms: Sequence["FunctionAtom"]) -> "FunctionAtom":
        """Join single-interval atoms into one multi-interval atom."""
        return cls(tuple(p for a in atoms for p in a.pieces))

    # structure ----------------------------------------------------------
    @property
    def m(self) -> int:
        return len(self.pieces)

    @property
    def is_zero(self) -> bool:
        return all(len(p) == 0 for p in self.pieces)

    def interval(self, r: int) -> "FunctionAtom":
        return FunctionAtom((self.pieces[r],))

    def __call__(self, x, r: int = 0):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=complex)
        for t in self.pieces[r]:
            out = out + t(x)
        return out

    def derivative(self, k: int = 1) -> "FunctionAtom":
        pieces = self.pieces
        for _ in range(k):
            pieces = tuple(tuple(t.derivative() for t in p) for p in pieces)
        return FunctionAtom(pieces)

    def __add__(self, other: "FunctionAtom") -> "FunctionAtom":
        if other.m != self.m:
            raise ValidationError("interval counts differ")
        return FunctionAtom(tuple(a + b for a, b in zip(self.pieces, other.pieces)))

    def scale(self, c: complex) -> "FunctionAtom":
        return FunctionAtom(tuple(tuple(Term(tuple(complex(c) * np.array(t.coeffs)), t.kappa) for t in p)
                                  for p in self.pieces))

    def __neg__(self) -> "FunctionAtom":
        return self.scale(-1.0)

    def __sub__(self, other: "FunctionAtom") -> "FunctionAtom":
        return self + (-other)

    def jets(self, r: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        """``(phi(0), ..., phi^(n-1)(0))`` and the same at 1 on interval ``r``."""
        left = np.empty(n, dtype=complex)
        right = np.empty(n, dtype=complex)
        d = self.interval(r)
        for k in range(n):
            left[k] = d(0.0)
            right[k] = d(1.0)
            d = d.derivative()
        return left, right

    def scaled_transform(self, mu, r: int) -> np.ndarray:
        """``s(mu) int_0^1 phi_r(x) exp(-i mu x) dx`` with ``s`` as in :func:`scaled_moments`."""
        mu = np.asarray(mu, dtype=complex)
        out = np.zeros(mu.shape, dtype=complex)
        base = np.maximum(0.0, mu.imag)
        for t in self.pieces[r]:
            shifted = mu + 1j * t.kappa
            mom = scaled_moments(shifted, len(t.coeffs) - 1)
            fix = np.exp(np.maximum(0.0, shifted.imag) - base)
            out = out + fix * np.tensordot(np.array(t.coeffs), mom, axes=(0, 0))
        return out

    def transform(self, mu, r: int) -> np.ndarray:
        """``int_0^1 phi_r(x) exp(-i mu x) dx``."""
        mu = np.asarray(mu, dtype=complex)
        return self.scaled_transform(mu, r) * np.exp(np.maximum(0.0, mu.imag))


def apply_dispersion(low_coeffs: Sequence[complex], degree: int, atom: FunctionAtom) -> FunctionAtom:
    """``omega(-i d/dx) atom`` for ``omega(k) = k**degree + sum low_coeffs[j] k**j``."""
    coeffs = list(low_coeffs) + [0.0] * (degree - 1 - len(low_coeffs)) + [0.0, 1.0]
    out = FunctionAtom.zero(atom.m)
    d = atom
    for j, c in enumerate(coeffs):
        if c != 0:
            out = out + d.scale(complex(c) * (-1j) ** j)
        d = d.derivative()
    return out


@dataclass(frozen=True)
class SampledAtom:
    """Chebyshev interpolant on each interval (values at Chebyshev points of [0, 1]).

    ``error_bound`` is the magnitude of the trailing coefficients, a standard
    a-posteriori estimate of the interpolation error.
    """

    cheb: tuple[np.ndarray, ...]
    error_bound: float = 0.0

    @classmethod
    def from_function(cls, funcs, degree: int = 32) -> "SampledAtom":
        if callable(funcs):
            funcs = [funcs]
        xs = 0.5 * (1 - np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1)))
        coeffs = []
        err = 0.0
        for f in funcs:
            c = C.chebfit(2 * xs - 1, np.asarray(f(xs), dtype=complex), degree)
            coeffs.append(c)
            err = max(err, float(np.abs(c[-3:]).sum()))
        return cls(tuple(coeffs), err)

    @classmethod
    def from_samples(cls, values: Sequence[np.ndarray]) -> "SampledAtom":
        """Values at the Chebyshev points ``0.5(1 - cos(pi (k+1/2)/(d+1)))``."""
        out = []
        err = 0.0
        for v in values:
            v = np.asarray(v, dtype=complex)
            d = len(v) - 1
            xs = 0.5 * (1 - np.cos(np.pi * (np.arange(d + 1) + 0.5) / (d + 1)))
            c = C.chebfit(2 * xs - 1, v, d)
            out.append(c)
            err = max(err, float(np.abs(c[-3:]).sum()))
        return cls(tuple(out), err)

    @property
    def m(self) -> int:
        return len(self.cheb)

    @property
    def is_zero(self) -> bool:
        return all(not np.any(c) for c in self.cheb)

    def __call__(self, x, r: int = 0):
        return C.chebval(2 * np.asarray(x, dtype=float) - 1, self.cheb[r])

    def derivative(self, k: int = 1) -> "SampledAtom":
        return SampledAtom(tuple(C.chebder(c, k) * 2.0**k if len(c) > k else np.zeros(1, complex)
                                 for c in self.cheb), self.error_bound)

    def jets(self, r: int, n: int) -> tuple[np.ndarray, np.ndarray]:
        left = np.empty(n, dtype=complex)
        right = np.empty(n, dtype=complex)
        c = self.cheb[r]
        for k in range(n):
            left[k] = C.chebval(-1.0, c)
            right[k] = C.chebval(1.0, c)
            c = C.chebder(c) * 2.0 if len(c) > 1 else np.zeros(1, complex)
        return left, right

    def scaled_transform(self, mu, r: int) -> np.ndarray:
        # Gauss panels with node count growing with |mu|
        mu = np.asarray(mu, dtype=complex)
        flat = mu.ravel()
        panels = int(np.clip(np.ceil(np.max(np.abs(flat), initial=1.0) / 8.0), 2, 4096))
        x, w = _gl(24)
        edges = np.linspace(0.0, 1.0, panels + 1)
        xs = (edges[:-1, None] + np.diff(edges)[:, None] * x[None, :]).ravel()
        ws = (np.diff(edges)[:, None] * w[None, :]).ravel()
        vals = self(xs, r) * ws
        shift = np.maximum(0.0, flat.imag)
        out = np.exp(-1j * np.outer(flat, xs) - shift[:, None]) @ vals
        return out.reshape(mu.shape)

    def transform(self, mu, r: int) -> np.ndarray:
        mu = np.asarray(mu, dtype=complex)
        return self.scaled_transform(mu, r) * np.exp(np.maximum(0.0, mu.imag))
