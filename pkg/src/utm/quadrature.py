"""Contour quadrature on contour pieces, joint principal values and time convolutions.

Every piece is integrated with composite Gauss-Legendre panels (open arcs,
segments, curves) or the trapezoid rule (closed circles).  Panel lengths
follow a caller supplied rate ``rate(lam)``, the local number of radians
of oscillation or decay per unit ``|d lam|``.  Panels never straddle a
radius of the truncation schedule, so each node belongs to one shell
``rho_{k-1} < |lam| <= rho_k`` and all truncated integrals come out of a
single integrand evaluation.
"""

from __future__ import annotations

from functools import lru_cache

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .atoms import FunctionAtom, scaled_moments
from .contours import Arc, ContourSet, Curve, Line, truncate
from .errors import BudgetExceeded, NonConvergentPV, OverflowGuard, ValidationError

__all__ = [
    "QuadratureConfig",
    "QuadratureReport",
    "NodeSet",
    "piece_nodes",
    "contour_nodes",
    "contour_quad",
    "joint_principal_value",
    "pv_trace",
    "time_convolution",
    "convolution_parts",
    "convolution_poles",
    "SAFE_EXPONENT",
]

SAFE_EXPONENT = 700.0


@dataclass(frozen=True)
class QuadratureConfig:
    panel_order: int = 16
    panel_length: float = 1.5  # radians of variation per panel
    circle_nodes: int = 64
    tol: float = 1e-12
    max_rounds: int = 6
    max_nodes: int = 4_000_000
    threads: int = 1


@dataclass(frozen=True)
class QuadratureReport:
    value: complex | np.ndarray
    error_estimate: float
    nodes_used: int
    trace: tuple = field(default=(), repr=False)  # (rho, partial value) pairs


@dataclass(frozen=True)
class NodeSet:
    """Quadrature nodes ``lam`` with weights ``dlam`` and shell indices."""

    lam: np.ndarray
    weight: np.ndarray
    shell: np.ndarray

    @staticmethod
    def empty() -> "NodeSet":
        return NodeSet(np.zeros(0, complex), np.zeros(0, complex), np.zeros(0, int))

    @staticmethod
    def concat(sets: Sequence["NodeSet"]) -> "NodeSet":
        if not sets:
            return NodeSet.empty()
        return NodeSet(np.concatenate([s.lam for s in sets]), np.concatenate([s.weight for s in sets]),
                       np.concatenate([s.shell for s in sets]))

    def __len__(self) -> int:
        return self.lam.size


@lru_cache(maxsize=64)
def _gl(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def _param(piece):
    """``(a, b, point, derivative)``: the piece is traversed as ``s`` runs from ``a`` to ``b``."""
    if isinstance(piece, Arc):
        return 0.0, 1.0, piece.point, piece.derivative
    if isinstance(piece, Line):
        if not np.isfinite(piece.length):
            raise ValidationError("infinite piece: truncate before integrating")
        a, b = (piece.length, 0.0) if piece.reverse else (0.0, piece.length)
        return a, b, piece.point, piece.derivative
    if isinstance(piece, Curve):
        if not (np.isfinite(piece.s0) and np.isfinite(piece.s1)):
            raise ValidationError("infinite piece: truncate before integrating")
        return piece.s0, piece.s1, piece.point, piece.derivative
    raise ValidationError(f"unknown piece type {type(piece).__name__}")


def _shells(lam: np.ndarray, radii: np.ndarray) -> np.ndarray:
    return np.searchsorted(radii, np.abs(lam) * (1 - 1e-13), side="left")


def _radius_crossings(point, a: float, b: float, radii: np.ndarray, samples: int = 257) -> list[float]:
    """Parameters in ``(a, b)`` where ``|point(s)|`` crosses a schedule radius."""
    if radii.size == 0:
        return []
    s = np.linspace(a, b, samples)
    mod = np.abs(point(s))
    out = []
    for rho in radii:
        side = mod > rho
        for i in np.flatnonzero(side[1:] != side[:-1]):
            lo, hi = s[i], s[i + 1]
            slo = side[i]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if (abs(point(np.array([mid]))[0]) > rho) == slo:
                    lo = mid
                else:
                    hi = mid
            out.append(0.5 * (lo + hi))
    return out


def piece_nodes(piece, rate: Callable | None = None, radii: Sequence[float] = (),
                cfg: QuadratureConfig = QuadratureConfig(), refine: int = 0) -> NodeSet:
    """Nodes and signed weights for one finite piece.

    ``refine`` halves every panel (or doubles the trapezoid count) that many times.
    """
    radii = np.sort(np.asarray(radii, dtype=float))
    a, b, point, deriv = _param(piece)
    rate = rate or (lambda z: np.ones(np.shape(z)))
    if isinstance(piece, Arc) and piece.closed:
        probe = piece.point(np.linspace(0, 1, 65)[:-1])
        work = np.max(np.maximum(1.0, rate(probe))) * piece.length / cfg.panel_length
        k = int(max(cfg.circle_nodes, 4 * np.ceil(work))) << refine
        u = np.arange(k) / k
        lam = piece.point(u)
        return NodeSet(lam, piece.derivative(u) / k, _shells(lam, radii))
    if a == b:
        return NodeSet.empty()
    # cumulative work along the piece decides the panel breaks
    s = np.linspace(a, b, 1025)
    speed = np.abs(deriv(s)) * np.maximum(1.0, rate(point(s)))
    work = np.concatenate([[0.0], np.cumsum(0.5 * (speed[1:] + speed[:-1]) * np.abs(np.diff(s)))])
    panels = max(2, int(np.ceil(work[-1] / cfg.panel_length))) << refine
    breaks = np.interp(np.linspace(0, work[-1], panels + 1), work, s) if work[-1] > 0 else np.linspace(a, b, panels + 1)
    breaks = np.concatenate([breaks, _radius_crossings(point, a, b, radii)])
    breaks = np.unique(breaks)
    if b < a:
        breaks = breaks[::-1]
    x, w = _gl(cfg.panel_order)
    lo, hi = breaks[:-1], breaks[1:]
    keep = np.abs(hi - lo) > 1e-15 * max(1.0, abs(b - a))
    lo, hi = lo[keep], hi[keep]
    sn = (lo[:, None] + (hi - lo)[:, None] * x[None, :]).ravel()
    wn = ((hi - lo)[:, None] * w[None, :]).ravel()
    lam = point(sn)
    mids = point(0.5 * (lo + hi))
    shell = np.repeat(_shells(mids, radii), cfg.panel_order)
    return NodeSet(lam, wn * deriv(sn), shell)


def contour_nodes(pieces: Sequence, rate: Callable | None = None, radii: Sequence[float] = (),
                  cfg: QuadratureConfig = QuadratureConfig(), refine: int = 0) -> NodeSet:
    """Concatenated :func:`piece_nodes` in piece order (deterministic)."""
    if cfg.threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            sets = list(ex.map(lambda p: piece_nodes(p, rate, radii, cfg, refine), pieces))
    else:
        sets = [piece_nodes(p, rate, radii, cfg, refine) for p in pieces]
    out = NodeSet.concat(sets)
    if len(out) > cfg.max_nodes:
        raise BudgetExceeded(f"{len(out)} quadrature nodes exceed the budget of {cfg.max_nodes}")
    return out


def _apply(integrand: Callable, nodes: NodeSet):
    if len(nodes) == 0:
        return None
    vals = np.asarray(integrand(nodes.lam), dtype=complex)
    if vals.shape[0] != len(nodes):
        raise ValidationError("integrand must return one row per node")
    if not np.all(np.isfinite(vals)):
        raise ValidationError("integrand is not finite on the contour")
    w = nodes.weight.reshape((-1,) + (1,) * (vals.ndim - 1))
    return vals * w


def contour_quad(integrand: Callable, piece, tol: float = 1e-12, rate: Callable | None = None,
                 cfg: QuadratureConfig = QuadratureConfig()) -> QuadratureReport:
    """Integral of ``integrand`` over one finite piece, refined until two levels agree to ``tol``."""
    prev = None
    used = 0
    for level in range(cfg.max_rounds + 1):
        nodes = piece_nodes(piece, rate, (), cfg, refine=level)
        used += len(nodes)
        if used > cfg.max_nodes:
            break
        terms = _apply(integrand, nodes)
        val = 0j if terms is None else terms.sum(axis=0)
        if prev is not None:
            err = float(np.max(np.abs(val - prev)))
            if err <= tol * max(1.0, float(np.max(np.abs(val)))):
                return QuadratureReport(val, err, used)
        prev = val
    raise BudgetExceeded("piece quadrature did not converge within the refinement budget")


def pv_trace(integrand: Callable, nodes: NodeSet, radii: Sequence[float]) -> np.ndarray:
    """Truncated integrals for every schedule radius: array of shape ``(len(radii),) + value shape``."""
    radii = np.asarray(radii, dtype=float)
    terms = _apply(integrand, nodes)
    if terms is None:
        return np.zeros(len(radii), complex)
    shape = terms.shape[1:]
    partial = np.zeros((len(radii) + 1,) + shape, dtype=complex)
    for k in range(len(radii) + 1):
        sel = nodes.shell == k
        if sel.any():
            partial[k] = terms[sel].sum(axis=0)
    return np.cumsum(partial[:-1], axis=0)


def _check_schedule(schedule: Sequence[float], R: float | None) -> np.ndarray:
    sched = np.asarray(schedule, dtype=float)
    if sched.ndim != 1 or sched.size == 0 or np.any(np.diff(sched) <= 0):
        raise ValidationError("rho schedule must be strictly increasing")
    if R is not None and sched[0] <= R:
        raise ValidationError("first schedule radius must exceed R")
    return sched


def joint_principal_value(integrands: Mapping[str, Callable] | Callable, contours: ContourSet | Sequence[ContourSet],
                          schedule: Sequence[float], rate: Callable | None = None,
                          cfg: QuadratureConfig = QuadratureConfig(), strict: bool = True,
                          floor: float = 1e-10) -> QuadratureReport:
    """Sum of all family integrals truncated to ``D(0, rho)`` for each ``rho`` in ``schedule``.

    ``integrands`` maps a family name to its integrand; families without an
    entry are skipped, and a single callable is used for every family.
    The error estimate is the last difference across the schedule.  With
    ``strict`` a :class:`NonConvergentPV` is raised when the last two
    differences do not shrink by a factor of 1.5 and are above ``floor``
    relative to the value.
    """
    sets = [contours] if isinstance(contours, ContourSet) else list(contours)
    sched = _check_schedule(schedule, max(cs.params.R for cs in sets) if sets else None)
    total = None
    used = 0
    for cs in sets:
        clipped = truncate(cs, sched[-1])
        by_family: dict[str, list] = {}
        for p in clipped.pieces:
            by_family.setdefault(p.family, []).append(p)
        for fam in sorted(by_family):
            f = integrands if callable(integrands) else integrands.get(fam)
            if f is None:
                continue
            nodes = contour_nodes(by_family[fam], rate, sched, cfg)
            used += len(nodes)
            tr = pv_trace(f, nodes, sched)
            total = tr if total is None else total + tr
    if total is None:
        total = np.zeros(len(sched), complex)
    return _report(total, sched, used, strict, floor)


def _report(total: np.ndarray, sched: np.ndarray, used: int, strict: bool, floor: float) -> QuadratureReport:
    trace = tuple((float(r), v) for r, v in zip(sched, total))
    value = total[-1]
    if len(sched) == 1:
        return QuadratureReport(value, 0.0, used, trace)
    diffs = [float(np.max(np.abs(total[k] - total[k - 1]))) for k in range(1, len(sched))]
    err = diffs[-1]
    scale = max(1.0, float(np.max(np.abs(value))))
    if strict and len(diffs) >= 2 and err > floor * scale and err * 1.5 > diffs[-2]:
        raise NonConvergentPV(f"principal value differences {diffs[-2]:.3e} -> {err:.3e} do not shrink")
    return QuadratureReport(value, err, used, trace)


def time_convolution(g: FunctionAtom, B, t: float) -> np.ndarray:
    """``int_0^t exp(B (s - t)) g(s) ds`` for a time atom ``g`` (one interval, terms ``s^p e^{kappa s}``).

    Each term equals ``t^(p+1) exp(-B t) int_0^1 v^p exp((B + kappa) t v) dv``;
    the moment is taken in scaled form so only the bounded product
    ``exp(-B t + max(0, Re((B + kappa) t)))`` is ever exponentiated.
    """
    B = np.asarray(B, dtype=complex)
    t = float(t)
    if t < 0:
        raise ValidationError("convolution time must be nonnegative")
    out = np.zeros(B.shape, dtype=complex)
    if t == 0 or g.is_zero:
        return out
    for term in g.pieces[0]:
        c = np.array(term.coeffs)
        z = (B + term.kappa) * t
        expo = -B * t + np.maximum(0.0, z.real)
        if np.any(expo.real > SAFE_EXPONENT):
            raise OverflowGuard("time convolution exponent out of range: contour point outside its decay region")
        mom = scaled_moments(1j * z, len(c) - 1)  # int_0^1 v^p exp(z v) dv, scaled
        pref = np.exp(expo)
        for p, cp in enumerate(c):
            if cp != 0:
                out += cp * t ** (p + 1) * pref * mom[p]
    return out


def convolution_parts(g: FunctionAtom, B, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``time_convolution = steady + transient`` with ``transient`` carrying ``exp(-B t)``.

    For a term ``s^p e^{kappa s}`` and ``z = B + kappa``::

        steady    = e^{kappa t} sum_k (-1)^k p!/(p-k)! t^(p-k) / z^(k+1)
        transient = -e^{-B t} (-1)^p p! / z^(p+1)

    Both have poles at ``B = -kappa``; only their sum is entire.
    """
    B = np.asarray(B, dtype=complex)
    t = float(t)
    steady = np.zeros(B.shape, dtype=complex)
    transient = np.zeros(B.shape, dtype=complex)
    if t == 0 or g.is_zero:
        return steady, transient
    decay = np.exp(-B * t)
    for term in g.pieces[0]:
        z = B + term.kappa
        grow = np.exp(term.kappa * t)
        for p, cp in enumerate(term.coeffs):
            if cp == 0:
                continue
            fact = 1.0
            for k in range(p + 1):
                if k:
                    fact *= p - k + 1
                steady += cp * grow * (-1) ** k * fact * t ** (p - k) / z ** (k + 1)
            transient -= cp * decay * (-1) ** p * fact / z ** (p + 1)
    return steady, transient


def convolution_poles(g: FunctionAtom) -> tuple[complex, ...]:
    """Values of ``B`` at which :func:`convolution_parts` is singular."""
    return tuple(-complex(term.kappa) for term in g.pieces[0]) if not g.is_zero else ()
