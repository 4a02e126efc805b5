"""Solution maps, verification reports and diagnostics.

``q_r(x, t)`` is the joint principal value of ``exp(i nu_r x) G_r(lam; t)``
over the plus families, ``Gcuts`` and the minus families of interval ``r``,
where ``G_r`` collects ``exp(-a_r lam^n t) F_r[Q]`` and the time-convolved
forcing and boundary terms.  For ``t > 0`` the outermost level-ray segments
are tilted into their decay sector and cut where ``Re(a lam^n) t`` exceeds
``decay_cutoff``, which is a Cauchy deformation of the same integral.
"""

from __future__ import annotations

import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .adjoint import AdjointPackage, BoundaryFormSet, IntervalOperatorSpec
from .atoms import FunctionAtom, SampledAtom
from .characteristic import CharacteristicContext, principal_exponential_sum, rate_normalised_context
from .contours import Arc, ContourParams, Line, ZeroSet, build_contours, locate_zeros, select_params, truncate
from .errors import GridTooCoarse, NonConvergentPV, OverflowGuard, ValidationError
from .quadrature import (SAFE_EXPONENT, QuadratureConfig, contour_nodes, convolution_parts, convolution_poles,
                         pv_trace, time_convolution)
from .transforms import forward_pm, inhomogeneous_boundary_term, sign_for_tag

__all__ = [
    "SolverConfig",
    "Forcing",
    "BoundaryData",
    "ProblemInstance",
    "SolutionField",
    "prepare",
    "solve",
    "solve_homogeneous",
    "solve_inhomogeneous",
    "solve_interface",
    "resample_slice",
    "verify_inversion",
    "assumption_diagnostic",
    "pde_residual",
    "default_threads",
]

INVERSE_FAMILIES = ("G0+", "Ga+", "Gcuts", "G0-", "Ga-")


def default_threads() -> int:
    """``UT_THREADS`` if set, else the number of logical cores."""
    env = os.environ.get("UT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError("UT_THREADS must be a positive integer") from None
    return os.cpu_count() or 1


@dataclass(frozen=True)
class SolverConfig:
    schedule: tuple[float, ...] | None = None  # truncation radii; default R 2^k, k = 1..8
    rho_max: float | None = None  # with no schedule: radii rho_max 2^-k, k = 7..0, beyond 1.5 R
    window: float | None = None  # half-width of the zero search; default 1.2 max(schedule)
    decay_cutoff: float = 50.0
    tilt: bool = True
    strict_pv: bool = False
    refine_check: bool = True  # estimate the quadrature error with one refinement
    interface: str = "normalised"  # or "literal": per-interval rates exp(-a_r lam^n t)
    cancel: bool = True  # drop concentric hole-circle pairs (see contours.cancel_circles)
    threads: int = 1
    quad: QuadratureConfig = QuadratureConfig()


@dataclass(frozen=True)
class Forcing:
    """``sum_i space[i](x) * time[i](t)`` with ``space`` on every interval and single-interval ``time`` atoms."""

    space: tuple[FunctionAtom, ...]
    time: tuple[FunctionAtom, ...]

    def __post_init__(self) -> None:
        if len(self.space) != len(self.time):
            raise ValidationError("forcing needs one time factor per space factor")

    def __call__(self, x, t, r: int = 0):
        return sum(s(x, r) * g(t) for s, g in zip(self.space, self.time))


@dataclass(frozen=True)
class BoundaryData:
    """``h(t) = sum_i vectors[i] * time[i](t)``."""

    vectors: tuple[np.ndarray, ...]
    time: tuple[FunctionAtom, ...]

    def __post_init__(self) -> None:
        if len(self.vectors) != len(self.time):
            raise ValidationError("boundary data needs one time factor per vector")
        object.__setattr__(self, "vectors", tuple(np.asarray(v, dtype=complex) for v in self.vectors))

    def __call__(self, t) -> np.ndarray:
        return sum(v * complex(g(np.array(float(t)))) for v, g in zip(self.vectors, self.time))


@dataclass(frozen=True)
class ProblemInstance:
    op: IntervalOperatorSpec
    B: BoundaryFormSet
    pkg: AdjointPackage
    ctx: CharacteristicContext
    Q: FunctionAtom
    forcing: Forcing | None = None
    h: BoundaryData | None = None
    T: float = 1.0
    zeros: ZeroSet | None = field(default=None, repr=False)
    params: ContourParams | None = None
    _contours: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def contours(self, r: int, tilt: bool, hat: bool, cancel: bool = True):
        """Contour set for interval ``r``, built once per instance."""
        key = (r, tilt, hat, cancel)
        if key not in self._contours:
            self._contours[key] = build_contours(self.params, self.zeros, self.ctx, r, tilt=tilt, hat=hat,
                                                 cancel=cancel)
        return self._contours[key]

    def __post_init__(self) -> None:
        if self.T <= 0:
            raise ValidationError("time horizon T must be positive")
        if self.Q.m != self.op.m:
            raise ValidationError("initial datum needs one piece per interval")
        defect = self.compatibility_defect()
        if defect > 1e-8:
            warnings.warn(f"initial datum violates the boundary conditions by {defect:.3e}", stacklevel=2)

    @property
    def m(self) -> int:
        return self.op.m

    def compatibility_defect(self) -> float:
        target = np.zeros(self.B.count) if self.h is None else self.h(0.0)
        return float(np.max(np.abs(self.B.apply(self.Q) - target)))


@dataclass(frozen=True)
class SolutionField:
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray  # (m, nx, nt)
    errors: np.ndarray  # same shape
    traces: dict = field(default_factory=dict, repr=False)

    def at(self, r: int = 0) -> np.ndarray:
        return self.values[r]


def prepare(prob: ProblemInstance, cfg: SolverConfig = SolverConfig()) -> ProblemInstance:
    """Locate the zeros and choose ``(epsilon, R)`` and the truncation schedule."""
    if prob.zeros is not None and prob.params is not None:
        return prob
    ctx = prob.ctx
    es = principal_exponential_sum(ctx)
    sched = cfg.schedule
    if sched is None:
        # the zeros near the origin decide R; search a small window first
        small = locate_zeros(es, (-40, 40, -40, 40))
        R = select_params(small, ctx.branches).R
        if cfg.rho_max is None:
            sched = tuple(R * 2.0 ** k for k in range(1, 9))
        else:
            sched = tuple(v for v in (cfg.rho_max / 2.0 ** k for k in range(7, -1, -1)) if v > 1.5 * R)
            if not sched:
                raise ValidationError(f"rho_max must exceed {1.5 * R:.4g}")
    W = cfg.window or 1.2 * max(sched)
    zeros = locate_zeros(es, (-W, W, -W, W))
    R = select_params(zeros, ctx.branches).R
    if cfg.schedule is None:
        sched = tuple(v for v in sched if v > 1.05 * R)
    params = select_params(zeros, ctx.branches, schedule=sched)
    return replace(prob, zeros=zeros, params=params)


# node sets ------------------------------------------------------------------

def _clip_decay(piece, a: complex, n: int, t: float, cutoff: float):
    """Shorten a segment or curve to where ``Re(a lam^n) t`` first stays above ``cutoff``.

    Arcs lying wholly beyond the cutoff are dropped (``None``).
    """
    if t <= 0:
        return piece
    if isinstance(piece, Arc):
        lam = piece.point(np.linspace(0.0, 1.0, 65))
        return None if np.all((a * lam**n).real * t > cutoff) else piece
    if isinstance(piece, Line):
        s = np.linspace(0.0, piece.length, 4097)
        lam = piece.point(s)
    else:
        s = np.linspace(piece.s0, piece.s1, 4097)
        lam = piece.point(s)
    d = (a * lam**n).real * t
    below = np.flatnonzero(d < cutoff)
    if isinstance(piece, Line):
        # far end is s = length for either traversal direction
        last = below.max() if below.size else 0
        return replace(piece, length=float(s[min(last + 1, s.size - 1)]))
    outward = abs(piece.s1) > abs(piece.s0)
    if outward:
        last = below.max() if below.size else 0
        return replace(piece, s1=float(s[min(last + 1, s.size - 1)]))
    first = below.min() if below.size else s.size - 1
    return replace(piece, s0=float(s[max(first - 1, 0)]))


def _rate(ctx: CharacteristicContext, r: int, t: float, xmax: float, cutoff: float):
    a = ctx.rate(r)
    n = ctx.n

    def rate(lam):
        lam = np.asarray(lam, dtype=complex)
        base = 1.0 + np.abs(ctx.nu_prime(r, lam)) * (1.0 + xmax)
        if t > 0:
            live = (a * lam**n).real * t < cutoff + 10
            base = base + np.where(live, n * abs(a) * np.abs(lam) ** (n - 1) * t, 0.0)
        return base

    return rate


HOMOGENEOUS, FULL, STEADY, TRANSIENT = "homogeneous", "full", "steady", "transient"


def _pole_radius(prob: ProblemInstance, r: int) -> float:
    """Largest ``|lam|`` at which a split convolution part has a pole."""
    a = prob.ctx.rate(r)
    n = prob.ctx.n
    poles = []
    for src in (prob.forcing, prob.h):
        if src is not None:
            for g in src.time:
                poles += convolution_poles(g)
    return max([abs(p / a) ** (1.0 / n) for p in poles], default=0.0)


def _piece_jobs(prob: ProblemInstance, r: int, t: float, cfg: SolverConfig,
                families=INVERSE_FAMILIES) -> list[tuple[str, str, tuple]]:
    """``(family, kind, pieces)`` for every integrand kind needed at time ``t``.

    The data term uses the tilted contours.  Forcing and boundary terms use
    the untilted ones; on each tilted ray beyond twice the pole radius they
    are split into a steady part (kept on the level ray, where it is not
    oscillatory in ``t``) and a transient part carrying ``exp(-a lam^n t)``
    (moved onto the tilted ray).
    """
    ctx = prob.ctx
    params = prob.params
    hat = any(f.startswith("Ghat") for f in families)
    flat = prob.contours(r, False, hat, cfg.cancel)
    tilted = prob.contours(r, True, hat, cfg.cancel) if t > 0 and cfg.tilt else flat
    rho = float(params.rho_max[-1])
    a = ctx.rate(r)

    def clip(pieces):
        kept = (_clip_decay(p, a, ctx.n, t, cfg.decay_cutoff) for p in pieces)
        return tuple(p for p in kept if p is not None)

    jobs = []
    forced = t > 0 and (prob.forcing is not None or prob.h is not None)
    split_at = 2.0 * _pole_radius(prob, r)
    for fam in families:
        if not prob.Q.is_zero:
            jobs.append((fam, HOMOGENEOUS, clip(truncate(replace(tilted, pieces=tilted.family(fam)), rho).pieces)))
        if not forced:
            continue
        full, steady, transient = [], [], []
        for p0, p1 in zip(flat.family(fam), tilted.family(fam)):
            if not (isinstance(p0, Line) and isinstance(p1, Line) and p1.direction != p0.direction):
                full.append(p0)
                continue
            L0 = max(0.0, split_at - abs(p0.start))
            if L0 > 0:
                full.append(replace(p0, length=L0))
            start = p0.start + L0 * p0.direction
            steady.append(replace(p0, start=start, length=p0.length - L0))
            transient.append(replace(p1, start=start, length=p1.length - L0))
        for kind, pieces in ((FULL, full), (STEADY, steady), (TRANSIENT, transient)):
            if pieces:
                pieces = truncate(replace(flat, pieces=tuple(pieces)), rho).pieces
                jobs.append((fam, kind, clip(pieces) if kind == TRANSIENT else pieces))
    return jobs


def _guard(ctx: CharacteristicContext, r: int, lam: np.ndarray, t: float, eps: float, R: float) -> None:
    """Reject nodes where ``exp(-a lam^n t)`` grows beyond what the excised discs allow."""
    if t <= 0 or lam.size == 0:
        return
    n = ctx.n
    a = ctx.rate(r)
    re = (a * lam**n).real
    allow = abs(a) * (n * np.abs(lam) ** (n - 1) * 3 * eps + (R + 3 * eps) ** n)
    if np.any(re < -allow):
        raise OverflowGuard("contour point outside its decay region")
    if np.any(-re * t > SAFE_EXPONENT):
        raise OverflowGuard("exponential multiplier beyond the safe range")


# integrands -----------------------------------------------------------------

def _wave(nu: np.ndarray, x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """``exp(i nu x) g`` as one exponential: on far minus-family nodes the
    factors overflow and underflow separately while their product is small."""
    with np.errstate(divide="ignore"):
        return np.exp(1j * np.outer(nu, x) + np.log(g)[:, None])


def _spectral_values(prob: ProblemInstance, r: int, lam: np.ndarray, sign: int, t: float,
                     kind: str = HOMOGENEOUS) -> np.ndarray:
    """The ``kind`` part of ``G_r(lam; t)``, before the ``exp(i nu x)`` factor."""
    ctx = prob.ctx
    a = ctx.rate(r)
    B = a * lam**ctx.n
    out = np.zeros(lam.shape, dtype=complex)
    if kind == HOMOGENEOUS:
        if not prob.Q.is_zero:
            out += np.exp(-B * t) * forward_pm(ctx, prob.Q, lam, sign, r)
        return out
    if t <= 0:
        return out

    def conv(g):
        if kind == FULL:
            return time_convolution(g, B, t)
        steady, transient = convolution_parts(g, B, t)
        return steady if kind == STEADY else transient

    if prob.forcing is not None:
        for X, g in zip(prob.forcing.space, prob.forcing.time):
            if not X.is_zero and not g.is_zero:
                out += forward_pm(ctx, X, lam, sign, r) * conv(g)
    if prob.h is not None:
        for v, g in zip(prob.h.vectors, prob.h.time):
            if np.any(v != 0) and not g.is_zero:
                out -= a * inhomogeneous_boundary_term(ctx, v, lam, sign, r) * conv(g)
    return out


def _slice(prob: ProblemInstance, r: int, x: np.ndarray, t: float, cfg: SolverConfig, dx: int = 0,
           refine: int = 0):
    """Truncated integrals ``(len(schedule), len(x))`` for one interval and time."""
    ctx = prob.ctx
    xmax = float(np.max(x)) if x.size else 1.0
    sched = np.asarray(prob.params.rho_max)
    total = np.zeros((sched.size, x.size), dtype=complex)
    used = 0
    for fam, kind, pieces in _piece_jobs(prob, r, t, cfg):
        rate = _rate(ctx, r, 0.0 if kind == STEADY else t, xmax, cfg.decay_cutoff)
        ns = contour_nodes(pieces, rate, sched, cfg.quad, refine=refine)
        if len(ns) == 0:
            continue
        if kind != STEADY:
            _guard(ctx, r, ns.lam, t, prob.params.epsilon, prob.params.R)
        sgn = sign_for_tag(fam)
        used += len(ns)

        def integrand(lam, sgn=sgn, kind=kind):
            nu = ctx.nu(r, lam)
            g = _spectral_values(prob, r, lam, sgn, t, kind)
            if dx:
                g = g * (1j * nu) ** dx
            return _wave(nu, x, g)

        total += pv_trace(integrand, ns, sched)
    return total, used


def _evaluate(prob: ProblemInstance, x: np.ndarray, t: np.ndarray, cfg: SolverConfig, dx: int = 0,
              intervals: Sequence[int] | None = None) -> SolutionField:
    prob = prepare(prob, cfg)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > prob.T):
        raise ValidationError("times must lie in [0, T]")
    if np.any((x < 0) | (x > 1)):
        raise ValidationError("x must lie in [0, 1]")
    m = prob.m
    intervals = list(range(m)) if intervals is None else list(intervals)
    jobs = [(r, k) for r in intervals for k in range(t.size)]

    def run(job):
        r, k = job
        tk = float(t[k])
        trace, used = _slice(prob, r, x, tk, cfg, dx)
        err = np.abs(trace[-1] - trace[-2]) if trace.shape[0] > 1 else np.zeros(x.size)
        if tk > 0 and cfg.refine_check:
            fine, _ = _slice(prob, r, x, tk, cfg, dx, refine=1)
            err = np.maximum(err, np.abs(fine[-1] - trace[-1])) if tk > 0 else err
            val = fine[-1]
        else:
            val = trace[-1]
        return val, err, trace, used

    threads = max(1, cfg.threads)
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    values = np.zeros((m, x.size, t.size), dtype=complex)
    errors = np.zeros((m, x.size, t.size))
    traces = {}
    for (r, k), (val, err, trace, used) in zip(jobs, results):
        values[r, :, k] = val
        errors[r, :, k] = err
        traces[(r, float(t[k]))] = {"rho": list(prob.params.rho_max), "values": trace, "nodes": used}
    if cfg.strict_pv:
        for key, tr in traces.items():
            if key[1] == 0.0:
                _check_pv(tr["values"])
    return SolutionField(x, t, values, errors, traces)


def _check_pv(trace: np.ndarray) -> None:
    d = np.max(np.abs(np.diff(trace, axis=0)), axis=-1)
    if d.size >= 2 and d[-1] > 1e-10 * max(1.0, float(np.max(np.abs(trace[-1])))) and d[-1] * 1.5 > d[-2]:
        raise NonConvergentPV(f"principal value differences {d[-2]:.3e} -> {d[-1]:.3e} do not shrink")


# public solve maps ----------------------------------------------------------

def solve(prob: ProblemInstance, x, t, cfg: SolverConfig = SolverConfig(), dx: int = 0) -> SolutionField:
    """Field on the grid ``x`` by ``t`` (``dx`` differentiates in ``x`` under the integral)."""
    return _evaluate(prob, x, t, cfg, dx)


def solve_homogeneous(prob: ProblemInstance, x, t, cfg: SolverConfig = SolverConfig(), dx: int = 0) -> SolutionField:
    if prob.forcing is not None or prob.h is not None:
        raise ValidationError("homogeneous solve called with forcing or boundary data")
    return _evaluate(prob, x, t, cfg, dx)


def solve_inhomogeneous(prob: ProblemInstance, x, t, cfg: SolverConfig = SolverConfig(), dx: int = 0) -> SolutionField:
    if prob.forcing is None and prob.h is None:
        raise ValidationError("inhomogeneous solve needs forcing or boundary data")
    return _evaluate(prob, x, t, cfg, dx)


def solve_interface(prob: ProblemInstance, x, t, cfg: SolverConfig = SolverConfig(), dx: int = 0) -> SolutionField:
    """Per-interval inverse transforms on a network of intervals.

    With unequal ``a_r`` the default ``normalised`` mode rebuilds the context
    with one common rate (see :func:`rate_normalised_context`); ``literal``
    keeps the given context and its per-interval multipliers.
    """
    if cfg.interface not in ("normalised", "literal"):
        raise ValidationError("interface mode must be 'normalised' or 'literal'")
    a = np.asarray(prob.op.time_coeffs)
    if cfg.interface == "normalised" and prob.ctx.common_rate is None and np.any(a != a[0]):
        ctx = rate_normalised_context(prob.op, prob.B)
        prob = replace(prob, pkg=ctx.pkg, ctx=ctx, zeros=None, params=None)
    return _evaluate(prob, x, t, cfg, dx)


def resample_slice(prob: ProblemInstance, t: float, cfg: SolverConfig = SolverConfig(),
                   degree: int = 32) -> SampledAtom:
    """The solution at time ``t`` as a Chebyshev interpolant (``error_bound`` declares its accuracy)."""
    xs = 0.5 * (1 - np.cos(np.pi * (np.arange(degree + 1) + 0.5) / (degree + 1)))
    f = solve(prob, xs, [t], cfg)
    return SampledAtom.from_samples([f.values[r, :, 0] for r in range(prob.m)])


# reports --------------------------------------------------------------------

@dataclass(frozen=True)
class InversionReport:
    x: np.ndarray
    errors: np.ndarray  # (m, nx) at the last radius
    trace: np.ndarray  # (len(schedule), m, nx) sup-error per radius
    rho: tuple[float, ...]

    @property
    def max_error(self) -> float:
        return float(np.max(self.errors))

    @property
    def monotone(self) -> bool:
        s = np.max(self.trace.reshape(self.trace.shape[0], -1), axis=-1)
        return bool(np.all(np.diff(s) <= 1e-12 + 0.05 * s[:-1]))


def verify_inversion(prob: ProblemInstance, phi: FunctionAtom, x, cfg: SolverConfig = SolverConfig()) -> InversionReport:
    """``|f^-1 f[phi] - phi|`` at the points ``x`` for every truncation radius."""
    p = prepare(replace(prob, Q=phi, forcing=None, h=None), cfg)
    x = np.asarray(x, dtype=float)
    tr = np.zeros((len(p.params.rho_max), p.m, x.size))
    for r in range(p.m):
        trace, _ = _slice(p, r, x, 0.0, cfg)
        tr[:, r, :] = np.abs(trace - phi(x, r)[None, :])
    return InversionReport(x, tr[-1], tr, tuple(p.params.rho_max))


@dataclass(frozen=True)
class AssumptionReport:
    x: np.ndarray
    rho: tuple[float, ...]
    values: np.ndarray  # (len(rho), m, nx)
    classification: str
    ratio: float


def assumption_diagnostic(prob: ProblemInstance, phi: FunctionAtom, x=(0.25, 0.5, 0.75),
                          cfg: SolverConfig = SolverConfig(), threshold: float = 1e-3) -> AssumptionReport:
    """Truncated integrals of ``exp(i nu x) F^+-[phi]`` over the ``Ghat`` families.

    ``passing`` when the final magnitude is at most ``threshold`` times the
    first, ``failing`` when it grows, ``inconclusive`` otherwise.
    """
    p = prepare(replace(prob, Q=phi, forcing=None, h=None), cfg)
    x = np.asarray(x, dtype=float)
    sched = np.asarray(p.params.rho_max)
    vals = np.zeros((sched.size, p.m, x.size), dtype=complex)
    for r in range(p.m):
        rate = _rate(p.ctx, r, 0.0, float(x.max()), cfg.decay_cutoff)
        for fam, _, pieces in _piece_jobs(p, r, 0.0, cfg, families=("Ghat+", "Ghat-")):
            ns = contour_nodes(pieces, rate, sched, cfg.quad)
            if len(ns) == 0:
                continue
            sgn = sign_for_tag(fam)

            def integrand(lam, sgn=sgn):
                nu = p.ctx.nu(r, lam)
                return _wave(nu, x, forward_pm(p.ctx, phi, lam, sgn, r))

            vals[:, r, :] += pv_trace(integrand, ns, sched)
    mags = np.max(np.abs(vals).reshape(sched.size, -1), axis=-1)
    if mags[0] == 0:
        return AssumptionReport(x, tuple(sched), vals, "passing", 0.0)
    ratio = float(mags[-1] / mags[0])
    if ratio <= threshold:
        cls = "passing"
    elif mags[-1] > mags[0]:
        cls = "failing"
    else:
        cls = "inconclusive"
    return AssumptionReport(x, tuple(sched), vals, cls, ratio)


def _uniform(v: np.ndarray, what: str) -> float:
    d = np.diff(v)
    if d.size == 0 or np.any(d <= 0) or np.max(np.abs(d - d[0])) > 1e-9 * max(1.0, abs(d[0])):
        raise GridTooCoarse(f"{what} grid must be uniform and increasing")
    return float(d[0])


def pde_residual(field: SolutionField, prob: ProblemInstance) -> float:
    """``max |q_t + a L q - forcing|`` over interior grid points, relative to the size of the terms.

    Centered second-order differences in ``t`` and in ``x``.
    """
    x, t = field.x, field.t
    n = prob.ctx.n
    if x.size < n + 3 or t.size < 3:
        raise GridTooCoarse(f"need at least {n + 3} x points and 3 t points")
    hx = _uniform(x, "x")
    ht = _uniform(t, "t")
    worst = 0.0
    for r, w in enumerate(prob.op.omegas):
        q = field.values[r]
        qt = (q[:, 2:] - q[:, :-2]) / (2 * ht)
        coeffs = list(w.low_coeffs) + [0.0] * (n - 1 - len(w.low_coeffs)) + [0.0, 1.0]
        half = (n + 1) // 2
        lo, hi = half, x.size - half
        if hi <= lo:
            raise GridTooCoarse("x grid too short for the stencil")
        Lq = np.zeros((hi - lo, t.size - 2), dtype=complex)
        for j, c in enumerate(coeffs):
            if c == 0:
                continue
            Lq += complex(c) * (-1j) ** j * _centered(q[:, 1:-1], j, hx, lo, hi)
        a = prob.op.time_coeffs[r]
        rhs = np.zeros_like(Lq)
        if prob.forcing is not None:
            X, T = np.meshgrid(x[lo:hi], t[1:-1], indexing="ij")
            rhs = prob.forcing(X, T, r)
        res = qt[lo:hi] + a * Lq - rhs
        scale = max(float(np.max(np.abs(qt[lo:hi]))), float(np.max(np.abs(a * Lq))), 1e-300)
        worst = max(worst, float(np.max(np.abs(res))) / scale)
    return worst


_STENCILS = {
    0: ([0], [1.0]),
    1: ([-1, 1], [-0.5, 0.5]),
    2: ([-1, 0, 1], [1.0, -2.0, 1.0]),
    3: ([-2, -1, 1, 2], [-0.5, 1.0, -1.0, 0.5]),
    4: ([-2, -1, 0, 1, 2], [1.0, -4.0, 6.0, -4.0, 1.0]),
}


def _centered(q: np.ndarray, order: int, h: float, lo: int, hi: int) -> np.ndarray:
    if order not in _STENCILS:
        raise GridTooCoarse(f"no centered stencil for derivative order {order}")
    offs, w = _STENCILS[order]
    out = np.zeros((hi - lo,) + q.shape[1:], dtype=complex)
    for o, c in zip(offs, w):
        out += c * q[lo + o:hi + o]
    return out / h**order
