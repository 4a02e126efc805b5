"""Zeros of the principal determinant and the integration contours built around them.

Zeros are isolated by a quadtree of rectangles whose winding numbers come
from phase tracking of the exponential sum along the cell edges.  Contours
are assembled as oriented pieces (circular arcs, straight lines and, for
complex dispersion coefficients, the curve on which ``nu`` is real), always
keeping the enclosed region on the left.

Family names: ``G0+``/``G0-`` (small circles about zeros), ``Ga+``/``Ga-``
(boundaries of the regions where ``exp(-a lam^n t)`` decays),
``Gcuts`` (the circle ``|lam| = R``) and ``Ghat+``/``Ghat-`` (the same
construction where the exponential grows).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .characteristic import CharacteristicContext, ExponentialSum
from .errors import CountMismatch, DegeneratePrincipalPart, NoValidR, ValidationError
from .spectral_poly import NuBranch, branch_eval, inverse_map

__all__ = [
    "Zero",
    "ZeroSet",
    "ContourParams",
    "Arc",
    "Line",
    "Curve",
    "ContourSet",
    "locate_zeros",
    "winding_number",
    "select_params",
    "classify_halfplane",
    "classify_zeros",
    "build_contours",
    "truncate",
    "cancel_circles",
    "default_schedule",
    "nudge_schedule",
]

PLUS, MINUS, BOUNDARY, CUTS = "plus", "minus", "boundary", "cuts"
FAMILIES = ("G0+", "G0-", "Ga+", "Ga-", "Gcuts", "Ghat+", "Ghat-")


# zero location ---------------------------------------------------------------

@dataclass(frozen=True)
class Zero:
    value: complex
    multiplicity: int
    residual: float


@dataclass(frozen=True)
class ZeroSet:
    """Located zeros with multiplicity; ``count`` is the argument-principle total of the window."""

    zeros: tuple[Zero, ...]
    window: tuple[float, float, float, float]
    count: int

    @property
    def values(self) -> np.ndarray:
        return np.array([z.value for z in self.zeros], dtype=complex)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([z.multiplicity for z in self.zeros], dtype=int)


def _term_scale(es: ExponentialSum, z) -> np.ndarray:
    """Magnitude scale ``sum_i sum_p |c_ip| max(1,|z|)^p |exp(-i z w_i)|`` in scaled units."""
    z = np.asarray(z, dtype=complex)
    w = np.array(es.weights)
    expo = (-1j * z[..., None] * w).real
    shift = expo.max(axis=-1, keepdims=True)
    mod = np.maximum(1.0, np.abs(z))[..., None]
    polys = np.stack([np.polynomial.polynomial.polyval(mod[..., 0], np.abs(p)) for p in es.polys], axis=-1)
    return (polys * np.exp(expo - shift)).sum(axis=-1)


def _edge_phase(es: ExponentialSum, a: complex, b: complex, rate: float, max_rounds: int = 30):
    """Total change of ``arg es`` along the segment ``a -> b``; ``None`` if a zero sits on it.

    An interval is refined while its phase step exceeds ``pi/4`` or its
    length times ``|es'/es|`` at either end exceeds 0.4, which keeps the
    sampled phase from aliasing near zeros.
    """
    k = int(max(16, np.ceil(abs(b - a) * (rate + 1.0) * 2.0)))
    t = np.linspace(0.0, 1.0, k + 1)
    length = abs(b - a)
    for _ in range(max_rounds):
        z = a + (b - a) * t
        f, df = es.scaled_with_derivative(z)
        scale = _term_scale(es, z)
        if np.any(np.abs(f) <= 1e-12 * scale) or not np.all(np.isfinite(f)):
            return None
        speed = np.abs(df / f) * length
        d = np.angle(f[1:] / f[:-1])
        h = np.diff(t)
        bad = (np.abs(d) > np.pi / 4) | (h * np.maximum(speed[:-1], speed[1:]) > 0.4)
        if not bad.any():
            return float(d.sum())
        mids = 0.5 * (t[:-1][bad] + t[1:][bad])
        t = np.sort(np.concatenate([t, mids]))
    return None


def winding_number(es: ExponentialSum, cell: tuple[float, float, float, float]) -> int | None:
    """Zeros (with multiplicity) inside the rectangle ``(x0, x1, y0, y1)``; ``None`` if undecidable."""
    x0, x1, y0, y1 = cell
    corners = [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)]
    rate = max(abs(w) for w in es.weights)
    total = 0.0
    for i in range(4):
        d = _edge_phase(es, corners[i], corners[(i + 1) % 4], rate)
        if d is None:
            return None
        total += d
    return int(round(total / (2 * np.pi)))


def _newton(es: ExponentialSum, z0: complex, mult: int, max_iter: int = 60) -> complex:
    z = complex(z0)
    for _ in range(max_iter):
        ld = complex(es.log_derivative(z))
        if not np.isfinite(ld) or ld == 0:
            break
        step = mult / ld
        z -= step
        if abs(step) <= 1e-15 * max(1.0, abs(z)):
            break
    return z


def _residual(es: ExponentialSum, z: complex) -> float:
    return float(abs(es.scaled(z)) / _term_scale(es, z))


SPLITS = (0.5137, 0.4719, 0.5483, 0.4431, 0.5791)


def _split(es: ExponentialSum, cell, count: int):
    x0, x1, y0, y1 = cell
    for f in SPLITS:
        xm = x0 + f * (x1 - x0)
        ym = y0 + f * (y1 - y0)
        kids = [(x0, xm, y0, ym), (xm, x1, y0, ym), (x0, xm, ym, y1), (xm, x1, ym, y1)]
        counts = [winding_number(es, k) for k in kids]
        if any(c is None or c < 0 for c in counts):
            continue
        if sum(counts) == count:
            return list(zip(kids, counts))
    return None


def locate_zeros(es: ExponentialSum, window: tuple[float, float, float, float], seeds=None,
                 min_size: float = 1e-4, tol: float = 1e-10, max_cells: int = 500000,
                 cluster_size: float = 1e-2) -> ZeroSet:
    """All zeros of ``es`` in the rectangle ``window = (re0, re1, im0, im1)``.

    Cells are split until each holds a single zero, polished by Newton.
    A cell below ``cluster_size`` holding several zeros is first tried as
    one multiple zero (Newton with that multiplicity); if that fails and
    the cell cannot be split it is kept as a cluster at its centre.
    """
    if len(es.weights) < 2:
        raise DegeneratePrincipalPart("need at least two exponents")
    x0, x1, y0, y1 = map(float, window)
    if not (x1 > x0 and y1 > y0):
        raise ValidationError("window must have positive width and height")
    seeds = np.asarray([] if seeds is None else seeds, dtype=complex)
    top = (x0, x1, y0, y1)
    total = winding_number(es, top)
    grow = 0
    while total is None and grow < 8:
        # a zero on the window edge: enlarge slightly and retry
        pad = 1e-3 * (1 + grow) * max(x1 - x0, y1 - y0)
        top = (x0 - pad, x1 + pad * 0.7, y0 - pad * 0.9, y1 + pad * 1.1)
        total = winding_number(es, top)
        grow += 1
    if total is None:
        raise CountMismatch("could not compute the winding number of the search window")
    found: list[Zero] = []
    stack = [(top, total)]
    cells = 0
    while stack:
        cell, cnt = stack.pop()
        cells += 1
        if cells > max_cells:
            raise CountMismatch("subdivision budget exhausted")
        if cnt == 0:
            continue
        cx0, cx1, cy0, cy1 = cell
        size = max(cx1 - cx0, cy1 - cy0)
        centre = complex(0.5 * (cx0 + cx1), 0.5 * (cy0 + cy1))
        if cnt == 1 or size < cluster_size:
            mult = cnt
            starts = [s for s in seeds if cx0 <= s.real <= cx1 and cy0 <= s.imag <= cy1] + [centre]
            for s in starts:
                z = _newton(es, s, mult)
                pad = 1e-9 * max(1.0, size)
                inside = cx0 - pad <= z.real <= cx1 + pad and cy0 - pad <= z.imag <= cy1 + pad
                if inside and _residual(es, z) <= tol:
                    found.append(Zero(z, mult, _residual(es, z)))
                    break
            else:
                kids = None if size < min_size else _split(es, cell, cnt)
                if kids is None and size < cluster_size:
                    found.append(Zero(centre, cnt, _residual(es, centre)))
                elif kids is None:
                    raise CountMismatch(f"could not split cell {cell} holding {cnt} zeros")
                else:
                    stack.extend(kids)
            continue
        kids = _split(es, cell, cnt)
        if kids is None:
            raise CountMismatch(f"could not split cell {cell} holding {cnt} zeros")
        stack.extend(kids)
    found.sort(key=lambda z: (round(abs(z.value), 9), np.angle(z.value)))
    if sum(z.multiplicity for z in found) != total:
        raise CountMismatch("listed multiplicities do not match the argument-principle count")
    return ZeroSet(tuple(found), top, total)


# parameters -----------------------------------------------------------------

@dataclass(frozen=True)
class ContourParams:
    epsilon: float
    R: float
    rho_max: tuple[float, ...]
    rho_star: float = 0.0


def default_schedule(R: float) -> tuple[float, ...]:
    return tuple(R * 2.0 ** k for k in range(1, 9))


def nudge_schedule(schedule: Sequence[float], zeros: Sequence[complex], epsilon: float) -> tuple[float, ...]:
    """Move each radius so that no zero modulus lies within ``3 epsilon`` of it."""
    mods = np.sort(np.abs(np.asarray(zeros, dtype=complex)))
    out = []
    for rho in schedule:
        rho = float(rho)
        for _ in range(1000):
            close = mods[np.abs(mods - rho) <= 3 * epsilon]
            if close.size == 0:
                break
            rho = float(close.max() + 3 * epsilon * 1.01)
        out.append(rho)
    out = np.maximum.accumulate(out)
    return tuple(float(v) for v in out)


def _clear_radius(mods: np.ndarray, R: float, eps: float, limit: float) -> float | None:
    """Smallest radius from ``R`` up whose circle keeps ``3 epsilon`` from every zero modulus."""
    for _ in range(10000):
        close = mods[np.abs(mods - R) <= 3 * eps]
        if close.size == 0:
            return float(R)
        R = float(close.max() + 3 * eps * 1.0001)
        if R > limit:
            return None
    return None


def select_params(zeros: ZeroSet, branches: Sequence[NuBranch], schedule: Sequence[float] | None = None,
                  max_R: float | None = None) -> ContourParams:
    """``epsilon = min(sep/5.5, 0.5, rho*/4)`` and the smallest admissible ``R``.

    ``R`` starts at ``max(1.1 rho*, rho* + epsilon)`` and is pushed past any
    zero whose modulus is within ``3 epsilon`` of it.  When no such radius
    exists below the search limit, ``epsilon`` is reduced by 1.5 and the
    search repeated.
    """
    rho_star = max(b.domain_radius for b in branches)
    vals = zeros.values
    if vals.size >= 2:
        d = np.abs(vals[:, None] - vals[None, :])
        sep = float(d[np.triu_indices(vals.size, 1)].min())
    else:
        sep = np.inf
    eps = float(min(sep / 5.5, 0.5, rho_star / 4.0))
    mods = np.abs(vals)
    limit = max_R if max_R is not None else 0.5 * max(abs(zeros.window[0]), abs(zeros.window[1]),
                                                       abs(zeros.window[2]), abs(zeros.window[3]))
    # evenly spaced zero moduli leave no gap of 6 epsilon; shrink epsilon until one exists
    for _ in range(12):
        R = _clear_radius(mods, max(1.1 * rho_star, rho_star + eps), eps, limit)
        if R is not None:
            break
        eps /= 1.5
    else:
        raise NoValidR(f"no admissible radius below {limit:.4g}")
    sched = default_schedule(R) if schedule is None else tuple(float(s) for s in schedule)
    if any(s <= R for s in sched) or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValidationError("schedule must be increasing with every radius beyond R")
    return ContourParams(eps, float(R), nudge_schedule(sched, vals, eps), rho_star)


def classify_halfplane(ctx: CharacteristicContext, r: int, lam, tol: float = 1e-12):
    """``plus``/``minus``/``boundary`` from the sign of ``Im nu_r(lam)``."""
    nu = ctx.nu(r, lam)
    im = np.imag(nu)
    band = tol * np.maximum(1.0, np.abs(nu))
    out = np.where(im > band, PLUS, np.where(im < -band, MINUS, BOUNDARY))
    return out[()] if out.ndim == 0 else out


def classify_zeros(ctx: CharacteristicContext, zeros: ZeroSet, R: float, r: int) -> tuple[str, ...]:
    """Per zero: ``cuts`` inside ``D(0, R)``, else ``plus`` on the closure of the upper side, else ``minus``."""
    out = []
    for z in zeros.zeros:
        if abs(z.value) < R:
            out.append(CUTS)
        else:
            c = classify_halfplane(ctx, r, z.value)
            out.append(MINUS if c == MINUS else PLUS)
    return tuple(out)


# pieces ---------------------------------------------------------------------

@dataclass(frozen=True)
class Arc:
    """``center + radius exp(i phi)`` for ``phi`` from ``theta0`` to ``theta1``."""

    family: str
    r: int
    center: complex
    radius: float
    theta0: float
    theta1: float
    clearance: float = np.inf

    @property
    def closed(self) -> bool:
        return abs(abs(self.theta1 - self.theta0) - 2 * np.pi) < 1e-12

    @property
    def length(self) -> float:
        return self.radius * abs(self.theta1 - self.theta0)

    def point(self, u):
        phi = self.theta0 + (self.theta1 - self.theta0) * np.asarray(u, dtype=float)
        return self.center + self.radius * np.exp(1j * phi)

    def derivative(self, u):
        phi = self.theta0 + (self.theta1 - self.theta0) * np.asarray(u, dtype=float)
        return 1j * self.radius * np.exp(1j * phi) * (self.theta1 - self.theta0)


@dataclass(frozen=True)
class Line:
    """Segment ``start + s direction``, ``0 <= s <= length`` (``length`` may be infinite).

    ``reverse`` traverses it from the far end back to ``start``.
    """

    family: str
    r: int
    start: complex
    direction: complex
    length: float
    reverse: bool = False
    level: bool = False  # lies on a level ray of Re(a lam^n)

    def point(self, s):
        return self.start + np.asarray(s, dtype=float) * self.direction

    def derivative(self, s):
        return np.full(np.shape(s), self.direction, dtype=complex)

    def param_at_radius(self, rho: float) -> float:
        """Smallest ``s >= 0`` with ``|point(s)| = rho`` (``inf`` if never reached)."""
        b = (self.start * np.conj(self.direction)).real
        c = abs(self.start) ** 2 - rho**2
        disc = b * b - c
        if disc < 0:
            return np.inf
        s = -b + np.sqrt(disc)
        return float(s) if s >= 0 else np.inf


@dataclass(frozen=True)
class Curve:
    """Arm of ``{lam : nu_r(lam) real}``, parametrised by ``s = nu_r(lam)`` from ``s0`` to ``s1``."""

    family: str
    r: int
    branch: NuBranch = field(repr=False)
    s0: float
    s1: float

    def point(self, s):
        return _curve_point(self.branch, np.asarray(s, dtype=float))

    def derivative(self, s):
        lam = self.point(s)
        w = self.branch.omega
        n = w.degree
        return w.derivative(np.asarray(s, dtype=complex)) / (n * lam ** (n - 1))

    def param_at_radius(self, rho: float) -> float:
        sign = 1.0 if self.s1 > self.s0 else -1.0
        lo = abs(self.s0)
        hi = max(2 * lo, 2 * rho)
        while abs(self.point(sign * hi)) < rho:
            hi *= 2
        if abs(self.point(sign * lo)) >= rho:
            return self.s0
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if abs(self.point(sign * mid)) < rho:
                lo = mid
            else:
                hi = mid
        return sign * 0.5 * (lo + hi)


def _curve_point(branch: NuBranch, s: np.ndarray) -> np.ndarray:
    """``lam`` with ``nu(lam) = s``: the ``n``-th root of ``omega(s)`` whose branch value is ``s``."""
    w = branch.omega
    n = w.degree
    s = np.asarray(s, dtype=float)
    base = inverse_map(w, s.astype(complex))
    cands = base[..., None] * np.exp(2j * np.pi * np.arange(n) / n)
    err = np.full(cands.shape, np.inf)
    ok = np.abs(cands) > branch.domain_radius * (1 + 1e-12)
    if ok.any():
        err[ok] = np.abs(branch_eval(branch, cands[ok]) - np.broadcast_to(s[..., None], cands.shape)[ok])
    pick = np.argmin(err, axis=-1)
    return np.take_along_axis(cands, pick[..., None], axis=-1)[..., 0]


Piece = Arc | Line | Curve


@dataclass(frozen=True)
class ContourSet:
    pieces: tuple
    params: ContourParams
    r: int
    tilted: bool = False

    def family(self, name: str) -> tuple:
        return tuple(p for p in self.pieces if p.family == name)

    def polylines(self, rho: float, samples: int = 64) -> list[dict]:
        """Sampled points of each piece clipped to ``|lam| <= rho`` (for plotting)."""
        out = []
        for p in truncate(self, rho).pieces:
            if isinstance(p, Arc):
                pts = p.point(np.linspace(0, 1, samples))
            elif isinstance(p, Line):
                pts = p.point(np.linspace(0, p.length, samples))
            else:
                pts = p.point(np.linspace(p.s0, p.s1, samples))
            if getattr(p, "reverse", False):
                pts = pts[::-1]
            out.append({"family": p.family, "r": p.r, "points": [[float(z.real), float(z.imag)] for z in pts]})
        return out


def transform_sign(family: str) -> str:
    """Which forward transform a family uses: ``plus`` on G+ families and Gcuts, ``minus`` on G-."""
    return MINUS if family.endswith("-") else PLUS


# region geometry ------------------------------------------------------------

@dataclass
class _Boundary:
    """A boundary line of a sub-region: a level ray (angle) or an arm of the split curve."""

    kind: str  # "ray" or "curve"
    angle: float = 0.0
    arm: int = 1  # +1 for s -> +inf, -1 for s -> -inf
    level: bool = True


@dataclass
class _Region:
    lower: _Boundary
    upper: _Boundary
    lo: float  # angular extent of the sub-region (for rays)
    hi: float
    wlo: float  # enclosing wedge
    whi: float
    side: str


def _level_angles(a: complex, n: int) -> np.ndarray:
    base = (np.pi / 2 - np.angle(a)) / n
    ang = base + np.arange(2 * n) * np.pi / n
    return np.mod(ang + np.pi, 2 * np.pi) - np.pi


def _angle_in(theta, lo, hi):
    """``theta`` strictly inside the ccw interval ``(lo, hi)`` with ``hi - lo < 2 pi``."""
    d = np.mod(np.asarray(theta) - lo, 2 * np.pi)
    return (d > 0) & (d < hi - lo)


def _subregions(ctx: CharacteristicContext, r: int, growth: int) -> list[_Region]:
    """Sub-regions where ``sign Re(a lam^n) = growth``, split where ``nu_r`` is real."""
    n = ctx.n
    a = ctx.rate(r)
    real_omega = ctx.op.omegas[r].is_real
    ang = np.sort(_level_angles(a, n))
    out = []
    for k in range(2 * n):
        lo = ang[k]
        hi = lo + np.pi / n
        mid = lo + np.pi / (2 * n)
        if np.sign((a * np.exp(1j * n * mid)).real) != growth:
            continue
        lower = _Boundary("ray", lo, level=True)
        upper = _Boundary("ray", hi, level=True)
        split = None
        for axis, arm in ((0.0, 1), (np.pi, -1)):
            if _angle_in(axis, lo, hi):
                split = (lo + np.mod(axis - lo, 2 * np.pi), arm)
        if split is None:
            side = PLUS if np.sin(mid) > 0 else MINUS
            out.append(_Region(lower, upper, lo, hi, lo, hi, side))
            continue
        axis, arm = split
        cut = _Boundary("ray", axis, level=False) if real_omega else _Boundary("curve", axis, arm=arm, level=False)
        below, above = (MINUS, PLUS) if arm == 1 else (PLUS, MINUS)
        out.append(_Region(lower, cut, lo, axis, lo, hi, below))
        out.append(_Region(cut, upper, axis, hi, lo, hi, above))
    return out


def _inside(ctx, r, lam, R, reg: _Region):
    lam = np.asarray(lam, dtype=complex)
    ok = np.abs(lam) > R
    if reg.lower.kind != "curve" and reg.upper.kind != "curve":
        return ok & _angle_in(np.angle(lam), reg.lo, reg.hi)
    res = ok & _angle_in(np.angle(lam), reg.wlo, reg.whi)
    if res.any():
        im = np.imag(ctx.nu(r, lam[res]))
        res[res] = im > 0 if reg.side == PLUS else im < 0
    return res


def _breaks_line(start: complex, d: complex, centers: np.ndarray, rad: float) -> list[tuple[float, float]]:
    out = []
    for c in centers:
        sc = ((c - start) * np.conj(d)).real
        dist2 = abs(c - start) ** 2 - sc**2
        if dist2 < rad**2:
            h = np.sqrt(rad**2 - dist2)
            lo, hi = sc - h, sc + h
            if hi > 0:
                out.append((max(lo, 0.0), hi))
    return sorted(out)


def _breaks_curve(curve_fn, s_start: float, sign: float, centers: np.ndarray, rad: float):
    """Intervals of ``|s| >= s_start`` where the arm lies inside a disc."""
    out = []
    for c in centers:
        s_c = sign * c.real
        if s_c + 3 * rad + 1 < s_start:
            continue
        grid = np.linspace(max(s_start, s_c - 3 * rad - 1), s_c + 3 * rad + 1, 401)
        g = np.abs(curve_fn(sign * grid) - c) - rad
        inside = g < 0
        if not inside.any():
            continue
        idx = np.flatnonzero(inside)

        def root(i0, i1):
            lo_, hi_ = grid[i0], grid[i1]
            in_lo = inside[i0]
            for _ in range(60):
                m = 0.5 * (lo_ + hi_)
                if (abs(curve_fn(np.array([sign * m]))[0] - c) < rad) == in_lo:
                    lo_ = m
                else:
                    hi_ = m
            return 0.5 * (lo_ + hi_)

        lo = s_start if idx[0] == 0 else root(idx[0] - 1, idx[0])
        hi = root(idx[-1], idx[-1] + 1)
        out.append((lo, hi))
    return sorted(out)


def _segments(breaks: list[tuple[float, float]], start: float = 0.0):
    """Complement of the union of break intervals inside ``[start, inf)``."""
    segs, cur = [], start
    for lo, hi in breaks:
        if hi <= cur:
            continue
        if lo > cur:
            segs.append((cur, lo))
        cur = max(cur, hi)
    segs.append((cur, np.inf))
    return segs


def _hole_arcs(member: Callable, center: complex, rad: float, samples: int = 720):
    """ccw angle intervals ``(a, b)``, ``b > a``, of ``C(center, rad)`` where ``member`` holds."""
    phi = np.linspace(0, 2 * np.pi, samples, endpoint=False)
    m = member(center + rad * np.exp(1j * phi))
    if m.all():
        return [(0.0, 2 * np.pi)]
    if not m.any():
        return []

    def edge(a, b):
        ma = member(np.array([center + rad * np.exp(1j * a)]))[0]
        for _ in range(60):
            c = 0.5 * (a + b)
            if member(np.array([center + rad * np.exp(1j * c)]))[0] == ma:
                a = c
            else:
                b = c
        return 0.5 * (a + b)

    # rotate so that sampling starts outside the region, then collect runs
    k0 = int(np.flatnonzero(~m)[0])
    step = 2 * np.pi / samples
    ang = phi[k0] + step * np.arange(samples + 1)
    mm = np.append(np.roll(m, -k0), m[k0])
    runs, cur = [], None
    for j in range(1, samples + 1):
        if mm[j] and not mm[j - 1]:
            cur = edge(ang[j - 1], ang[j])
        elif not mm[j] and mm[j - 1] and cur is not None:
            runs.append((cur, edge(ang[j - 1], ang[j])))
            cur = None
    return runs


def build_contours(params: ContourParams, zeros: ZeroSet, ctx: CharacteristicContext, r: int = 0,
                   tilt: bool = False, hat: bool = True, cancel: bool = False) -> ContourSet:
    """Oriented contour pieces for interval ``r``.

    With ``tilt`` the outermost unbroken part of every level ray is rotated
    into its decay region (a Cauchy deformation that is only valid for
    ``t > 0``).  ``hat`` adds the ``Ghat`` families; ``cancel`` drops each
    pair of concentric circles (see :func:`cancel_circles`).
    """
    eps, R = params.epsilon, params.R
    classes = classify_zeros(ctx, zeros, R, r)
    vals = zeros.values
    outer = np.array([z for z, c in zip(vals, classes) if c != CUTS], dtype=complex)
    pieces: list = []
    for z, c in zip(vals, classes):
        if c == PLUS:
            pieces.append(Arc("G0+", r, complex(z), eps, 0.0, 2 * np.pi, clearance=eps))
        elif c == MINUS:
            pieces.append(Arc("G0-", r, complex(z), eps, 0.0, 2 * np.pi, clearance=eps))
    pieces.append(Arc("Gcuts", r, 0j, R, 0.0, 2 * np.pi, clearance=R - params.rho_star))
    for growth, name in ((1, "Ga"), (-1, "Ghat")):
        if growth == -1 and not hat:
            continue
        for reg in _subregions(ctx, r, growth):
            fam = name + ("+" if reg.side == PLUS else "-")
            pieces += _region_pieces(ctx, r, fam, reg, params, outer, tilt=tilt and growth == 1)
    cs = ContourSet(tuple(pieces), params, r, tilted=tilt)
    return cancel_circles(cs) if cancel else cs


def _region_pieces(ctx, r, fam, reg: _Region, params, outer, tilt):
    eps, R = params.epsilon, params.R
    hole = 2 * eps
    member = lambda lam: _inside(ctx, r, lam, R, reg)
    pieces = []
    start_angles = []
    for which, bnd in (("lower", reg.lower), ("upper", reg.upper)):
        if bnd.kind == "ray":
            d = np.exp(1j * bnd.angle)
            p0 = R * d
            segs = _segments(_breaks_line(p0, d, outer, hole))
            start_angles.append(bnd.angle)
            for i, (s_a, s_b) in enumerate(segs):
                direction = d
                start = p0 + s_a * d
                length = s_b - s_a
                if i == len(segs) - 1 and tilt and bnd.level:
                    sense = 1 if which == "lower" else -1
                    direction = d * np.exp(1j * _tilt_angle(start, d, sense, np.pi / ctx.n, outer, hole))
                pieces.append(Line(fam, r, complex(start), complex(direction), float(length),
                                   reverse=which == "upper", level=bnd.level))
        else:
            branch = ctx.branches[r]
            fn = lambda s, b=branch: _curve_point(b, np.asarray(s, dtype=float))
            sign = float(bnd.arm)
            probe = Curve("probe", r, branch, sign * R, sign * np.inf)
            s_start = abs(probe.param_at_radius(R))
            start_angles.append(bnd.angle + float(np.angle(fn(np.array([sign * s_start]))[0] /
                                                           np.exp(1j * bnd.angle))))
            for s_a, s_b in _segments(_breaks_curve(fn, s_start, sign, outer, hole), start=s_start):
                a_, b_ = sign * s_a, sign * s_b
                if which == "upper":
                    a_, b_ = b_, a_
                pieces.append(Curve(fam, r, branch, float(a_), float(b_)))
    # arc of C(0, R) from the upper start back to the lower start, clockwise
    th_lo, th_hi = start_angles
    while th_hi <= th_lo:
        th_hi += 2 * np.pi
    while th_hi - th_lo > 2 * np.pi:
        th_hi -= 2 * np.pi
    pieces.append(Arc(fam, r, 0j, R, float(th_hi), float(th_lo), clearance=R - params.rho_star))
    for c in outer:
        for a, b in _hole_arcs(member, complex(c), hole):
            pieces.append(Arc(fam, r, complex(c), hole, float(b), float(a), clearance=eps))
    return pieces


def _tilt_angle(start: complex, d: complex, sense: int, width: float, outer: np.ndarray, hole: float) -> float:
    """Rotation into the wedge for a ray from ``start``; halved until no hole disc is swept."""
    delta = sense * width / 4
    for _ in range(30):
        ok = True
        lo, hi = sorted((0.0, delta))
        for c in outer:
            v = c - start
            if abs(v) < hole:
                ok = False
                break
            ang = np.angle(v / d)
            margin = np.arcsin(min(1.0, hole / abs(v)))
            if lo - margin < ang < hi + margin:
                ok = False
                break
        if ok:
            return float(delta)
        delta /= 2
    return 0.0


def truncate(cs: ContourSet, rho: float) -> ContourSet:
    """Clip every piece to ``D(0, rho)`` (one radius for all families)."""
    if rho <= cs.params.R:
        raise ValidationError("truncation radius must exceed R")
    out = []
    for p in cs.pieces:
        if isinstance(p, Arc):
            out += _clip_arc(p, rho)
        elif isinstance(p, Line):
            out += _clip_line(p, rho)
        else:
            out += _clip_curve(p, rho)
    return replace(cs, pieces=tuple(out))


def _clip_arc(p: Arc, rho: float):
    u = np.linspace(0, 1, 513)
    inside = np.abs(p.point(u)) < rho
    if inside.all():
        return [p]
    if not inside.any():
        return []

    def edge(a, b):
        ia = abs(p.point(a)) < rho
        for _ in range(60):
            m = 0.5 * (a + b)
            if (abs(p.point(m)) < rho) == ia:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    idx = np.flatnonzero(np.diff(inside.astype(int)))
    cuts = [0.0] + [edge(u[i], u[i + 1]) for i in idx] + [1.0]
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if abs(p.point(0.5 * (a + b))) < rho:
            th0 = p.theta0 + (p.theta1 - p.theta0) * a
            th1 = p.theta0 + (p.theta1 - p.theta0) * b
            out.append(replace(p, theta0=float(th0), theta1=float(th1)))
    return out


def _clip_line(p: Line, rho: float):
    if abs(p.start) >= rho:
        return []
    s = p.param_at_radius(rho)
    return [replace(p, length=float(min(p.length, s)))]


def _clip_curve(p: Curve, rho: float):
    outward = abs(p.s1) > abs(p.s0)
    near, far = (p.s0, p.s1) if outward else (p.s1, p.s0)
    if abs(p.point(np.array([near]))[0]) >= rho:
        return []
    probe = Curve(p.family, p.r, p.branch, near, np.sign(near) * np.inf)
    s = probe.param_at_radius(rho)
    if abs(s) < abs(far):
        far = s
    return [replace(p, s0=near, s1=far) if outward else replace(p, s0=far, s1=near)]


def cancel_circles(cs: ContourSet) -> ContourSet:
    """Drop each ``epsilon`` circle together with a full ``2 epsilon`` hole around the same zero.

    The two are concentric with opposite orientation and use the same
    transform branch, so their integrals cancel when no pole of the
    integrand lies between them.
    """
    eps = cs.params.epsilon
    pieces = list(cs.pieces)
    drop = set()
    for i, p in enumerate(pieces):
        if isinstance(p, Arc) and p.family in ("G0+", "G0-") and p.closed:
            want = "Ga" + p.family[-1]
            for j, q in enumerate(pieces):
                if (j not in drop and isinstance(q, Arc) and q.family == want and q.closed
                        and abs(q.center - p.center) < 1e-12 and abs(q.radius - 2 * eps) < 1e-12):
                    drop.update((i, j))
                    break
    return replace(cs, pieces=tuple(p for k, p in enumerate(pieces) if k not in drop))
