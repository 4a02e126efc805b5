"""Command line: problem-spec files, command dispatch and outputs.

Spec files are JSON.  Complex numbers are ``[re, im]`` pairs and real
numbers are written with Python's shortest round-trip ``repr``, so writing
and re-reading a spec reproduces every field bit for bit.  A function atom
is a list (one entry per interval) of term lists; a term is
``{"coeffs": [[re, im], ...], "kappa": [re, im]}`` meaning
``sum_p coeffs[p] x^p exp(kappa x)``.

Exit codes: 0 success, 1 a ``check`` ran and some tolerance failed,
2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .adjoint import BoundaryFormSet, IntervalOperatorSpec, adjoint_for, check_adjointness, greens_residual
from .atoms import FunctionAtom, Term
from .characteristic import make_context, principal_exponential_sum, rate_normalised_context
from .contours import locate_zeros, truncate
from .errors import NumericalError, UTMError, ValidationError
from .quadrature import contour_nodes
from .solver import (BoundaryData, Forcing, ProblemInstance, SolverConfig, assumption_diagnostic,
                     default_threads, prepare, solve, verify_inversion)
from .spectral_poly import MonicPolynomial
from .transforms import diag_identity_residual, forward_both, forward_pm

SCHEMA_VERSION = 1
CHECKS = ("inversion", "diagonalization", "assumption", "greens", "cancellation")

TOL = {
    "inversion": 1e-3,
    "diagonalization": 1e-8,
    "assumption": 1e-3,
    "greens": 1e-8,
    "adjointness": 1e-10,
    "cancellation": 1e-10,
}

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


# complex <-> JSON -------------------------------------------------------------

def _cpair(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _cjson(a):
    """Nested lists of ``[re, im]`` pairs."""
    a = np.asarray(a, dtype=complex)
    if a.ndim == 0:
        return _cpair(a)
    return [_cjson(v) for v in a]


def _complex(v, what: str) -> complex:
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(u, (int, float)) for u in v)):
        raise ValidationError(f"{what}: complex numbers must be [re, im] pairs")
    return complex(float(v[0]), float(v[1]))


def _clist(v, what: str) -> tuple[complex, ...]:
    if not isinstance(v, (list, tuple)):
        raise ValidationError(f"{what}: expected a list")
    return tuple(_complex(u, what) for u in v)


def _terms(v, what: str) -> tuple[tuple[tuple[complex, ...], complex], ...]:
    if not isinstance(v, (list, tuple)):
        raise ValidationError(f"{what}: expected a list of terms")
    out = []
    for term in v:
        if not isinstance(term, dict) or "coeffs" not in term:
            raise ValidationError(f"{what}: each term needs 'coeffs'")
        out.append((_clist(term["coeffs"], what), _complex(term.get("kappa", [0.0, 0.0]), what)))
    return tuple(out)


def _terms_json(terms) -> list[dict]:
    return [{"coeffs": [_cpair(c) for c in coeffs], "kappa": _cpair(kappa)} for coeffs, kappa in terms]


def _atom(pieces) -> FunctionAtom:
    return FunctionAtom(tuple(tuple(Term(coeffs, kappa) for coeffs, kappa in p) for p in pieces))


# spec file ------------------------------------------------------------------

@dataclass(frozen=True)
class ProblemSpecFile:
    """Everything needed to run one problem; see the module docstring for the encoding."""

    intervals: int
    order: int
    omega: tuple[tuple[complex, ...], ...]  # c_0..c_{n-2} per interval
    a: tuple[complex, ...]
    boundary: tuple[tuple[complex, ...], ...]  # rows of [b^1 : beta^1 : ... : b^m : beta^m]
    initial: tuple  # per interval: tuple of (coeffs, kappa)
    x: tuple[float, ...]
    t: tuple[float, ...]
    forcing: tuple = ()  # tuple of (space pieces, time terms)
    h: tuple = ()  # tuple of (vector, time terms)
    adjoint_forms: tuple[tuple[complex, ...], ...] | None = None
    rho: tuple[float, ...] | None = None
    T: float = 1.0
    interface: str = "normalised"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ValidationError(f"unsupported schema_version {self.schema_version}; expected {SCHEMA_VERSION}")
        if self.intervals < 1 or self.order < 2:
            raise ValidationError("need at least one interval and order >= 2")
        if len(self.omega) != self.intervals or len(self.a) != self.intervals:
            raise ValidationError("need omega and a for every interval")
        if len(self.initial) != self.intervals:
            raise ValidationError("initial datum needs one term list per interval")
        for X, _ in self.forcing:
            if len(X) != self.intervals:
                raise ValidationError("forcing space factor needs one term list per interval")
        if self.interface not in ("normalised", "literal"):
            raise ValidationError("interface must be 'normalised' or 'literal'")

    # JSON ----------------------------------------------------------------
    @classmethod
    def from_json(cls, data: dict) -> "ProblemSpecFile":
        if not isinstance(data, dict):
            raise ValidationError("spec must be a JSON object")
        if "schema_version" not in data:
            raise ValidationError("spec is missing the mandatory schema_version field")
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ValidationError(f"unknown spec fields: {sorted(extra)}")
        try:
            grid = dict(
                x=tuple(float(v) for v in data["x"]),
                t=tuple(float(v) for v in data["t"]),
            )
            m = int(data["intervals"])
            return cls(
                intervals=m,
                order=int(data["order"]),
                omega=tuple(_clist(w, "omega") for w in data["omega"]),
                a=_clist(data["a"], "a"),
                boundary=tuple(_clist(row, "boundary") for row in data["boundary"]),
                initial=tuple(_terms(p, "initial") for p in data["initial"]),
                forcing=tuple((tuple(_terms(p, "forcing.space") for p in f["space"]), _terms(f["time"], "forcing.time"))
                              for f in data.get("forcing", [])),
                h=tuple((_clist(e["vector"], "h.vector"), _terms(e["time"], "h.time")) for e in data.get("h", [])),
                adjoint_forms=None if data.get("adjoint_forms") is None else tuple(
                    _clist(row, "adjoint_forms") for row in data["adjoint_forms"]),
                rho=None if data.get("rho") is None else tuple(float(v) for v in data["rho"]),
                T=float(data.get("T", 1.0)),
                interface=str(data.get("interface", "normalised")),
                schema_version=int(data["schema_version"]),
                **grid,
            )
        except KeyError as exc:
            raise ValidationError(f"spec is missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"malformed spec: {exc}") from None

    def to_json(self) -> dict:
        out = {
            "schema_version": self.schema_version,
            "intervals": self.intervals,
            "order": self.order,
            "omega": [[_cpair(c) for c in w] for w in self.omega],
            "a": [_cpair(v) for v in self.a],
            "boundary": [[_cpair(v) for v in row] for row in self.boundary],
            "initial": [_terms_json(p) for p in self.initial],
            "forcing": [{"space": [_terms_json(p) for p in X], "time": _terms_json(g)} for X, g in self.forcing],
            "h": [{"vector": [_cpair(v) for v in vec], "time": _terms_json(g)} for vec, g in self.h],
            "adjoint_forms": None if self.adjoint_forms is None else [[_cpair(v) for v in row]
                                                                      for row in self.adjoint_forms],
            "x": list(self.x),
            "t": list(self.t),
            "rho": None if self.rho is None else list(self.rho),
            "T": self.T,
            "interface": self.interface,
        }
        return out

    # model objects ---------------------------------------------------------
    def operator(self) -> IntervalOperatorSpec:
        omegas = tuple(MonicPolynomial(self.order, w) for w in self.omega)
        return IntervalOperatorSpec(omegas, self.a)

    def boundary_forms(self) -> BoundaryFormSet:
        return BoundaryFormSet.from_matrix(np.array(self.boundary, dtype=complex).reshape(len(self.boundary), -1),
                                           [self.order] * self.intervals)

    def supplied_adjoint(self) -> BoundaryFormSet | None:
        if self.adjoint_forms is None:
            return None
        return BoundaryFormSet.from_matrix(np.array(self.adjoint_forms, dtype=complex),
                                           [self.order] * self.intervals)

    def problem(self) -> ProblemInstance:
        op = self.operator()
        B = self.boundary_forms()
        Z = self.supplied_adjoint()
        a = np.asarray(self.a)
        if self.interface == "normalised" and np.any(a != a[0]):
            ctx = rate_normalised_context(op, B, adjoint_forms=Z)
        else:
            ctx = make_context(op, adjoint_for(op, B), adjoint_forms=Z)
        forcing = None
        if self.forcing:
            forcing = Forcing(tuple(_atom(X) for X, _ in self.forcing), tuple(_atom((g,)) for _, g in self.forcing))
        h = None
        if self.h:
            h = BoundaryData(tuple(np.array(v) for v, _ in self.h), tuple(_atom((g,)) for _, g in self.h))
        return ProblemInstance(op, B, ctx.pkg, ctx, _atom(self.initial), forcing=forcing, h=h, T=self.T)


def read_spec(path: str | Path) -> ProblemSpecFile:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read spec {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec {path} is not valid JSON: {exc.msg} (line {exc.lineno})") from None
    return ProblemSpecFile.from_json(data)


def write_spec(spec: ProblemSpecFile, path: str | Path) -> None:
    """One top-level field per line; ``json`` writes floats with ``repr``, which round-trips exactly."""
    body = ",\n".join(f" {json.dumps(k)}: {json.dumps(v)}" for k, v in spec.to_json().items())
    Path(path).write_text("{\n" + body + "\n}\n")


# commands -------------------------------------------------------------------

def _config(args, spec: ProblemSpecFile) -> SolverConfig:
    threads = args.threads if args.threads is not None else default_threads()
    return SolverConfig(schedule=spec.rho if args.rho_max is None else None, rho_max=args.rho_max,
                        threads=threads, interface=spec.interface)


def _write_json(obj, path: str | Path | None) -> None:
    text = json.dumps(obj, indent=1)
    if path is None:
        print(text)
    else:
        Path(path).write_text(text + "\n")


def cmd_solve(spec_path: str, out: str, args) -> int:
    spec = read_spec(spec_path)
    cfg = _config(args, spec)
    start = time.perf_counter()
    prob = prepare(spec.problem(), cfg)
    prepared = time.perf_counter()
    fld = solve(prob, np.array(spec.x), np.array(spec.t), cfg)
    done = time.perf_counter()
    out = Path(out)
    with out.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r", "x", "t", "re_q", "im_q", "err_est"])
        for r in range(prob.m):
            for i, xv in enumerate(fld.x):
                for k, tv in enumerate(fld.t):
                    q = fld.values[r, i, k]
                    w.writerow([r, repr(float(xv)), repr(float(tv)), repr(float(q.real)), repr(float(q.imag)),
                                repr(float(fld.errors[r, i, k]))])
    traces = [{"r": r, "t": t, "rho": tr["rho"], "nodes": tr["nodes"],
               "values": _cjson(tr["values"])} for (r, t), tr in sorted(fld.traces.items())]
    report = {
        "schema_version": SCHEMA_VERSION,
        "params": {"epsilon": prob.params.epsilon, "R": prob.params.R, "rho": list(prob.params.rho_max),
                   "rho_star": prob.params.rho_star, "zeros": len(prob.zeros.values),
                   "threads": cfg.threads, "interface": spec.interface,
                   "common_rate": None if prob.ctx.common_rate is None else _cpair(prob.ctx.common_rate)},
        "timings": {"prepare_s": prepared - start, "solve_s": done - prepared},
        "max_err_est": float(np.max(fld.errors)) if fld.errors.size else 0.0,
        "pv_traces": traces,
    }
    _write_json(report, out.with_suffix(".json"))
    return EXIT_OK


def _greens_samples(spec: ProblemSpecFile, pkg, count: int = 20, seed: int = 0) -> list[float]:
    """Green's-formula residuals on random polynomial pairs of degree ``n + 3``, relative to the data size."""
    rng = np.random.default_rng(seed)
    deg = spec.order + 3
    out = []
    for _ in range(count):
        cp = [rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1) for _ in range(spec.intervals)]
        cq = [rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1) for _ in range(spec.intervals)]
        res = abs(greens_residual(pkg.op, FunctionAtom.polynomial(*cp), FunctionAtom.polynomial(*cq), pkg))
        scale = np.linalg.norm(np.concatenate(cp)) * np.linalg.norm(np.concatenate(cq)) * deg ** spec.order
        out.append(float(res / scale))
    return out


def _adjointness(spec: ProblemSpecFile, pkg) -> float:
    Z = spec.supplied_adjoint() or pkg.adjoint
    F0, F1 = pkg.effective_F()
    return check_adjointness(pkg.boundary, Z, F0, F1)


def cmd_adjoint(spec_path: str, args) -> int:
    spec = read_spec(spec_path)
    prob = spec.problem()
    pkg = prob.pkg
    report = {
        "schema_version": SCHEMA_VERSION,
        "J": _cjson(pkg.J),
        "adjoint": _cjson(pkg.adjoint.matrix),
        "complementary": _cjson(pkg.complementary.matrix),
        "adjoint_complementary": _cjson(pkg.adjoint_complementary.matrix),
        "adjointness_residual": _adjointness(spec, pkg),
        "greens_residuals": _greens_samples(spec, pkg),
    }
    _write_json(report, args.out)
    return EXIT_OK


def _window(args, default: float = 40.0) -> tuple[float, float, float, float]:
    if args.window is None:
        return (-default, default, -default, default)
    try:
        w = tuple(float(v) for v in args.window.split(","))
    except ValueError:
        raise ValidationError("--window must be re0,re1,im0,im1") from None
    if len(w) != 4 or not (w[0] < w[1] and w[2] < w[3]):
        raise ValidationError("--window must be re0,re1,im0,im1 with re0 < re1 and im0 < im1")
    return w


def cmd_zeros(spec_path: str, args) -> int:
    spec = read_spec(spec_path)
    prob = spec.problem()
    es = principal_exponential_sum(prob.ctx)
    zs = locate_zeros(es, _window(args))
    report = {
        "schema_version": SCHEMA_VERSION,
        "window": list(zs.window),
        "count": int(zs.count),
        "zeros": [{"value": _cpair(z.value), "multiplicity": int(z.multiplicity)} for z in zs.zeros],
    }
    _write_json(report, args.out)
    return EXIT_OK


def cmd_contours(spec_path: str, args) -> int:
    spec = read_spec(spec_path)
    cfg = _config(args, spec)
    if args.window is not None:
        cfg = replace(cfg, window=max(abs(v) for v in _window(args)))
    prob = prepare(spec.problem(), cfg)
    rho = float(prob.params.rho_max[-1])
    lines = []
    for r in range(prob.m):
        lines += prob.contours(r, False, True).polylines(rho)
    report = {"schema_version": SCHEMA_VERSION, "epsilon": prob.params.epsilon, "R": prob.params.R,
              "rho": rho, "polylines": lines}
    _write_json(report, args.out)
    return EXIT_OK


def _sample_lambdas(prob: ProblemInstance, r: int, count: int, rho: float = 50.0) -> np.ndarray:
    """``count`` points spread over the inverse-transform contours inside ``D(0, rho)``."""
    cs = prob.contours(r, False, False)
    cs = truncate(cs, min(rho, float(prob.params.rho_max[-1])))
    fams = ("G0+", "Ga+", "G0-", "Ga-")
    ns = contour_nodes(tuple(p for p in cs.pieces if p.family in fams))
    idx = np.linspace(0, len(ns) - 1, count).astype(int)
    return ns.lam[idx]


def _check(which: str, spec: ProblemSpecFile, cfg: SolverConfig) -> dict:
    if which == "greens":
        pkg = adjoint_for(spec.operator(), spec.boundary_forms())
        g = _greens_samples(spec, pkg)
        adj = _adjointness(spec, pkg)
        ok = max(g) <= TOL["greens"] and adj <= TOL["adjointness"]
        return {"pass": bool(ok), "greens_max": max(g), "adjointness": adj,
                "tolerances": {"greens": TOL["greens"], "adjointness": TOL["adjointness"]}}
    prob = prepare(spec.problem(), cfg)
    Q = prob.Q
    if which == "inversion":
        x = np.linspace(0.1, 0.9, 17)
        rep = verify_inversion(prob, Q, x, cfg)
        trace = np.max(rep.trace.reshape(rep.trace.shape[0], -1), axis=-1)
        return {"pass": rep.max_error <= TOL["inversion"], "max_error": rep.max_error, "rho": list(rep.rho),
                "trace": trace.tolist(), "monotone": rep.monotone, "tolerance": TOL["inversion"]}
    if which == "assumption":
        rep = assumption_diagnostic(prob, Q, cfg=cfg, threshold=TOL["assumption"])
        mags = np.max(np.abs(rep.values).reshape(len(rep.rho), -1), axis=-1)
        return {"pass": rep.classification == "passing", "classification": rep.classification,
                "ratio": rep.ratio, "rho": list(rep.rho), "trace": mags.tolist(), "tolerance": TOL["assumption"]}
    worst, scale = 0.0, 1.0
    for r in range(prob.m):
        lam = _sample_lambdas(prob, r, 50 if which == "diagonalization" else 100)
        if which == "diagonalization":
            h = prob.B.apply(Q)
            h = None if np.max(np.abs(h)) <= 1e-12 else h
            for tag in ("G0+", "G0-"):
                res = diag_identity_residual(prob.ctx, Q, lam, tag, r, h=h)
                scale = np.maximum(1.0, np.abs(lam ** prob.ctx.n * forward_pm(prob.ctx, Q, lam, tag, r)))
                worst = max(worst, float(np.max(np.abs(res) / scale)))
        else:
            Fp, Fm = forward_both(prob.ctx, Q, lam, r)
            nu = prob.ctx.nu(r, lam)
            formal = prob.ctx.nu_prime(r, lam) / (2 * np.pi) * Q.transform(nu, r)
            scale = max(scale, float(np.max(np.abs(formal))))
            worst = max(worst, float(np.max(np.abs(Fp - Fm - formal))))
    rel = worst / scale if which == "cancellation" else worst
    return {"pass": rel <= TOL[which], "residual": rel, "tolerance": TOL[which]}


def cmd_check(spec_path: str, which: Sequence[str], args) -> int:
    spec = read_spec(spec_path)
    cfg = _config(args, spec)
    results = {w: _check(w, spec, cfg) for w in which}
    for res in results.values():
        res["pass"] = bool(res["pass"])
    report = {"schema_version": SCHEMA_VERSION, "checks": results, "all_pass": all(r["pass"] for r in results.values())}
    _write_json(report, args.out)
    return EXIT_OK if report["all_pass"] else EXIT_CHECK_FAILED


# entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="utm", description="Transform-method solver for linear evolution problems.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--spec", required=True, help="problem spec (JSON)")
        sp.add_argument("--out", required=out_required, help="output path (default: stdout)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (default: UT_THREADS or cores)")
        sp.add_argument("--rho-max", type=float, default=None, help="largest truncation radius")
        return sp

    common(sub.add_parser("solve", help="solve on the spec grid; writes CSV and a JSON report"), out_required=True)
    common(sub.add_parser("adjoint", help="print adjoint and complementary forms"))
    z = common(sub.add_parser("zeros", help="zeros of the principal determinant"))
    z.add_argument("--window", default=None, help="re0,re1,im0,im1")
    c = common(sub.add_parser("contours", help="contour polylines for plotting"))
    c.add_argument("--window", default=None, help="re0,re1,im0,im1 (zero search)")
    k = common(sub.add_parser("check", help="verification suites"))
    k.add_argument("--which", action="append", choices=CHECKS, default=None,
                   help="check to run (repeatable; default all)")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None and args.threads < 1:
            raise ValidationError("--threads must be positive")
        if args.command == "solve":
            return cmd_solve(args.spec, args.out, args)
        if args.command == "adjoint":
            return cmd_adjoint(args.spec, args)
        if args.command == "zeros":
            return cmd_zeros(args.spec, args)
        if args.command == "contours":
            return cmd_contours(args.spec, args)
        return cmd_check(args.spec, args.which or list(CHECKS), args)
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except UTMError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
