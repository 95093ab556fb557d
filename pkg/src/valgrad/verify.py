"""Empirical conservativity checks for the adjoint surrogate gradient.

The chain-rule harness samples a curve theta(t), compares the finite
difference of t -> f(theta(t)) against <u(theta(t)), theta_dot(t)>, and
reports the fraction of grid points where they agree.  The theory permits a
Lebesgue-null exceptional set, operationalized here as an explicit per-curve
budget of failing points rather than measure machinery; a finite sample can
only ever report "no violation found".

The Dini harness brackets one-sided difference quotients between the
smallest and largest inner products <u_i, d> over sampled primal-dual
points.  The quotient is a limit as the step vanishes, so the gate applies
to the smallest step in the list; the larger steps are reported to show the
approach.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.interpolate

from .adjoint import asm, asm_from_point
from .problem import ParametricProblem, PrimalDualPoint
from .solver import SolveOptions, SolverError, solve_primal_dual, value

__all__ = [
    "Curve",
    "ChainRuleReport",
    "DiniReport",
    "CostReport",
    "finite_diff_gradient",
    "chain_rule_check",
    "dini_sandwich_check",
    "cost_report",
]


class Curve:
    """Piecewise-C1 path [0, 1] -> R^q with an explicit derivative.

    ``breakpoints`` declares parameters the evaluation grid should avoid
    (curve kinks or known exceptional crossings).
    """

    def __init__(self, kind, q, theta_fn, theta_dot_fn, breakpoints=(), description=""):
        self.kind = kind
        self.q = q
        self._theta = theta_fn
        self._theta_dot = theta_dot_fn
        self.breakpoints = tuple(float(b) for b in breakpoints)
        self.description = description or kind

    def theta(self, t: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(self._theta(float(t)), dtype=float))

    def theta_dot(self, t: float) -> np.ndarray:
        return np.atleast_1d(np.asarray(self._theta_dot(float(t)), dtype=float))

    @classmethod
    def line(cls, a, b, breakpoints=()) -> "Curve":
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.shape != b.shape:
            raise ValueError("endpoints must share a dimension")
        d = b - a
        return cls(
            "line",
            a.size,
            lambda t: a + t * d,
            lambda t: d,
            breakpoints,
            f"line {a.tolist()} -> {b.tolist()}",
        )

    @classmethod
    def cubic_spline(cls, knots, breakpoints=()) -> "Curve":
        knots = np.atleast_2d(np.asarray(knots, dtype=float))
        if knots.shape[0] < 3:
            raise ValueError("cubic spline needs >= 3 knots")
        ts = np.linspace(0.0, 1.0, knots.shape[0])
        spline = scipy.interpolate.CubicSpline(ts, knots, axis=0)
        deriv = spline.derivative()
        return cls(
            "cubic_spline",
            knots.shape[1],
            spline,
            deriv,
            breakpoints,
            f"cubic_spline through {knots.shape[0]} knots",
        )

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "q": self.q,
            "breakpoints": list(self.breakpoints),
            "description": self.description,
        }


def finite_diff_gradient(
    p: ParametricProblem,
    theta,
    h: float = 1e-5,
    opts: Optional[SolveOptions] = None,
    use_oracle: bool = True,
):
    """Central differences of the value function; costs 2q solves.

    Returns ``(gradient, solver_calls)``.  Solver failure at any stencil
    point propagates as :class:`SolverError`.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    grad = np.zeros(p.q)
    calls = 0
    for i in range(p.q):
        e = np.zeros(p.q)
        e[i] = h
        fp = value(p, theta + e, opts, use_oracle=use_oracle)
        calls += 1
        fm = value(p, theta - e, opts, use_oracle=use_oracle)
        calls += 1
        grad[i] = (fp - fm) / (2.0 * h)
    return grad, calls


@dataclass
class ChainRuleReport:
    """Gridwise comparison of d/dt f(theta(t)) against <u, theta_dot>."""

    grid: list
    lhs: list
    rhs: list
    abs_err: list
    pass_fraction: float
    exceptional_points: list
    skipped_points: list
    metadata: dict = field(default_factory=dict)

    def passed(self, threshold: float) -> bool:
        return self.pass_fraction >= threshold

    def to_json_dict(self) -> dict:
        return {
            "grid": self.grid,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "abs_err": self.abs_err,
            "pass_fraction": self.pass_fraction,
            "exceptional_points": self.exceptional_points,
            "skipped_points": self.skipped_points,
            "metadata": self.metadata,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "lhs", "rhs", "err"])
        for t, a, b, e in zip(self.grid, self.lhs, self.rhs, self.abs_err):
            writer.writerow([repr(t), repr(a), repr(b), repr(e)])
        return buf.getvalue()


def chain_rule_check(
    p: ParametricProblem,
    curve: Curve,
    n_grid: int = 201,
    h: float = 1e-5,
    tol: float = 1e-4,
    opts: Optional[SolveOptions] = None,
    use_oracle: bool = True,
) -> ChainRuleReport:
    """Chain-rule agreement along a curve on a uniform grid of [0, 1].

    A grid point passes when |lhs - rhs| <= tol * (1 + |lhs|) with lhs the
    central difference of t -> f(theta(t)) at step h and rhs the inner
    product of the adjoint output with the curve velocity.  Points within
    1e-8 of a declared breakpoint are shifted by half a grid step; solver
    failures are recorded as skipped.
    """
    if n_grid < 3:
        raise ValueError("n_grid must be >= 3")
    if curve.q != p.q:
        raise ValueError(f"curve dimension {curve.q} != problem q {p.q}")
    opts = opts or SolveOptions()

    half = 0.5 / (n_grid - 1)
    ts = []
    for t in np.linspace(0.0, 1.0, n_grid):
        for b in curve.breakpoints:
            if abs(t - b) < 1e-8:
                t = t + half if t + half <= 1.0 else t - half
                break
        ts.append(float(t))

    grid, lhs_list, rhs_list, err_list = [], [], [], []
    exceptional, skipped = [], []
    n_pass = 0
    for t in ts:
        try:
            f_plus = value(p, curve.theta(t + h), opts, use_oracle=use_oracle)
            f_minus = value(p, curve.theta(t - h), opts, use_oracle=use_oracle)
            u = asm(p, curve.theta(t), opts, use_oracle=use_oracle).u
        except SolverError:
            skipped.append(t)
            continue
        lhs = (f_plus - f_minus) / (2.0 * h)
        rhs = float(u @ curve.theta_dot(t))
        err = abs(lhs - rhs)
        ok = err <= tol * (1.0 + abs(lhs))
        grid.append(t)
        lhs_list.append(lhs)
        rhs_list.append(rhs)
        err_list.append(err)
        if ok:
            n_pass += 1
        else:
            exceptional.append(t)

    evaluated = len(grid)
    frac = n_pass / evaluated if evaluated else 0.0
    return ChainRuleReport(
        grid=grid,
        lhs=lhs_list,
        rhs=rhs_list,
        abs_err=err_list,
        pass_fraction=frac,
        exceptional_points=exceptional,
        skipped_points=skipped,
        metadata={
            "problem": p.name,
            "curve": curve.describe(),
            "n_grid": n_grid,
            "h": h,
            "tol": tol,
        },
    )


@dataclass
class DiniReport:
    """Difference quotients against the sandwich [min <u,d>, max <u,d>]."""

    lo: float
    hi: float
    steps: list
    quotients: list
    inside: list  # per-step inclusion at tolerance
    passed: bool  # inclusion at the smallest step
    metadata: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "interval": [self.lo, self.hi],
            "steps": self.steps,
            "quotients": self.quotients,
            "inside": self.inside,
            "passed": self.passed,
            "metadata": self.metadata,
        }


def dini_sandwich_check(
    p: ParametricProblem,
    theta,
    d,
    h_list: Sequence[float] = (1e-2, 1e-3, 1e-4),
    kkt_points: Optional[list] = None,
    tol: float = 1e-3,
    opts: Optional[SolveOptions] = None,
    use_oracle: bool = True,
) -> DiniReport:
    """Directional difference quotients versus the adjoint-output interval.

    ``kkt_points`` defaults to the problem's notable points at theta (or the
    single solved point).  Each point must be certified; the report gates on
    the quotient at the smallest step, where the one-sided limit is best
    approximated.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    if not np.any(d):
        raise ValueError("direction d must be nonzero")
    opts = opts or SolveOptions()

    if kkt_points is None:
        if p.known_kkt_points is not None:
            kkt_points = p.known_kkt_points(theta)
        else:
            kkt_points = [solve_primal_dual(p, theta, opts, use_oracle=use_oracle)]
    for pt in kkt_points:
        if not np.allclose(p.theta_vec(pt.theta), theta, atol=1e-12):
            raise ValueError("kkt_points must all sit at the requested theta")

    us = [asm_from_point(p, pt).u for pt in kkt_points]
    dots = [float(u @ d) for u in us]
    lo, hi = min(dots), max(dots)

    f0 = value(p, theta, opts, use_oracle=use_oracle)
    steps = sorted(float(t) for t in h_list)
    quotients, inside = [], []
    for t in steps:
        quot = (value(p, theta + t * d, opts, use_oracle=use_oracle) - f0) / t
        quotients.append(quot)
        inside.append(bool(lo - tol <= quot <= hi + tol))
    return DiniReport(
        lo=lo,
        hi=hi,
        steps=steps,
        quotients=quotients,
        inside=inside,
        passed=inside[0],
        metadata={
            "problem": p.name,
            "theta": theta.tolist(),
            "d": d.tolist(),
            "tol": tol,
            "n_points": len(kkt_points),
        },
    )


@dataclass
class CostReport:
    """Solver-call accounting of the adjoint method versus central
    differences, after the cheap-gradient cost bound."""

    asm_calls: int
    fd_calls: int
    q: int
    cheap_gradient_ok: bool  # asm_calls < fd_calls, i.e. 1 < 2q
    u: list
    fd: list
    max_diff: float
    asm_seconds: Optional[float] = None
    fd_seconds: Optional[float] = None

    def to_json_dict(self) -> dict:
        d = {
            "asm_calls": self.asm_calls,
            "fd_calls": self.fd_calls,
            "q": self.q,
            "cheap_gradient_ok": self.cheap_gradient_ok,
            "u": self.u,
            "fd": self.fd,
            "max_diff": self.max_diff,
        }
        if self.asm_seconds is not None:
            d["asm_seconds"] = self.asm_seconds
            d["fd_seconds"] = self.fd_seconds
        return d


def cost_report(
    p: ParametricProblem,
    theta,
    opts: Optional[SolveOptions] = None,
    h: float = 1e-5,
    use_oracle: bool = True,
    include_timings: bool = True,
) -> CostReport:
    """Run both gradient routes and account their primal-dual solve counts."""
    opts = opts or SolveOptions()
    t0 = time.perf_counter()
    ag = asm(p, theta, opts, use_oracle=use_oracle)
    t1 = time.perf_counter()
    fd, fd_calls = finite_diff_gradient(p, theta, h, opts, use_oracle=use_oracle)
    t2 = time.perf_counter()
    return CostReport(
        asm_calls=ag.solver_calls,
        fd_calls=fd_calls,
        q=p.q,
        cheap_gradient_ok=ag.solver_calls < fd_calls,
        u=ag.u.tolist(),
        fd=fd.tolist(),
        max_diff=float(np.max(np.abs(ag.u - fd))) if p.q else 0.0,
        asm_seconds=(t1 - t0) if include_timings else None,
        fd_seconds=(t2 - t1) if include_timings else None,
    )
