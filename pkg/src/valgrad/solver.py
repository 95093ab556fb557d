"""Primal-dual solves and KKT residual certification for conic programs.

The embedded method is an augmented Lagrangian over the cone constraint:
minimize ``F(x, theta) + (rho/2) * dist(K, C(x, theta) + lam/rho)^2`` in x
with a bounded quasi-Newton inner loop, update
``lam <- rho * (C + lam/rho - proj_K(C + lam/rho))`` (which lands in the
polar cone by the Moreau decomposition), and grow rho whenever feasibility
stalls.  Multiple seeded starts guard against spurious stationary points of
nonconvex objectives; the lowest certified objective wins.

Solver failure is a value (``status == "failed"``), never an exception, so
verification sweeps can skip bad grid points; :func:`value` converts it to
:class:`SolverError` for callers that need a number.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.optimize

from .cones import in_normal_cone
from .problem import ParametricProblem, PrimalDualPoint

__all__ = [
    "SolverError",
    "SolveOptions",
    "KKTResidual",
    "SolveReport",
    "kkt_residual",
    "solve_primal_dual",
    "value",
]


class SolverError(RuntimeError):
    """Raised when a numeric result is required but the solve failed."""


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-9
    max_outer: int = 100
    max_inner: int = 500
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    multiplier_clip: float = 1e8
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty_growth must exceed 1")

    def to_json_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s) -> "SolveOptions":
        d = json.loads(s) if isinstance(s, str) else dict(s)
        return cls(**d)


@dataclass(frozen=True)
class KKTResidual:
    """Residuals of the conic KKT system at a primal-dual point.

    stationarity   ||v + jac_x(C)^T lam|| with v the objective's x-block
                   gradient selection
    primal_feas    dist(K, C(x, theta))
    dual_feas      dist(polar K, lam)
    complementarity  |<C(x, theta), lam>|
    value_gap      F(x, theta) - known f(theta), when a closed form exists
    """

    stationarity: float
    primal_feas: float
    dual_feas: float
    complementarity: float
    value_gap: Optional[float] = None

    @property
    def max_residual(self) -> float:
        return max(self.stationarity, self.primal_feas, self.dual_feas, self.complementarity)

    def to_json_dict(self) -> dict:
        d = {
            "stationarity": self.stationarity,
            "primal_feas": self.primal_feas,
            "dual_feas": self.dual_feas,
            "complementarity": self.complementarity,
            "max_residual": self.max_residual,
        }
        if self.value_gap is not None:
            d["value_gap"] = self.value_gap
        return d


@dataclass
class SolveReport:
    """Diagnostics of an iterative solve (empty for oracle shortcuts)."""

    outer_iterations: int = 0
    inner_iterations: int = 0
    start_index: int = -1
    feasibility_trace: list = None  # best-so-far distances, nonincreasing

    def __post_init__(self):
        if self.feasibility_trace is None:
            self.feasibility_trace = []


def kkt_residual(p: ParametricProblem, pt: PrimalDualPoint) -> KKTResidual:
    x = p.x_vec(pt.x)
    theta = p.theta_vec(pt.theta)
    lam = np.atleast_1d(np.asarray(pt.lam, dtype=float))
    if lam.shape != (p.m,):
        raise ValueError(f"lam has shape {lam.shape}, expected ({p.m},)")

    v, _ = p.grad_selection(x, theta)
    v = np.asarray(v, dtype=float)
    if p.m > 0:
        jac_x = np.asarray(p.constraint_jac_x(x, theta), dtype=float)
        stationarity = float(np.linalg.norm(v + jac_x.T @ lam))
        c = p.constraint(x, theta)
        primal = p.cone.distance(c)
        dual = p.cone.polar().distance(lam)
        comp = abs(float(c @ lam))
    else:
        stationarity = float(np.linalg.norm(v))
        primal = dual = comp = 0.0

    gap = None
    if p.known_value is not None:
        gap = float(p.objective(x, theta) - p.known_value(theta))
    return KKTResidual(stationarity, primal, dual, comp, gap)


# travel bound per inner solve; keeps unbounded augmented-Lagrangian
# subproblems (bilinear objectives) from running away while leaving desk
# scale solutions untouched
_INNER_TRAVEL = 100.0
_N_STARTS = 4


def _auglag_from(p: ParametricProblem, theta: np.ndarray, x0: np.ndarray, opts: SolveOptions):
    cone = p.cone
    lam = np.zeros(p.m)
    rho = opts.penalty_init
    x = x0.copy()
    feas_best = np.inf
    trace = []
    inner_total = 0

    for outer in range(opts.max_outer):
        if p.m > 0:
            inner_tol = max(0.05 * opts.tol, min(1e-4, 0.1 * feas_best))
        else:
            inner_tol = 0.05 * opts.tol

        if p.m > 0:

            def fun(xv, lam=lam, rho=rho):
                c = p.constraint(xv, theta)
                z = c + lam / rho
                resid = z - cone.project(z)
                val = p.objective(xv, theta) + 0.5 * rho * float(resid @ resid)
                v, _ = p.grad_selection(xv, theta)
                grad = np.asarray(v, dtype=float) + rho * (
                    np.asarray(p.constraint_jac_x(xv, theta), dtype=float).T @ resid
                )
                return val, grad

        else:

            def fun(xv):
                v, _ = p.grad_selection(xv, theta)
                return p.objective(xv, theta), np.asarray(v, dtype=float)

        bounds = [(xi - _INNER_TRAVEL, xi + _INNER_TRAVEL) for xi in x]
        res = scipy.optimize.minimize(
            fun,
            x,
            jac=True,
            method="L-BFGS-B",
            bounds=bounds,
            options={
                "maxiter": opts.max_inner,
                "ftol": 1e-18,
                "gtol": inner_tol / max(1.0, np.sqrt(p.n)),
            },
        )
        x = res.x
        inner_total += int(res.nit)

        if p.m > 0:
            c = p.constraint(x, theta)
            z = c + lam / rho
            lam_new = rho * (z - cone.project(z))
            nl = float(np.linalg.norm(lam_new))
            if nl > opts.multiplier_clip:
                lam_new *= opts.multiplier_clip / nl
            feas = cone.distance(c)
        else:
            lam_new = lam
            feas = 0.0

        feas_prev = feas_best
        feas_best = min(feas_best, feas)
        trace.append(feas_best)
        lam = lam_new

        candidate = PrimalDualPoint(
            theta, x.copy(), lam.copy(), "solved", float(p.objective(x, theta)) + 0.0
        )
        res_kkt = kkt_residual(p, candidate)
        if res_kkt.max_residual <= opts.tol:
            return candidate, res_kkt, SolveReport(outer + 1, inner_total, -1, trace)

        if p.m == 0:
            if outer >= 2:
                break  # unconstrained: a few quasi-Newton polish rounds at most
            continue
        if feas > 0.25 * feas_prev:
            rho = min(rho * opts.penalty_growth, 1e14)

    candidate = PrimalDualPoint(
        theta, x.copy(), lam.copy(), "failed", float(p.objective(x, theta)) + 0.0
    )
    return candidate, kkt_residual(p, candidate), SolveReport(opts.max_outer, inner_total, -1, trace)


def solve_primal_dual(
    p: ParametricProblem,
    theta,
    opts: Optional[SolveOptions] = None,
    use_oracle: bool = True,
    with_report: bool = False,
):
    """Return a primal-dual point for ``p`` at ``theta``.

    A solution oracle, when present, is used directly unless ``use_oracle``
    is false.  The iterative path requires the smoothness flag and runs the
    augmented Lagrangian from several seeded starts, keeping the certified
    point with the lowest objective.  The returned status is ``"failed"``
    when no start meets ``opts.tol``; no exception is raised.
    """
    opts = opts or SolveOptions()
    theta = p.theta_vec(theta)

    if use_oracle and p.solution_oracle is not None:
        pt = p.solution_oracle(theta)
        return (pt, SolveReport()) if with_report else pt

    if not p.smooth:
        raise ValueError(
            f"problem {p.name!r} is nonsmooth and has no solution oracle; "
            "the embedded solver requires the smoothness flag"
        )

    rng = np.random.default_rng(opts.seed)
    starts = [np.zeros(p.n)] + [rng.standard_normal(p.n) for _ in range(_N_STARTS - 1)]

    best = None  # (objective, point, report)
    fallback = None  # least max-residual among failures
    for idx, x0 in enumerate(starts):
        pt, res, report = _auglag_from(p, theta, x0, opts)
        report.start_index = idx
        if pt.status == "solved":
            if best is None or pt.objective_value < best[0]:
                best = (pt.objective_value, pt, report)
        else:
            if fallback is None or res.max_residual < fallback[0]:
                fallback = (res.max_residual, pt, report)

    if best is not None:
        _, pt, report = best
    else:
        _, pt, report = fallback
    return (pt, report) if with_report else pt


def value(p: ParametricProblem, theta, opts: Optional[SolveOptions] = None, use_oracle: bool = True) -> float:
    """f(theta): the objective at the solved or oracle point."""
    pt = solve_primal_dual(p, theta, opts, use_oracle=use_oracle)
    if pt.status == "failed":
        raise SolverError(f"solve failed for {p.name!r} at theta={np.asarray(theta)}")
    return pt.objective_value


def solved_point_in_normal_cone(p: ParametricProblem, pt: PrimalDualPoint, tol: float):
    """Convenience wrapper used by tests: lam in N_K(C(x, theta)) check."""
    if p.m == 0:
        return True
    c = p.constraint(p.x_vec(pt.x), p.theta_vec(pt.theta))
    return in_normal_cone(p.cone, c, pt.lam, tol).ok
