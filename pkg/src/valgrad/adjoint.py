"""Surrogate gradients for the value function by the adjoint state method.

Given a primal-dual solution (x, lam) at theta and a conservative-gradient
selection (v, w) of the objective, the output is

    u = w + jac_theta(C)(x, theta)^T lam,

the theta-gradient of the Lagrangian at the solution.  Membership of (0, u)
in the conservative field of the value function additionally requires the
x-block to vanish, so ``x_block_residual = ||v + jac_x(C)^T lam||`` is
computed and certified alongside.  One primal-dual solve is all the method
costs; no derivative of the solution map is ever formed.

For nonsmooth objectives a single selection may fail to witness membership,
which lives in the convex hull of the field.  When a problem exposes a
selection sampler, extra selections are drawn and combined by nonnegative
least squares into convex weights that minimize the x-block residual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.optimize

from .problem import NlpProblem, ParametricProblem, PrimalDualPoint, nlp_to_conic
from .solver import SolveOptions, SolverError, kkt_residual, solve_primal_dual

__all__ = ["AdjointGradient", "asm", "asm_from_point", "asm_nlp", "CERTIFICATION_RTOL"]

CERTIFICATION_RTOL = 1e-6
POINT_CHECK_TOL = 1e-6


@dataclass(frozen=True)
class AdjointGradient:
    """Output of the adjoint formula plus its membership certificate."""

    u: np.ndarray
    x_block_residual: float
    source: PrimalDualPoint
    solver_calls: int
    certified: bool
    weights: Optional[np.ndarray] = None  # convex weights when selections were combined

    def to_json_dict(self) -> dict:
        d = {
            "u": self.u.tolist(),
            "x_block_residual": self.x_block_residual,
            "solver_calls": self.solver_calls,
            "certified": self.certified,
            "point": self.source.to_json_dict(),
        }
        if self.weights is not None:
            d["weights"] = self.weights.tolist()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _convex_combination(vs: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Convex weights minimizing ||vs @ weights + target||.

    Solved as nonnegative least squares with a heavily weighted sum-to-one
    row, then renormalized.
    """
    k = vs.shape[1]
    scale = 1e6 * max(1.0, float(np.abs(vs).max()), float(np.abs(target).max()))
    a = np.vstack([vs, scale * np.ones((1, k))])
    b = np.concatenate([-target, [scale]])
    w, _ = scipy.optimize.nnls(a, b)
    s = w.sum()
    return w / s if s > 0 else np.full(k, 1.0 / k)


def _evaluate(p: ParametricProblem, pt: PrimalDualPoint, solver_calls: int,
              extra_selections: int, seed: int) -> AdjointGradient:
    x = p.x_vec(pt.x)
    theta = p.theta_vec(pt.theta)
    lam = np.atleast_1d(np.asarray(pt.lam, dtype=float))

    v, w = p.grad_selection(x, theta)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if p.m > 0:
        jx = np.asarray(p.constraint_jac_x(x, theta), dtype=float)
        jt = np.asarray(p.constraint_jac_theta(x, theta), dtype=float)
        pull_x = jx.T @ lam
        pull_t = jt.T @ lam
    else:
        pull_x = np.zeros(p.n)
        pull_t = np.zeros(p.q)

    u = w + pull_t
    resid = float(np.linalg.norm(v + pull_x))
    weights = None

    tol = CERTIFICATION_RTOL * (1.0 + float(np.linalg.norm(v)))
    if resid > tol and p.selection_sampler is not None and extra_selections > 0:
        sels = [(v, w)] + list(p.selection_sampler(x, theta, seed, extra_selections))
        vs = np.column_stack([np.asarray(s[0], dtype=float) for s in sels])
        ws = np.column_stack([np.asarray(s[1], dtype=float) for s in sels])
        weights = _convex_combination(vs, pull_x)
        v_mix = vs @ weights
        u = ws @ weights + pull_t
        resid = float(np.linalg.norm(v_mix + pull_x))
        tol = CERTIFICATION_RTOL * (1.0 + float(np.linalg.norm(v_mix)))

    return AdjointGradient(
        u=u,
        x_block_residual=resid,
        source=pt,
        solver_calls=solver_calls,
        certified=resid <= tol,
        weights=weights,
    )


def asm(
    p: ParametricProblem,
    theta,
    opts: Optional[SolveOptions] = None,
    use_oracle: bool = True,
    extra_selections: int = 8,
) -> AdjointGradient:
    """Adjoint surrogate gradient at theta from one primal-dual solve.

    Solver failure raises :class:`SolverError`; a certification failure
    (nonvanishing x-block) is flagged on the result, never dropped.
    """
    opts = opts or SolveOptions()
    pt = solve_primal_dual(p, theta, opts, use_oracle=use_oracle)
    if pt.status == "failed":
        raise SolverError(f"solve failed for {p.name!r} at theta={np.asarray(theta)}")
    return _evaluate(p, pt, solver_calls=1, extra_selections=extra_selections, seed=opts.seed)


def asm_from_point(
    p: ParametricProblem,
    pt: PrimalDualPoint,
    check_tol: float = POINT_CHECK_TOL,
    extra_selections: int = 8,
    seed: int = 0,
) -> AdjointGradient:
    """Adjoint formula at a caller-supplied primal-dual point.

    The point must satisfy primal/dual feasibility and complementarity at
    ``check_tol``.  The stationarity block is also required for smooth
    objectives; for nonsmooth ones a large single-selection residual is
    handled by the convex-combination fallback and surfaces through the
    ``certified`` flag.  Counts zero solver calls.
    """
    res = kkt_residual(p, pt)
    feas_bad = max(res.primal_feas, res.dual_feas, res.complementarity) > check_tol
    stat_bad = p.smooth and res.stationarity > check_tol
    if feas_bad or stat_bad:
        raise ValueError(
            f"point rejected: KKT residuals exceed {check_tol:g} "
            f"(stationarity={res.stationarity:.2e}, primal={res.primal_feas:.2e}, "
            f"dual={res.dual_feas:.2e}, complementarity={res.complementarity:.2e})"
        )
    return _evaluate(p, pt, solver_calls=0, extra_selections=extra_selections, seed=seed)


def asm_nlp(
    p: NlpProblem,
    theta,
    opts: Optional[SolveOptions] = None,
    use_oracle: bool = True,
) -> AdjointGradient:
    """Adjoint gradient for an NLP-form problem via its conic conversion.

    Identical to ``asm`` on ``nlp_to_conic(p)``; the stacked multiplier on
    the returned point splits back into (lam, mu) with
    ``p.split_multipliers``.
    """
    return asm(nlp_to_conic(p), theta, opts, use_oracle=use_oracle)
