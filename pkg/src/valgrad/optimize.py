"""Small-step descent on the value function with the adjoint oracle.

Iterates ``theta_{k+1} = theta_k - s * alpha_k * u_k`` where ``u_k`` is the
adjoint surrogate gradient, ``s > 0`` is a step constant and ``alpha_k`` a
vanishing schedule.  Bounded runs accumulate at Clarke-critical parameters;
the excluded starting points and step constants form null/finite sets, which
seeded random choices avoid with probability one.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adjoint import asm
from .problem import ParametricProblem
from .solver import SolveOptions, SolverError

__all__ = ["DescentTrace", "small_step_descent", "SCHEDULES"]

SCHEDULES = {
    "harmonic": lambda k, a0: a0 / (k + 1.0),
    "sqrt": lambda k, a0: a0 / math.sqrt(k + 1.0),
}

DIVERGENCE_BOUND = 1e6


@dataclass
class DescentTrace:
    thetas: list  # iterates theta_k, each an ndarray
    values: list  # f(theta_k)
    asm_norms: list  # ||u_k||
    step_s: float
    schedule: str  # e.g. "alpha0/(k+1)" with alpha0 filled in
    stop_reason: str  # grad_tol | max_iter | solver_failure | unbounded

    def to_json_dict(self) -> dict:
        return {
            "iterations": len(self.thetas) - 1,
            "theta_final": self.thetas[-1].tolist(),
            "f_final": self.values[-1],
            "asm_norm_final": self.asm_norms[-1],
            "step_s": self.step_s,
            "schedule": self.schedule,
            "stop_reason": self.stop_reason,
        }

    def to_csv(self) -> str:
        q = len(self.thetas[0])
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k"] + [f"theta_{i}" for i in range(q)] + ["f", "u_norm"])
        for k, (th, f, un) in enumerate(zip(self.thetas, self.values, self.asm_norms)):
            writer.writerow([k] + [repr(c) for c in th] + [repr(f), repr(un)])
        return buf.getvalue()


def small_step_descent(
    p: ParametricProblem,
    theta0,
    s: float = 1.0,
    schedule: str = "harmonic",
    alpha0: float = 1.0,
    max_iter: int = 500,
    grad_tol: float = 1e-9,
    opts: Optional[SolveOptions] = None,
    use_oracle: bool = True,
) -> DescentTrace:
    """Run the small-step method from theta0; always returns the trace.

    Stops when ||u_k|| <= grad_tol, the iteration budget is exhausted, a
    solve fails (partial trace), or ||theta_k|| exceeds the divergence
    guard, mirroring the bounded-sequence hypothesis of the theory.
    """
    if s <= 0:
        raise ValueError("step constant s must be positive")
    if alpha0 <= 0:
        raise ValueError("alpha0 must be positive")
    if schedule not in SCHEDULES:
        raise ValueError(f"schedule must be one of {sorted(SCHEDULES)}")
    alpha = SCHEDULES[schedule]
    sched_desc = f"{alpha0:g}/(k+1)" if schedule == "harmonic" else f"{alpha0:g}/sqrt(k+1)"
    opts = opts or SolveOptions()

    theta = p.theta_vec(theta0).copy()
    thetas, values, norms = [], [], []
    stop = "max_iter"
    k = 0
    while True:
        try:
            ag = asm(p, theta, opts, use_oracle=use_oracle)
        except SolverError:
            stop = "solver_failure"
            break
        thetas.append(theta.copy())
        values.append(ag.source.objective_value)
        norms.append(float(np.linalg.norm(ag.u)))
        if norms[-1] <= grad_tol:
            stop = "grad_tol"
            break
        if k >= max_iter:
            stop = "max_iter"
            break
        theta = theta - s * alpha(k, alpha0) * ag.u
        k += 1
        if np.linalg.norm(theta) > DIVERGENCE_BOUND:
            stop = "unbounded"
            break

    if not thetas:
        # first solve failed; record the starting parameter with no value
        thetas = [theta.copy()]
        values = [math.nan]
        norms = [math.nan]
    return DescentTrace(thetas, values, norms, s, sched_desc, stop)
