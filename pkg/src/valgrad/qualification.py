"""Numerical constraint-qualification checks.

``check_mfcq`` decides the Mangasarian-Fromovitz condition exactly, in its
primal (direction) form, by solving one linear program.  ``check_rcq``
attacks the conic condition "jac_x(C)^T lam = 0 with lam in the normal cone
at C and ||lam|| = 1 forces lam = 0" by projected gradient over the normal
cone; a near-zero margin certifies failure with an explicit witness, while a
positive margin is only sampled evidence of success.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.optimize

from .problem import NlpProblem, ParametricProblem, PrimalDualPoint

__all__ = ["QualificationReport", "check_mfcq", "check_rcq"]


@dataclass(frozen=True)
class QualificationReport:
    """Outcome of a qualification check.

    margin is the strict-feasibility slack for the MFCQ linear program, or
    the smallest sampled value of ||jac_x(C)^T lam|| over admissible unit
    multipliers for the RCQ surrogate (+inf when no admissible multiplier
    exists).  ``note`` records that the check samples a single point; the
    qualification hypotheses of the theory quantify over the whole feasible
    set, which no finite procedure can certify.
    """

    qualified: bool
    margin: float
    witness: Optional[np.ndarray]
    method: str  # "lp_exact" | "residual_heuristic"
    note: str = "point sample only; whole-set qualification is out of reach"

    def to_json_dict(self) -> dict:
        return {
            "qualified": self.qualified,
            "margin": self.margin,
            "witness": None if self.witness is None else np.asarray(self.witness).tolist(),
            "method": self.method,
            "note": self.note,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def check_mfcq(
    p: NlpProblem,
    x,
    theta,
    active_tol: float = 1e-8,
) -> QualificationReport:
    """Exact MFCQ check at a feasible point of an NLP-form problem.

    Solves  max s  subject to  grad_x(g_i) . d + s <= 0 for active i,
    jac_x(H) d = 0, ||d||_inf <= 1, and additionally requires jac_x(H) to
    have full row rank.  MFCQ holds iff the optimum s is positive.

    Parameters
    ----------
    p : NlpProblem
    x, theta : array_like
        A point feasible within ``active_tol``.
    active_tol : float
        Activity threshold |g_i| <= active_tol and feasibility slack.

    Returns
    -------
    QualificationReport
        margin = optimal s, witness = the maximizing direction d.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta = p.theta_vec(theta)
    g = np.asarray(p.g(x, theta), dtype=float) if p.m_g else np.zeros(0)
    h = np.asarray(p.h(x, theta), dtype=float) if p.m_h else np.zeros(0)
    if np.any(g > active_tol) or np.any(np.abs(h) > active_tol):
        raise ValueError("point is not feasible within active_tol")

    rank_ok = True
    jh = np.asarray(p.h_jac_x(x, theta), dtype=float) if p.m_h else np.zeros((0, p.n))
    if p.m_h > 0:
        sv = np.linalg.svd(jh, compute_uv=False)
        rank_ok = bool(np.sum(sv > 1e-10 * np.linalg.norm(jh)) == p.m_h)

    active = np.nonzero(np.abs(g) <= active_tol)[0]
    if active.size == 0:
        margin = math.inf
        return QualificationReport(rank_ok, margin if rank_ok else 0.0, None, "lp_exact")

    jg = np.asarray(p.g_jac_x(x, theta), dtype=float)[active]
    n = p.n
    # variables (d, s); maximize s
    c = np.zeros(n + 1)
    c[-1] = -1.0
    a_ub = np.hstack([jg, np.ones((active.size, 1))])
    b_ub = np.zeros(active.size)
    a_eq = b_eq = None
    if p.m_h > 0:
        a_eq = np.hstack([jh, np.zeros((p.m_h, 1))])
        b_eq = np.zeros(p.m_h)
    bounds = [(-1.0, 1.0)] * n + [(None, None)]
    lp = scipy.optimize.linprog(
        c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds, method="highs"
    )
    if not lp.success:
        return QualificationReport(False, 0.0, None, "lp_exact")
    s = float(-lp.fun)
    d = np.asarray(lp.x[:n])
    qualified = rank_ok and s > 0.0
    return QualificationReport(qualified, s if rank_ok else 0.0, d, "lp_exact")


def check_rcq(
    p: ParametricProblem,
    pt: PrimalDualPoint,
    n_samples: int = 16,
    seed: int = 0,
    active_tol: float = 1e-8,
    max_iter: int = 400,
) -> QualificationReport:
    """Residual heuristic for Robinson's qualification at a feasible point.

    Minimizes ||jac_x(C)^T lam|| over unit multipliers in the normal cone
    N_K(C(x, theta)) by projected gradient from ``n_samples`` seeded starts.
    margin ~ 0 exhibits a violating witness; a positive margin is evidence,
    not proof, that the qualification holds at the point.
    """
    if p.m == 0:
        return QualificationReport(True, math.inf, None, "residual_heuristic")

    x = p.x_vec(pt.x)
    theta = p.theta_vec(pt.theta)
    a = np.asarray(p.constraint_jac_x(x, theta), dtype=float)  # (m, n)
    c = np.asarray(p.constraint(x, theta), dtype=float)
    gram = a @ a.T
    lip = float(np.linalg.eigvalsh(gram)[-1]) if p.m else 0.0
    eta = 1.0 / lip if lip > 0 else 1.0

    rng = np.random.default_rng(seed)
    best_obj = math.inf
    best_lam = None
    for _ in range(n_samples):
        lam = p.cone.project_normal(c, rng.standard_normal(p.m), active_tol)
        nrm = float(np.linalg.norm(lam))
        if nrm < 1e-14:
            continue  # this start collapsed; the normal cone may be {0}
        lam /= nrm
        for _ in range(max_iter):
            lam = lam - eta * (gram @ lam)
            lam = p.cone.project_normal(c, lam, active_tol)
            nrm = float(np.linalg.norm(lam))
            if nrm < 1e-14:
                break
            lam /= nrm
        if float(np.linalg.norm(lam)) < 0.5:
            continue
        obj = float(np.linalg.norm(a.T @ lam))
        if obj < best_obj:
            best_obj = obj
            best_lam = lam.copy()

    if best_lam is None:
        # no unit multiplier satisfies the normal-cone constraints, so the
        # implication holds vacuously
        return QualificationReport(True, math.inf, None, "residual_heuristic")
    qualified = best_obj > 1e-6
    return QualificationReport(qualified, best_obj, best_lam, "residual_heuristic")
