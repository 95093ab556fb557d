"""Problem model for parametric conic programs and the built-in library.

A :class:`ParametricProblem` packages the objective ``F(x, theta)``, a
selection of its (conservative) gradient, the constraint map ``C(x, theta)``
with both partial Jacobians, and the cone ``K`` such that the feasible set is
``{x : C(x, theta) in K}``.  Nonlinear-programming form problems
(``G <= 0``, ``H = 0``) convert losslessly through :func:`nlp_to_conic` with
``K = R^mg_- x {0}^mh``.

The library of worked examples:

==============  ====  ===  ====  =====================================
name            n     q    m     value function
==============  ====  ===  ====  =====================================
failclarke      2     1    3     f == 0 (adjoint outputs 1 at theta=0)
scalar_qp       1     1    1     0.5 * max(theta, 0)^2
ring            2     1    0     min(theta, 0)^2
soc_norm        1     q    q+1   ||theta||
bilevel_quad    q     q    q     0.5 * ||max(theta, 0)||^2
==============  ====  ===  ====  =====================================
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .cones import Cone, NonpositiveOrthant, Product, SecondOrder, Zero

__all__ = [
    "PrimalDualPoint",
    "ParametricProblem",
    "NlpProblem",
    "nlp_to_conic",
    "library",
    "library_nlp",
    "problem_names",
    "problem_info",
    "check_problem",
]

Array = np.ndarray


def _vec(v, dim: int, what: str) -> Array:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (dim,):
        raise ValueError(f"{what} has shape {v.shape}, expected ({dim},)")
    return v


@dataclass(frozen=True)
class PrimalDualPoint:
    """A primal-dual pair (x, lam) at a parameter theta."""

    theta: Array
    x: Array
    lam: Array
    status: str  # "oracle" | "solved" | "failed"
    objective_value: float

    def to_json_dict(self) -> dict:
        return {
            "theta": self.theta.tolist(),
            "x": self.x.tolist(),
            "lam": self.lam.tolist(),
            "status": self.status,
            "objective_value": self.objective_value,
        }


@dataclass(frozen=True)
class ParametricProblem:
    """min_x F(x, theta) subject to C(x, theta) in K.

    ``grad_selection(x, theta)`` returns ``(v, w)``, a selection of the
    conservative field of F split into its x-block and theta-block; for a
    smooth F this is the exact partial-gradient pair.  ``cone`` is ``None``
    exactly when ``m == 0`` (no constraint).
    """

    name: str
    n: int
    q: int
    m: int
    objective: Callable[[Array, Array], float]
    grad_selection: Callable[[Array, Array], tuple]
    constraint: Callable[[Array, Array], Array]
    constraint_jac_x: Callable[[Array, Array], Array]
    constraint_jac_theta: Callable[[Array, Array], Array]
    cone: Optional[Cone]
    solution_oracle: Optional[Callable[[Array], PrimalDualPoint]] = None
    smooth: bool = True
    known_value: Optional[Callable[[Array], float]] = None
    known_gradient: Optional[Callable[[Array], Array]] = None
    # distance from theta to the parameters where f may be nondifferentiable
    # or the conservative field multivalued; used by tests to stay clear
    kink_distance: Optional[Callable[[Array], float]] = None
    # notable KKT points beyond the oracle's single representative
    known_kkt_points: Optional[Callable[[Array], list]] = None
    # seeded sampler of extra conservative-gradient selections at (x, theta)
    selection_sampler: Optional[Callable[[Array, Array, int, int], list]] = None

    def __post_init__(self):
        if self.m > 0:
            if self.cone is None or self.cone.dim != self.m:
                raise ValueError("cone.dim must equal the constraint dimension m")
        elif self.cone is not None:
            raise ValueError("an unconstrained problem (m=0) takes cone=None")

    def theta_vec(self, theta) -> Array:
        return _vec(theta, self.q, "theta")

    def x_vec(self, x) -> Array:
        return _vec(x, self.n, "x")


@dataclass(frozen=True)
class NlpProblem:
    """min_x F(x, theta) subject to G(x, theta) <= 0, H(x, theta) = 0."""

    name: str
    n: int
    q: int
    m_g: int
    m_h: int
    objective: Callable[[Array, Array], float]
    grad_selection: Callable[[Array, Array], tuple]
    g: Callable[[Array, Array], Array]
    g_jac_x: Callable[[Array, Array], Array]
    g_jac_theta: Callable[[Array, Array], Array]
    h: Callable[[Array, Array], Array]
    h_jac_x: Callable[[Array, Array], Array]
    h_jac_theta: Callable[[Array, Array], Array]
    solution_oracle: Optional[Callable[[Array], PrimalDualPoint]] = None
    smooth: bool = True
    known_value: Optional[Callable[[Array], float]] = None
    known_gradient: Optional[Callable[[Array], Array]] = None
    kink_distance: Optional[Callable[[Array], float]] = None
    known_kkt_points: Optional[Callable[[Array], list]] = None
    selection_sampler: Optional[Callable[[Array, Array, int, int], list]] = None

    def split_multipliers(self, lam: Array) -> tuple:
        """Split a stacked conic multiplier into (lam_g, mu)."""
        lam = _vec(lam, self.m_g + self.m_h, "lam")
        return lam[: self.m_g], lam[self.m_g :]

    def theta_vec(self, theta) -> Array:
        return _vec(theta, self.q, "theta")


def nlp_to_conic(p: NlpProblem) -> ParametricProblem:
    """Stack (G, H) into C and build K = R^mg_- x {0}^mh.

    Multipliers concatenate as (lam, mu); metadata (oracle, known value
    function, ...) carries over unchanged since the stacking is the identity
    on each block.
    """
    mg, mh = p.m_g, p.m_h
    m = mg + mh
    if mg > 0 and mh > 0:
        cone: Optional[Cone] = Product((NonpositiveOrthant(mg), Zero(mh)))
    elif mg > 0:
        cone = NonpositiveOrthant(mg)
    elif mh > 0:
        cone = Zero(mh)
    else:
        cone = None

    if mg > 0 and mh > 0:
        constraint = lambda x, th: np.concatenate([p.g(x, th), p.h(x, th)])
        jac_x = lambda x, th: np.vstack([p.g_jac_x(x, th), p.h_jac_x(x, th)])
        jac_theta = lambda x, th: np.vstack([p.g_jac_theta(x, th), p.h_jac_theta(x, th)])
    elif mg > 0:
        constraint, jac_x, jac_theta = p.g, p.g_jac_x, p.g_jac_theta
    elif mh > 0:
        constraint, jac_x, jac_theta = p.h, p.h_jac_x, p.h_jac_theta
    else:
        constraint = lambda x, th: np.zeros(0)
        jac_x = lambda x, th: np.zeros((0, p.n))
        jac_theta = lambda x, th: np.zeros((0, p.q))

    return ParametricProblem(
        name=p.name,
        n=p.n,
        q=p.q,
        m=m,
        objective=p.objective,
        grad_selection=p.grad_selection,
        constraint=constraint,
        constraint_jac_x=jac_x,
        constraint_jac_theta=jac_theta,
        cone=cone,
        solution_oracle=p.solution_oracle,
        smooth=p.smooth,
        known_value=p.known_value,
        known_gradient=p.known_gradient,
        kink_distance=p.kink_distance,
        known_kkt_points=p.known_kkt_points,
        selection_sampler=p.selection_sampler,
    )


def check_problem(p: ParametricProblem, seed: int = 0, n_points: int = 3, rel_tol: float = 1e-6):
    """Self-test a problem's analytic derivatives against central differences.

    Raises ValueError on disagreement beyond ``rel_tol`` (relative to one
    plus the analytic magnitude).  Run on registration of every library
    problem.
    """
    rng = np.random.default_rng(seed)
    h = 1e-6
    for _ in range(n_points):
        x = rng.standard_normal(p.n)
        th = rng.standard_normal(p.q)

        if p.m > 0:
            jx = np.asarray(p.constraint_jac_x(x, th), dtype=float)
            jt = np.asarray(p.constraint_jac_theta(x, th), dtype=float)
            fd_x = np.zeros_like(jx)
            for i in range(p.n):
                e = np.zeros(p.n)
                e[i] = h
                fd_x[:, i] = (p.constraint(x + e, th) - p.constraint(x - e, th)) / (2 * h)
            fd_t = np.zeros_like(jt)
            for i in range(p.q):
                e = np.zeros(p.q)
                e[i] = h
                fd_t[:, i] = (p.constraint(x, th + e) - p.constraint(x, th - e)) / (2 * h)
            for aname, a, b in (("jac_x C", jx, fd_x), ("jac_theta C", jt, fd_t)):
                err = np.max(np.abs(a - b)) if a.size else 0.0
                if err > rel_tol * (1.0 + np.max(np.abs(a), initial=0.0)):
                    raise ValueError(f"{p.name}: {aname} disagrees with finite differences ({err:.2e})")

        if p.smooth:
            v, w = p.grad_selection(x, th)
            v = np.asarray(v, dtype=float)
            w = np.asarray(w, dtype=float)
            fd_v = np.zeros(p.n)
            for i in range(p.n):
                e = np.zeros(p.n)
                e[i] = h
                fd_v[i] = (p.objective(x + e, th) - p.objective(x - e, th)) / (2 * h)
            fd_w = np.zeros(p.q)
            for i in range(p.q):
                e = np.zeros(p.q)
                e[i] = h
                fd_w[i] = (p.objective(x, th + e) - p.objective(x, th - e)) / (2 * h)
            for aname, a, b in (("grad_x F", v, fd_v), ("grad_theta F", w, fd_w)):
                err = np.max(np.abs(a - b)) if a.size else 0.0
                if err > rel_tol * (1.0 + np.max(np.abs(a), initial=0.0)):
                    raise ValueError(f"{p.name}: {aname} disagrees with finite differences ({err:.2e})")


# ---------------------------------------------------------------------------
# library problems
# ---------------------------------------------------------------------------


def _failclarke_nlp() -> NlpProblem:
    # F = x1*x2, G = (x1, x2 - theta, x2 + theta), i.e. x1 <= 0, x2 <= -|theta|.
    def obj(x, th):
        return float(x[0] * x[1])

    def grad(x, th):
        return np.array([x[1], x[0]]), np.zeros(1)

    def g(x, th):
        return np.array([x[0], x[1] - th[0], x[1] + th[0]])

    def g_jx(x, th):
        return np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])

    def g_jt(x, th):
        return np.array([[0.0], [-1.0], [1.0]])

    def oracle(th):
        t = float(th[0])
        if t == 0.0:
            x = np.array([-1.0, 0.0])
            lam = np.array([0.0, 0.0, 1.0])
        else:
            x = np.array([0.0, -abs(t)])
            lam = np.array([abs(t), 0.0, 0.0])
        return PrimalDualPoint(np.array([t]), x, lam, "oracle", obj(x, th) + 0.0)

    def extra_points(th):
        t = float(th[0])
        pts = [oracle(th)]
        if t == 0.0:
            pts.append(
                PrimalDualPoint(np.array([0.0]), np.zeros(2), np.zeros(3), "oracle", 0.0)
            )
        return pts

    return NlpProblem(
        name="failclarke",
        n=2,
        q=1,
        m_g=3,
        m_h=0,
        objective=obj,
        grad_selection=grad,
        g=g,
        g_jac_x=g_jx,
        g_jac_theta=g_jt,
        h=lambda x, th: np.zeros(0),
        h_jac_x=lambda x, th: np.zeros((0, 2)),
        h_jac_theta=lambda x, th: np.zeros((0, 1)),
        solution_oracle=oracle,
        smooth=True,
        known_value=lambda th: 0.0,
        known_gradient=lambda th: np.zeros(1),
        kink_distance=lambda th: abs(float(th[0])),
        known_kkt_points=extra_points,
    )


def _scalar_qp_nlp() -> NlpProblem:
    # F = x^2 / 2, G = theta - x; f(theta) = max(theta, 0)^2 / 2.
    def oracle(th):
        t = float(th[0])
        xs = max(t, 0.0)
        return PrimalDualPoint(
            np.array([t]), np.array([xs]), np.array([xs]), "oracle", 0.5 * xs * xs
        )

    return NlpProblem(
        name="scalar_qp",
        n=1,
        q=1,
        m_g=1,
        m_h=0,
        objective=lambda x, th: float(0.5 * x[0] ** 2),
        grad_selection=lambda x, th: (x.copy(), np.zeros(1)),
        g=lambda x, th: np.array([th[0] - x[0]]),
        g_jac_x=lambda x, th: np.array([[-1.0]]),
        g_jac_theta=lambda x, th: np.array([[1.0]]),
        h=lambda x, th: np.zeros(0),
        h_jac_x=lambda x, th: np.zeros((0, 1)),
        h_jac_theta=lambda x, th: np.zeros((0, 1)),
        solution_oracle=oracle,
        smooth=True,
        known_value=lambda th: 0.5 * max(float(th[0]), 0.0) ** 2,
        known_gradient=lambda th: np.array([max(float(th[0]), 0.0)]),
        kink_distance=lambda th: abs(float(th[0])),
    )


def _ring_nlp() -> NlpProblem:
    # F = (||x||^2 - theta)^2, unconstrained; a circle of minimizers for
    # theta > 0.  f(theta) = min(theta, 0)^2.
    def obj(x, th):
        return float((x @ x - th[0]) ** 2)

    def grad(x, th):
        r = x @ x - th[0]
        return 4.0 * r * x, np.array([-2.0 * r])

    def oracle(th):
        t = float(th[0])
        x = np.array([np.sqrt(t), 0.0]) if t > 0 else np.zeros(2)
        return PrimalDualPoint(np.array([t]), x, np.zeros(0), "oracle", obj(x, th) + 0.0)

    return NlpProblem(
        name="ring",
        n=2,
        q=1,
        m_g=0,
        m_h=0,
        objective=obj,
        grad_selection=grad,
        g=lambda x, th: np.zeros(0),
        g_jac_x=lambda x, th: np.zeros((0, 2)),
        g_jac_theta=lambda x, th: np.zeros((0, 1)),
        h=lambda x, th: np.zeros(0),
        h_jac_x=lambda x, th: np.zeros((0, 2)),
        h_jac_theta=lambda x, th: np.zeros((0, 1)),
        solution_oracle=oracle,
        smooth=True,
        known_value=lambda th: min(float(th[0]), 0.0) ** 2,
        known_gradient=lambda th: np.array([2.0 * min(float(th[0]), 0.0)]),
        kink_distance=lambda th: abs(float(th[0])),
    )


def _soc_norm(q: int) -> ParametricProblem:
    # min x s.t. (x, theta) in SOC(q+1), so x >= ||theta|| and f = ||theta||.
    if q < 1:
        raise ValueError("soc_norm needs q >= 1")

    def oracle(th):
        r = float(np.linalg.norm(th))
        lam_bar = th / r if r > 0 else np.zeros(q)
        lam = np.concatenate(([-1.0], lam_bar))
        return PrimalDualPoint(th.copy(), np.array([r]), lam, "oracle", r)

    return ParametricProblem(
        name="soc_norm",
        n=1,
        q=q,
        m=q + 1,
        objective=lambda x, th: float(x[0]),
        grad_selection=lambda x, th: (np.ones(1), np.zeros(q)),
        constraint=lambda x, th: np.concatenate([x, th]),
        constraint_jac_x=lambda x, th: np.vstack([np.ones((1, 1)), np.zeros((q, 1))]),
        constraint_jac_theta=lambda x, th: np.vstack([np.zeros((1, q)), np.eye(q)]),
        cone=SecondOrder(q + 1),
        solution_oracle=oracle,
        smooth=True,
        known_value=lambda th: float(np.linalg.norm(th)),
        known_gradient=lambda th: np.asarray(th, dtype=float) / np.linalg.norm(th),
        kink_distance=lambda th: float(np.linalg.norm(th)),
    )


def _bilevel_quad_nlp(q: int) -> NlpProblem:
    # componentwise scalar_qp: F = ||x||^2 / 2, G = theta - x.
    if q < 1:
        raise ValueError("bilevel_quad needs q >= 1")

    def oracle(th):
        xs = np.maximum(th, 0.0)
        return PrimalDualPoint(th.copy(), xs, xs.copy(), "oracle", float(0.5 * xs @ xs))

    return NlpProblem(
        name="bilevel_quad",
        n=q,
        q=q,
        m_g=q,
        m_h=0,
        objective=lambda x, th: float(0.5 * x @ x),
        grad_selection=lambda x, th: (x.copy(), np.zeros(q)),
        g=lambda x, th: th - x,
        g_jac_x=lambda x, th: -np.eye(q),
        g_jac_theta=lambda x, th: np.eye(q),
        h=lambda x, th: np.zeros(0),
        h_jac_x=lambda x, th: np.zeros((0, q)),
        h_jac_theta=lambda x, th: np.zeros((0, q)),
        solution_oracle=oracle,
        smooth=True,
        known_value=lambda th: float(0.5 * np.maximum(th, 0.0) @ np.maximum(th, 0.0)),
        known_gradient=lambda th: np.maximum(np.asarray(th, dtype=float), 0.0),
        kink_distance=lambda th: float(np.min(np.abs(th))),
    )


_REGISTRY = {
    "failclarke": (lambda params: _failclarke_nlp(), True),
    "scalar_qp": (lambda params: _scalar_qp_nlp(), True),
    "ring": (lambda params: _ring_nlp(), True),
    "soc_norm": (lambda params: _soc_norm(int(params.get("q", 2))), False),
    "bilevel_quad": (lambda params: _bilevel_quad_nlp(int(params.get("q", 2))), True),
}


def problem_names() -> list:
    return sorted(_REGISTRY)


def library_nlp(name: str, params: Optional[dict] = None) -> NlpProblem:
    """NLP-form library problem; raises for conic-only entries."""
    if name not in _REGISTRY:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(problem_names())}")
    factory, is_nlp = _REGISTRY[name]
    if not is_nlp:
        raise ValueError(f"problem {name!r} has no NLP form")
    return factory(params or {})


def library(name: str, params: Optional[dict] = None) -> ParametricProblem:
    """Build a library problem in conic form and self-test its derivatives."""
    if name not in _REGISTRY:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(problem_names())}")
    factory, is_nlp = _REGISTRY[name]
    built = factory(params or {})
    p = nlp_to_conic(built) if is_nlp else built
    check_problem(p)
    return p


def problem_info(name: str, params: Optional[dict] = None) -> dict:
    p = library(name, params)
    return {
        "name": name,
        "n": p.n,
        "q": p.q,
        "m": p.m,
        "known_f": p.known_value is not None,
        "smooth": p.smooth,
        "has_oracle": p.solution_oracle is not None,
    }
