import json
import math

import numpy as np
import pytest

from valgrad.cones import NonpositiveOrthant
from valgrad.problem import NlpProblem, ParametricProblem, PrimalDualPoint, library, library_nlp
from valgrad.qualification import check_mfcq, check_rcq
from valgrad.solver import solve_primal_dual


def brute_force_mfcq_margin(grads, n_grid=201):
    """Independent oracle: max over a d-grid of min_i(-g_i . d), ||d||_inf <= 1."""
    n = grads.shape[1]
    assert n == 2
    best = -math.inf
    for d1 in np.linspace(-1, 1, n_grid):
        for d2 in np.linspace(-1, 1, n_grid):
            d = np.array([d1, d2])
            best = max(best, float(np.min(-grads @ d)))
    return best


def equality_problem(fn, jac):
    return NlpProblem(
        name="eq",
        n=1,
        q=1,
        m_g=0,
        m_h=1,
        objective=lambda x, th: float(x[0]),
        grad_selection=lambda x, th: (np.ones(1), np.zeros(1)),
        g=lambda x, th: np.zeros(0),
        g_jac_x=lambda x, th: np.zeros((0, 1)),
        g_jac_theta=lambda x, th: np.zeros((0, 1)),
        h=fn,
        h_jac_x=jac,
        h_jac_theta=lambda x, th: np.zeros((1, 1)),
    )


def test_mfcq_failclarke_artifact_point():
    p = library_nlp("failclarke")
    report = check_mfcq(p, [-1.0, 0.0], [0.0])
    assert report.qualified
    assert report.margin == pytest.approx(1.0, abs=1e-8)
    # the witness direction must realize the strict slack on both active rows
    d = report.witness
    jg = p.g_jac_x(np.array([-1.0, 0.0]), np.array([0.0]))
    for i in (1, 2):  # active constraints at the artifact point
        assert jg[i] @ d <= -report.margin + 1e-8


def test_mfcq_scalar_qp_active_point():
    p = library_nlp("scalar_qp")
    report = check_mfcq(p, [1.0], [1.0])
    assert report.qualified
    assert report.margin > 0


def test_mfcq_degenerate_equality_gradient():
    p = equality_problem(
        lambda x, th: np.array([x[0] ** 2]),
        lambda x, th: np.array([[2.0 * x[0]]]),
    )
    report = check_mfcq(p, [0.0], [0.0])
    assert not report.qualified
    assert report.margin == 0.0


def test_mfcq_nondegenerate_equality():
    p = equality_problem(
        lambda x, th: np.array([x[0]]),
        lambda x, th: np.array([[1.0]]),
    )
    report = check_mfcq(p, [0.0], [0.0])
    assert report.qualified
    assert report.margin == math.inf


def test_mfcq_infeasible_point_rejected():
    p = library_nlp("scalar_qp")
    with pytest.raises(ValueError):
        check_mfcq(p, [0.0], [1.0])  # g = theta - x = 1 > 0


def test_mfcq_lp_margin_matches_planted_value():
    # all active gradients share direction -u, so the optimum is
    # min_i(c_i) * ||u||_1, reachable at d = sign(u)
    rng = np.random.default_rng(8)
    for _ in range(10):
        n = 3
        u = rng.uniform(-1, 1, size=n)
        cs = rng.uniform(0.5, 2.0, size=4)
        grads = np.outer(cs, -u)
        planted = float(cs.min() * np.abs(u).sum())

        p = NlpProblem(
            name="planted",
            n=n,
            q=1,
            m_g=4,
            m_h=0,
            objective=lambda x, th: 0.0,
            grad_selection=lambda x, th: (np.zeros(n), np.zeros(1)),
            g=lambda x, th: np.zeros(4),  # all active at x = 0
            g_jac_x=lambda x, th, grads=grads: grads,
            g_jac_theta=lambda x, th: np.zeros((4, 1)),
            h=lambda x, th: np.zeros(0),
            h_jac_x=lambda x, th: np.zeros((0, n)),
            h_jac_theta=lambda x, th: np.zeros((0, 1)),
        )
        report = check_mfcq(p, np.zeros(n), [0.0])
        assert report.margin == pytest.approx(planted, abs=1e-8)


def test_mfcq_lp_margin_matches_brute_force_on_random_system():
    rng = np.random.default_rng(9)
    grads = rng.uniform(-1, 1, size=(3, 2))
    p = NlpProblem(
        name="rand2",
        n=2,
        q=1,
        m_g=3,
        m_h=0,
        objective=lambda x, th: 0.0,
        grad_selection=lambda x, th: (np.zeros(2), np.zeros(1)),
        g=lambda x, th: np.zeros(3),
        g_jac_x=lambda x, th: grads,
        g_jac_theta=lambda x, th: np.zeros((3, 1)),
        h=lambda x, th: np.zeros(0),
        h_jac_x=lambda x, th: np.zeros((0, 2)),
        h_jac_theta=lambda x, th: np.zeros((0, 1)),
    )
    report = check_mfcq(p, np.zeros(2), [0.0])
    bf = brute_force_mfcq_margin(grads)
    assert report.margin == pytest.approx(bf, abs=2e-2)


def test_rcq_soc_norm_margin():
    # complementarity pins lam to the ray (-1, theta/||theta||)/sqrt(2), so
    # ||jac_x(C)^T lam|| = |lam_0| = 1/sqrt(2)
    p = library("soc_norm", {"q": 2})
    pt = p.solution_oracle(np.array([1.0, 0.0]))
    report = check_rcq(p, pt, n_samples=8, seed=1)
    assert report.qualified
    assert report.margin == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-6)


def test_rcq_planted_failure_returns_witness():
    # C(x) = (x, -x) <= 0 at x = 0: lam = (1, 1)/sqrt(2) kills jac_x(C)^T lam
    p = ParametricProblem(
        name="rcqfail",
        n=1,
        q=1,
        m=2,
        objective=lambda x, th: float(x[0]),
        grad_selection=lambda x, th: (np.ones(1), np.zeros(1)),
        constraint=lambda x, th: np.array([x[0], -x[0]]),
        constraint_jac_x=lambda x, th: np.array([[1.0], [-1.0]]),
        constraint_jac_theta=lambda x, th: np.zeros((2, 1)),
        cone=NonpositiveOrthant(2),
    )
    pt = PrimalDualPoint(np.array([0.0]), np.array([0.0]), np.zeros(2), "oracle", 0.0)
    report = check_rcq(p, pt, n_samples=8, seed=0)
    assert not report.qualified
    assert report.margin <= 1e-8
    w = report.witness
    assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-9)
    assert np.all(w >= -1e-12)
    assert abs(w[0] - w[1]) <= 1e-7


def test_rcq_unconstrained_vacuous():
    p = library("ring")
    pt = p.solution_oracle(np.array([1.0]))
    report = check_rcq(p, pt)
    assert report.qualified
    assert report.margin == math.inf


def test_rcq_interior_point_vacuous():
    # strictly feasible point: the normal cone is {0}, no unit multiplier
    p = library("scalar_qp")
    pt = PrimalDualPoint(np.array([-1.0]), np.array([0.0]), np.zeros(1), "oracle", 0.0)
    report = check_rcq(p, pt, n_samples=4, seed=0)
    assert report.qualified
    assert report.margin == math.inf


def test_mfcq_rcq_agreement_on_nlp_library():
    # Lemma: for K = R^m_- x {0}^p the two qualifications coincide
    for name, params in [("failclarke", None), ("scalar_qp", None), ("bilevel_quad", {"q": 2})]:
        nlp = library_nlp(name, params)
        conic = library(name, params)
        rng = np.random.default_rng(4)
        thetas = [rng.uniform(-1.5, 1.5, size=conic.q) for _ in range(5)]
        for th in thetas:
            pt = solve_primal_dual(conic, th)
            mfcq = check_mfcq(nlp, pt.x, th, active_tol=1e-8)
            rcq = check_rcq(conic, pt, n_samples=8, seed=3)
            assert mfcq.qualified == rcq.qualified, (name, th)


def test_report_json_includes_witness():
    p = library_nlp("failclarke")
    report = check_mfcq(p, [-1.0, 0.0], [0.0])
    d = json.loads(report.to_json())
    assert d["qualified"] is True
    assert isinstance(d["witness"], list)
    assert d["method"] == "lp_exact"
    assert "note" in d
