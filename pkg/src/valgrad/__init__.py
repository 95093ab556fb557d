"""Gradient-like first-order information for value functions of parametric
conic programs, computed by the adjoint state method from one primal-dual
solve, with empirical verification of its chain-rule behavior."""

from .adjoint import AdjointGradient, asm, asm_from_point, asm_nlp
from .cones import (
    Cone,
    FullSpace,
    NegatedSecondOrder,
    NonpositiveOrthant,
    Product,
    SecondOrder,
    Zero,
    cone_from_json,
    cone_to_json,
    distance,
    in_normal_cone,
    polar,
    project,
)
from .optimize import DescentTrace, small_step_descent
from .problem import (
    NlpProblem,
    ParametricProblem,
    PrimalDualPoint,
    check_problem,
    library,
    library_nlp,
    nlp_to_conic,
    problem_info,
    problem_names,
)
from .qualification import QualificationReport, check_mfcq, check_rcq
from .solver import (
    KKTResidual,
    SolveOptions,
    SolveReport,
    SolverError,
    kkt_residual,
    solve_primal_dual,
    value,
)
from .verify import (
    ChainRuleReport,
    CostReport,
    Curve,
    DiniReport,
    chain_rule_check,
    cost_report,
    dini_sandwich_check,
    finite_diff_gradient,
)

__version__ = "0.1.0"

__all__ = [
    "AdjointGradient",
    "asm",
    "asm_from_point",
    "asm_nlp",
    "Cone",
    "NonpositiveOrthant",
    "Zero",
    "FullSpace",
    "SecondOrder",
    "NegatedSecondOrder",
    "Product",
    "polar",
    "project",
    "distance",
    "in_normal_cone",
    "cone_to_json",
    "cone_from_json",
    "ParametricProblem",
    "NlpProblem",
    "PrimalDualPoint",
    "nlp_to_conic",
    "library",
    "library_nlp",
    "problem_names",
    "problem_info",
    "check_problem",
    "SolveOptions",
    "SolveReport",
    "SolverError",
    "KKTResidual",
    "kkt_residual",
    "solve_primal_dual",
    "value",
    "QualificationReport",
    "check_mfcq",
    "check_rcq",
    "Curve",
    "ChainRuleReport",
    "DiniReport",
    "CostReport",
    "finite_diff_gradient",
    "chain_rule_check",
    "dini_sandwich_check",
    "cost_report",
    "DescentTrace",
    "small_step_descent",
    "__version__",
]
