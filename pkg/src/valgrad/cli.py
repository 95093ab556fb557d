"""Command-line front end.

Subcommands: ``list``, ``grad``, ``verify chainrule``, ``verify dini``,
``descend``, ``cost``.  Output is machine readable (JSON, or CSV where a
grid/trace is the payload); ``--plot PATH`` additionally renders a figure
next to the delimited output.  Exit codes: 0 success, 1 usage error,
2 solver failure, 3 certification/verification failure.

All randomness is surfaced through ``--seed``; commands refuse to run a
randomized routine (iterative solves, random parameters) without one.
A JSON config file passed via ``--config`` overrides the flags.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Optional

import numpy as np

from . import plots
from .adjoint import asm
from .optimize import small_step_descent
from .problem import library, problem_info, problem_names
from .solver import SolveOptions, SolverError
from .verify import Curve, chain_rule_check, cost_report, dini_sandwich_check

__all__ = ["main", "entry"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_VERIFY = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the contract here is 1
    def error(self, message):
        raise UsageError(message)


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as exc:
        raise UsageError(f"cannot parse vector {text!r}: {exc}") from None


def _parse_curve(text: str, breaks) -> Curve:
    parts = text.split(":")
    kind, rest = parts[0], parts[1:]
    breakpoints = [float(b) for b in breaks.split(",")] if breaks else ()
    if kind == "line":
        if len(rest) == 1:
            ab = _parse_vector(rest[0])
            if ab.size != 2:
                raise UsageError("scalar line spec needs exactly two endpoints, e.g. line:-1,1")
            return Curve.line(ab[:1], ab[1:], breakpoints)
        if len(rest) == 2:
            return Curve.line(_parse_vector(rest[0]), _parse_vector(rest[1]), breakpoints)
        raise UsageError("line curve takes 'line:a,b' (q=1) or 'line:A:B' with vector endpoints")
    if kind == "spline":
        if len(rest) < 3:
            raise UsageError("spline curve takes 'spline:P1:P2:P3[...]' with >= 3 knots")
        return Curve.cubic_spline([_parse_vector(r) for r in rest], breakpoints)
    raise UsageError(f"unknown curve kind {kind!r}; use line or spline")


def _build_problem(args):
    params = {}
    if getattr(args, "params", None):
        try:
            params = json.loads(args.params)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--params is not valid JSON: {exc}") from None
    if getattr(args, "q", None) is not None:
        params["q"] = args.q
    try:
        return library(args.problem, params)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc)) from None


def _solve_options(args) -> SolveOptions:
    base = {}
    if getattr(args, "opts", None):
        try:
            base = json.loads(args.opts)
        except json.JSONDecodeError as exc:
            raise UsageError(f"--opts is not valid JSON: {exc}") from None
    if args.seed is not None:
        base.setdefault("seed", args.seed)
    try:
        return SolveOptions(**base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad solver options: {exc}") from None


def _require_seed(args, why: str):
    if args.seed is None:
        raise UsageError(f"--seed is required: {why}")


def _theta_arg(args, p, attr="theta"):
    text = getattr(args, attr)
    if text == "rand":
        _require_seed(args, f"--{attr} rand draws a random parameter")
        rng = np.random.default_rng(args.seed)
        return rng.uniform(-1.0, 1.0, size=p.q)
    th = _parse_vector(text)
    if th.size != p.q:
        raise UsageError(f"{attr} has dimension {th.size}, problem expects q={p.q}")
    return th


def _emit(args, payload: Optional[dict] = None, text: Optional[str] = None):
    if payload is not None:
        if not getattr(args, "no_timestamp", False):
            payload["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    out = getattr(args, "output", None)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_list(args) -> int:
    infos = [problem_info(name) for name in problem_names()]
    if args.json:
        _emit(args, text=json.dumps(infos, sort_keys=True, indent=2) + "\n")
    else:
        lines = [
            "{name} n={n} q={q} m={m} known_f={kf} oracle={orc}".format(
                name=i["name"],
                n=i["n"],
                q=i["q"],
                m=i["m"],
                kf="yes" if i["known_f"] else "no",
                orc="yes" if i["has_oracle"] else "no",
            )
            for i in infos
        ]
        _emit(args, text="\n".join(lines) + "\n")
    return EXIT_OK


def cmd_grad(args) -> int:
    p = _build_problem(args)
    use_oracle = not args.no_oracle
    if args.no_oracle or p.solution_oracle is None:
        _require_seed(args, "the iterative solver draws seeded starts")
    opts = _solve_options(args)
    theta = _theta_arg(args, p)
    try:
        ag = asm(p, theta, opts, use_oracle=use_oracle)
    except SolverError as exc:
        _emit(args, payload={"command": "grad", "problem": args.problem, "error": str(exc)})
        return EXIT_SOLVER
    payload = {"command": "grad", "problem": args.problem, "theta": theta.tolist()}
    payload.update(ag.to_json_dict())
    _emit(args, payload=payload)
    return EXIT_OK if ag.certified else EXIT_VERIFY


def cmd_verify(args) -> int:
    p = _build_problem(args)
    use_oracle = not args.no_oracle
    if args.no_oracle or p.solution_oracle is None:
        _require_seed(args, "the iterative solver draws seeded starts")
    opts = _solve_options(args)

    if args.check == "chainrule":
        curve = _parse_curve(args.curve, args.breaks)
        if curve.q != p.q:
            raise UsageError(f"curve dimension {curve.q} != problem q={p.q}")
        report = chain_rule_check(
            p, curve, n_grid=args.n, h=args.h, tol=args.tol, opts=opts, use_oracle=use_oracle
        )
        threshold = args.threshold if args.threshold is not None else 1.0 - 3.0 / args.n
        if args.plot:
            plots.render_chain_rule(report, args.plot)
        if args.format == "csv":
            _emit(args, text=report.to_csv())
        else:
            payload = {"command": "verify.chainrule", "threshold": threshold}
            payload.update(report.to_json_dict())
            _emit(args, payload=payload)
        return EXIT_OK if report.passed(threshold) else EXIT_VERIFY

    # dini
    theta = _theta_arg(args, p)
    d = _parse_vector(args.dir)
    if d.size != p.q:
        raise UsageError(f"direction has dimension {d.size}, problem expects q={p.q}")
    h_list = [float(v) for v in args.h_list.split(",")]
    report = dini_sandwich_check(
        p, theta, d, h_list=h_list, tol=args.tol, opts=opts, use_oracle=use_oracle
    )
    if args.plot:
        plots.render_dini(report, args.plot)
    payload = {"command": "verify.dini"}
    payload.update(report.to_json_dict())
    _emit(args, payload=payload)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_descend(args) -> int:
    p = _build_problem(args)
    use_oracle = not args.no_oracle
    if args.no_oracle or p.solution_oracle is None:
        _require_seed(args, "the iterative solver draws seeded starts")
    opts = _solve_options(args)
    theta0 = _theta_arg(args, p, attr="theta0")
    trace = small_step_descent(
        p,
        theta0,
        s=args.s,
        schedule=args.schedule,
        alpha0=args.alpha0,
        max_iter=args.iters,
        grad_tol=args.grad_tol,
        opts=opts,
        use_oracle=use_oracle,
    )
    if args.plot:
        plots.render_descent(trace, args.plot)
    if args.format == "csv":
        _emit(args, text=trace.to_csv())
    else:
        payload = {"command": "descend", "problem": args.problem}
        payload.update(trace.to_json_dict())
        _emit(args, payload=payload)
    return EXIT_SOLVER if trace.stop_reason == "solver_failure" else EXIT_OK


def cmd_cost(args) -> int:
    p = _build_problem(args)
    use_oracle = not args.no_oracle
    if args.no_oracle or p.solution_oracle is None:
        _require_seed(args, "the iterative solver draws seeded starts")
    opts = _solve_options(args)
    theta = _theta_arg(args, p)
    try:
        report = cost_report(
            p, theta, opts, h=args.h, use_oracle=use_oracle,
            include_timings=not args.no_timestamp,
        )
    except SolverError as exc:
        _emit(args, payload={"command": "cost", "problem": args.problem, "error": str(exc)})
        return EXIT_SOLVER
    payload = {"command": "cost", "problem": args.problem, "theta": theta.tolist()}
    payload.update(report.to_json_dict())
    _emit(args, payload=payload)
    return EXIT_OK


def _add_common(sub, with_theta=False):
    sub.add_argument("problem", help="registered problem name")
    sub.add_argument("--params", help="problem parameters as JSON, e.g. '{\"q\": 2}'")
    sub.add_argument("--q", type=int, help="shortcut for the q problem parameter")
    sub.add_argument("--seed", type=int, default=None, help="seed for all randomness")
    sub.add_argument("--opts", help="SolveOptions overrides as JSON")
    sub.add_argument("--use-oracle", action="store_true",
                     help="use the closed-form solution oracle (default when present)")
    sub.add_argument("--no-oracle", action="store_true",
                     help="force the iterative solver even when an oracle exists")
    sub.add_argument("--output", help="write the result to this path instead of stdout")
    sub.add_argument("--no-timestamp", action="store_true",
                     help="omit timestamps/timings for byte-stable output")
    if with_theta:
        sub.add_argument("--theta", required=True, help="parameter vector 'a,b,...' or 'rand'")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="valgrad", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--config", help="JSON config file; its entries override flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="list registered problems")
    p_list.add_argument("--json", action="store_true")
    p_list.add_argument("--output")
    p_list.set_defaults(func=cmd_list)

    p_grad = sub.add_parser("grad", help="adjoint surrogate gradient at theta")
    _add_common(p_grad, with_theta=True)
    p_grad.set_defaults(func=cmd_grad)

    p_verify = sub.add_parser("verify", help="conservativity checks")
    vsub = p_verify.add_subparsers(dest="check", required=True)

    p_chain = vsub.add_parser("chainrule", help="chain rule along a curve")
    _add_common(p_chain)
    p_chain.add_argument("--curve", required=True,
                         help="curve spec: 'line:a,b' (q=1), 'line:A:B', or 'spline:P1:P2:...'")
    p_chain.add_argument("--breaks", help="comma list of curve breakpoints to avoid")
    p_chain.add_argument("--n", type=int, default=201, help="grid size")
    p_chain.add_argument("--h", type=float, default=1e-5, help="finite-difference step in t")
    p_chain.add_argument("--tol", type=float, default=1e-4, help="pointwise relative tolerance")
    p_chain.add_argument("--threshold", type=float, default=None,
                         help="required pass fraction (default 1 - 3/n)")
    p_chain.add_argument("--format", choices=("json", "csv"), default="json")
    p_chain.add_argument("--plot", help="render the report figure to this path")
    p_chain.set_defaults(func=cmd_verify)

    p_dini = vsub.add_parser("dini", help="directional difference-quotient sandwich")
    _add_common(p_dini, with_theta=True)
    p_dini.add_argument("--dir", required=True, help="direction vector 'a,b,...'")
    p_dini.add_argument("--h-list", default="1e-2,1e-3,1e-4", help="comma list of steps")
    p_dini.add_argument("--tol", type=float, default=1e-3)
    p_dini.add_argument("--plot", help="render the report figure to this path")
    p_dini.set_defaults(func=cmd_verify)

    p_desc = sub.add_parser("descend", help="small-step descent on the value function")
    _add_common(p_desc)
    p_desc.add_argument("--theta0", required=True, help="start vector 'a,b,...' or 'rand'")
    p_desc.add_argument("--iters", type=int, default=500)
    p_desc.add_argument("--s", type=float, default=1.0, help="step constant")
    p_desc.add_argument("--alpha0", type=float, default=1.0)
    p_desc.add_argument("--schedule", choices=("harmonic", "sqrt"), default="harmonic")
    p_desc.add_argument("--grad-tol", type=float, default=1e-9)
    p_desc.add_argument("--format", choices=("json", "csv"), default="json")
    p_desc.add_argument("--plot", help="render the trace figure to this path")
    p_desc.set_defaults(func=cmd_descend)

    p_cost = sub.add_parser("cost", help="solver-call accounting: adjoint vs finite differences")
    _add_common(p_cost, with_theta=True)
    p_cost.add_argument("--h", type=float, default=1e-5)
    p_cost.set_defaults(func=cmd_cost)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.config:
            with open(args.config) as fh:
                overrides = json.load(fh)
            for key, val in overrides.items():
                setattr(args, key.replace("-", "_"), val)
        if getattr(args, "use_oracle", False) and getattr(args, "no_oracle", False):
            raise UsageError("--use-oracle and --no-oracle are mutually exclusive")
        return args.func(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE


def entry():  # console_scripts hook
    sys.exit(main())


if __name__ == "__main__":
    entry()
