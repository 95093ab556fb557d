"""Render verification reports and descent traces to figure files.

Figures are built on matplotlib's object API (no pyplot, no global state)
and written wherever the caller points, typically next to the CSV output.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

__all__ = ["render_chain_rule", "render_dini", "render_descent"]


def render_chain_rule(report, path) -> None:
    """Overlay lhs/rhs along the curve and the pointwise error below."""
    fig = Figure(figsize=(7.0, 5.0))
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    t = np.asarray(report.grid)
    ax1.plot(t, report.lhs, label="d/dt f(theta(t)) (central diff)", lw=1.2)
    ax1.plot(t, report.rhs, label="<u(theta(t)), theta'(t)>", lw=1.2, ls="--")
    for tx in report.exceptional_points:
        ax1.axvline(tx, color="crimson", alpha=0.4, lw=0.8)
    ax1.set_ylabel("derivative along curve")
    ax1.legend(fontsize=8)
    ax1.set_title(
        f"{report.metadata.get('problem', '?')}: chain rule, "
        f"pass fraction {report.pass_fraction:.4f}"
    )
    err = np.maximum(np.asarray(report.abs_err), 1e-18)
    ax2.semilogy(t, err, lw=0.9, color="gray")
    ax2.axhline(report.metadata.get("tol", 1e-4), color="k", ls=":", lw=0.8)
    ax2.set_xlabel("t")
    ax2.set_ylabel("|lhs - rhs|")
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def render_dini(report, path) -> None:
    """Difference quotients per step against the sandwich interval."""
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.subplots()
    steps = np.asarray(report.steps)
    ax.axhspan(report.lo, report.hi, color="tab:blue", alpha=0.15, label="[min<u,d>, max<u,d>]")
    ax.semilogx(steps, report.quotients, "o-", color="tab:orange", label="(f(theta+td)-f(theta))/t")
    ax.set_xlabel("step t")
    ax.set_ylabel("difference quotient")
    ax.legend(fontsize=8)
    ax.set_title(f"{report.metadata.get('problem', '?')}: Dini sandwich, passed={report.passed}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def render_descent(trace, path) -> None:
    """Value and adjoint-norm curves over the descent iterations."""
    fig = Figure(figsize=(7.0, 4.0))
    ax1, ax2 = fig.subplots(1, 2)
    k = np.arange(len(trace.values))
    ax1.plot(k, trace.values, lw=1.2)
    ax1.set_xlabel("k")
    ax1.set_ylabel("f(theta_k)")
    norms = np.maximum(np.asarray(trace.asm_norms), 1e-18)
    ax2.semilogy(k, norms, lw=1.2, color="tab:green")
    ax2.set_xlabel("k")
    ax2.set_ylabel("||u_k||")
    fig.suptitle(f"small-step descent, s={trace.step_s:g}, alpha_k={trace.schedule}, stop={trace.stop_reason}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
