"""Closed convex cone algebra: membership, projection, polars, normal cones.

Supported variants are the nonpositive orthant, the zero cone, the
second-order (Lorentz) cone with layout ``(t, xbar)`` and ``t >= ||xbar||``,
the polars of these (nonnegative orthant, full space, negated second-order
cone), and finite products.  Every projection is closed form, so feasibility
distances are exact up to rounding, and ``polar(polar(K))`` reproduces ``K``
structurally for each variant.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Cone",
    "NonpositiveOrthant",
    "Zero",
    "FullSpace",
    "SecondOrder",
    "NegatedSecondOrder",
    "Product",
    "NormalConeCheck",
    "polar",
    "project",
    "distance",
    "in_normal_cone",
    "cone_to_json",
    "cone_from_json",
    "DEFAULT_MEMBERSHIP_TOL",
]

# Residuals from the embedded solver sit near 1e-10, so membership checks
# default slightly above that.
DEFAULT_MEMBERSHIP_TOL = 1e-9


def _check_dim(z: np.ndarray, dim: int, what: str = "z") -> np.ndarray:
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (dim,):
        raise ValueError(f"{what} has shape {z.shape}, expected ({dim},)")
    return z


class Cone:
    """Base class for the supported closed convex cones."""

    dim: int

    def project(self, z) -> np.ndarray:
        """Euclidean projection of ``z`` onto the cone."""
        raise NotImplementedError

    def polar(self) -> "Cone":
        """The polar cone ``{x : <x, y> <= 0 for all y in K}``."""
        raise NotImplementedError

    def distance(self, z) -> float:
        z = _check_dim(z, self.dim)
        return float(np.linalg.norm(z - self.project(z)))

    def contains(self, z, tol: float = DEFAULT_MEMBERSHIP_TOL) -> bool:
        z = _check_dim(z, self.dim)
        return self.distance(z) <= tol * (1.0 + float(np.linalg.norm(z)))

    def project_normal(self, z, lam, active_tol: float = 1e-8) -> np.ndarray:
        """Projection of ``lam`` onto the normal cone N_K(z) for z in K.

        N_K(z) = {lam in polar(K) : <z, lam> = 0}; activity is decided
        componentwise/blockwise at ``active_tol``.
        """
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


@dataclass(frozen=True)
class NonpositiveOrthant(Cone):
    """R^m_- when ``negated`` is false, its polar R^m_+ otherwise."""

    dim: int
    negated: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("orthant dimension must be >= 1")

    def project(self, z) -> np.ndarray:
        z = _check_dim(z, self.dim)
        return np.maximum(z, 0.0) if self.negated else np.minimum(z, 0.0)

    def polar(self) -> Cone:
        return NonpositiveOrthant(self.dim, not self.negated)

    def project_normal(self, z, lam, active_tol: float = 1e-8) -> np.ndarray:
        z = _check_dim(z, self.dim)
        lam = _check_dim(lam, self.dim, "lam")
        active = np.abs(z) <= active_tol
        clamped = np.minimum(lam, 0.0) if self.negated else np.maximum(lam, 0.0)
        return np.where(active, clamped, 0.0)

    def to_json_dict(self) -> dict:
        d = {"kind": "orthant_nonpos", "dim": self.dim}
        if self.negated:
            d["negated"] = True
        return d


@dataclass(frozen=True)
class Zero(Cone):
    """The cone {0}^p."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("zero cone dimension must be >= 1")

    def project(self, z) -> np.ndarray:
        _check_dim(z, self.dim)
        return np.zeros(self.dim)

    def polar(self) -> Cone:
        return FullSpace(self.dim)

    def project_normal(self, z, lam, active_tol: float = 1e-8) -> np.ndarray:
        _check_dim(z, self.dim)
        return _check_dim(lam, self.dim, "lam").copy()

    def to_json_dict(self) -> dict:
        return {"kind": "zero", "dim": self.dim}


@dataclass(frozen=True)
class FullSpace(Cone):
    """All of R^p; arises as the polar of the zero cone."""

    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("full-space dimension must be >= 1")

    def project(self, z) -> np.ndarray:
        return _check_dim(z, self.dim).copy()

    def polar(self) -> Cone:
        return Zero(self.dim)

    def project_normal(self, z, lam, active_tol: float = 1e-8) -> np.ndarray:
        _check_dim(z, self.dim)
        _check_dim(lam, self.dim, "lam")
        return np.zeros(self.dim)

    def to_json_dict(self) -> dict:
        return {"kind": "polar_zero", "dim": self.dim}


def _soc_project(z: np.ndarray) -> np.ndarray:
    t, xbar = z[0], z[1:]
    r = float(np.linalg.norm(xbar))
    if r <= t:
        return z.copy()
    if r <= -t:
        # covers the boundary tie r == -t, which maps to the origin
        return np.zeros_like(z)
    out = np.empty_like(z)
    scale = 0.5 * (1.0 + t / r)
    out[0] = 0.5 * (r + t)
    out[1:] = scale * xbar
    return out


@dataclass(frozen=True)
class SecondOrder(Cone):
    """Second-order cone {(t, xbar) in R x R^(d-1) : t >= ||xbar||}."""

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("second-order cone needs dimension >= 2")

    def project(self, z) -> np.ndarray:
        return _soc_project(_check_dim(z, self.dim))

    def polar(self) -> Cone:
        # the SOC is self-dual, so its polar is its negation
        return NegatedSecondOrder(self.dim)

    def project_normal(self, z, lam, active_tol: float = 1e-8) -> np.ndarray:
        z = _check_dim(z, self.dim)
        lam = _check_dim(lam, self.dim, "lam")
        t, xbar = z[0], z[1:]
        r = float(np.linalg.norm(xbar))
        if abs(t) <= active_tol and r <= active_tol:
            return self.polar().project(lam)
        if t - r > active_tol:
            return np.zeros(self.dim)
        # boundary point with t = r > 0: the normal cone is a single ray
        ray = np.concatenate(([-1.0], xbar / r)) / np.sqrt(2.0)
        alpha = max(float(lam @ ray), 0.0)
        return alpha * ray

    def to_json_dict(self) -> dict:
        return {"kind": "soc", "dim": self.dim}


@dataclass(frozen=True)
class NegatedSecondOrder(Cone):
    """-SOC = {(t, xbar) : t <= -||xbar||}; the polar of the SOC."""

    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("second-order cone needs dimension >= 2")

    def project(self, z) -> np.ndarray:
        return -_soc_project(-_check_dim(z, self.dim))

    def polar(self) -> Cone:
        return SecondOrder(self.dim)

    def project_normal(self, z, lam, active_tol: float = 1e-8) -> np.ndarray:
        z = _check_dim(z, self.dim)
        lam = _check_dim(lam, self.dim, "lam")
        # N_{-K}(z) = -N_K(-z)
        return -SecondOrder(self.dim).project_normal(-z, -lam, active_tol)

    def to_json_dict(self) -> dict:
        return {"kind": "neg_soc", "dim": self.dim}


@dataclass(frozen=True)
class Product(Cone):
    """Cartesian product of cones, projected and polarized blockwise."""

    parts: tuple

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ValueError("product cone needs >= 2 parts")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self) -> int:
        return sum(p.dim for p in self.parts)

    def _blocks(self, z: np.ndarray):
        off = 0
        for p in self.parts:
            yield p, z[off : off + p.dim]
            off += p.dim

    def project(self, z) -> np.ndarray:
        z = _check_dim(z, self.dim)
        return np.concatenate([p.project(blk) for p, blk in self._blocks(z)])

    def polar(self) -> Cone:
        return Product(tuple(p.polar() for p in self.parts))

    def project_normal(self, z, lam, active_tol: float = 1e-8) -> np.ndarray:
        z = _check_dim(z, self.dim)
        lam = _check_dim(lam, self.dim, "lam")
        out = []
        off = 0
        for p in self.parts:
            out.append(p.project_normal(z[off : off + p.dim], lam[off : off + p.dim], active_tol))
            off += p.dim
        return np.concatenate(out)

    def to_json_dict(self) -> dict:
        return {
            "kind": "product",
            "dim": self.dim,
            "parts": [p.to_json_dict() for p in self.parts],
        }


def polar(cone: Cone) -> Cone:
    return cone.polar()


def project(cone: Cone, z) -> np.ndarray:
    return cone.project(z)


def distance(cone: Cone, z) -> float:
    return cone.distance(z)


@dataclass(frozen=True)
class NormalConeCheck:
    """Diagnostics for a normal-cone membership test."""

    ok: bool
    primal_dist: float
    dual_dist: float
    complementarity_gap: float

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "primal_dist": self.primal_dist,
            "dual_dist": self.dual_dist,
            "complementarity_gap": self.complementarity_gap,
        }


def in_normal_cone(cone: Cone, z, lam, tol: float = DEFAULT_MEMBERSHIP_TOL) -> NormalConeCheck:
    """Test lam in N_K(z), i.e. z in K, lam in polar(K) and <z, lam> = 0.

    All three residuals are scale-relative: the distances at
    ``tol * (1 + ||.||)`` and the complementarity gap at
    ``tol * (1 + ||z|| * ||lam||)``.
    """
    z = _check_dim(z, cone.dim)
    lam = _check_dim(lam, cone.dim, "lam")
    primal = cone.distance(z)
    dual = cone.polar().distance(lam)
    gap = abs(float(z @ lam))
    nz, nl = float(np.linalg.norm(z)), float(np.linalg.norm(lam))
    ok = (
        primal <= tol * (1.0 + nz)
        and dual <= tol * (1.0 + nl)
        and gap <= tol * (1.0 + nz * nl)
    )
    return NormalConeCheck(ok, primal, dual, gap)


_SIMPLE_KINDS = {
    "zero": Zero,
    "polar_zero": FullSpace,
    "soc": SecondOrder,
    "neg_soc": NegatedSecondOrder,
}


def cone_from_json_dict(d: dict) -> Cone:
    kind = d.get("kind")
    if kind == "orthant_nonpos":
        return NonpositiveOrthant(int(d["dim"]), bool(d.get("negated", False)))
    if kind in _SIMPLE_KINDS:
        return _SIMPLE_KINDS[kind](int(d["dim"]))
    if kind == "product":
        return Product(tuple(cone_from_json_dict(p) for p in d["parts"]))
    raise ValueError(f"unknown cone kind: {kind!r}")


def cone_to_json(cone: Cone) -> str:
    return cone.to_json()


def cone_from_json(s: str | dict) -> Cone:
    if isinstance(s, str):
        s = json.loads(s)
    return cone_from_json_dict(s)
