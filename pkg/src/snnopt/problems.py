"""The three convex programs a balanced network solves, and their duals.

Conventions: ``F`` is ``n x m`` (one row per neuron), ``x`` has length
``m``, rates ``r`` have length ``n`` and dual points ``u`` length ``m``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    InfeasibleDualPoint,
    InfeasiblePrimalPoint,
    NegativeEntry,
    UnsupportedKind,
)
from .linalg import as_matrix, as_vector

TOL_NEG = 1e-12
TOL_FEAS = 1e-8


class Mode(str, enum.Enum):
    """Spike polarity: two-sided walls or the one-sided non-negative rule."""

    SIGNED = "signed"
    NONNEG = "nonneg"


class Kind(str, enum.Enum):
    NNLS = "nnls"
    L1_NONNEG = "l1"
    L1_SIGNED = "l1signed"
    LASSO = "lasso"


@dataclass(frozen=True)
class ProblemKind:
    kind: Kind
    beta: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.LASSO:
            if self.beta is None or not self.beta > 0:
                raise ValueError("Lasso needs beta > 0")
        elif self.beta is not None:
            raise ValueError(f"beta given for {self.kind.value}")

    @classmethod
    def nnls(cls) -> "ProblemKind":
        return cls(Kind.NNLS)

    @classmethod
    def l1(cls, signed: bool = False) -> "ProblemKind":
        return cls(Kind.L1_SIGNED if signed else Kind.L1_NONNEG)

    @classmethod
    def lasso(cls, beta: float) -> "ProblemKind":
        return cls(Kind.LASSO, float(beta))

    @classmethod
    def parse(cls, name: str, beta: float | None = None) -> "ProblemKind":
        kind = Kind(name)
        return cls(kind, beta if kind is Kind.LASSO else None)

    @property
    def nonneg(self) -> bool:
        return self.kind is not Kind.L1_SIGNED

    @property
    def is_l1(self) -> bool:
        return self.kind in (Kind.L1_NONNEG, Kind.L1_SIGNED)

    @property
    def mode(self) -> Mode:
        """Wall polarity of the matching dual polytope."""
        return Mode.SIGNED if self.kind is Kind.L1_SIGNED else Mode.NONNEG


@dataclass(frozen=True)
class Instance:
    F: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        F = as_matrix(self.F)
        x = as_vector(self.x, F.shape[1], "x")
        if not np.all(np.isfinite(x)):
            raise ValueError("x has non-finite entries")
        F.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.F.shape[0]

    @property
    def m(self) -> int:
        return self.F.shape[1]


@dataclass
class SolveResult:
    r: np.ndarray
    residual: float
    l1_norm: float
    objective: float
    dual_point: np.ndarray | None = None
    duality_gap: float | None = None


def _rate(inst: Instance, r, nonneg: bool) -> np.ndarray:
    r = as_vector(r, inst.n, "r")
    if nonneg:
        if np.any(r < -TOL_NEG):
            raise NegativeEntry(f"min entry {r.min():.3e} below -{TOL_NEG:g}")
        r = np.maximum(r, 0.0)
    return r


def objective(kind: ProblemKind, inst: Instance, r) -> float:
    """Primal objective value; l1 kinds ignore the equality constraint."""
    r = _rate(inst, r, kind.nonneg)
    if kind.is_l1:
        return float(np.abs(r).sum())
    res = inst.x - inst.F.T @ r
    val = 0.5 * float(res @ res)
    if kind.kind is Kind.LASSO:
        val += kind.beta * float(r.sum())
    return val


def energy(inst: Instance, r) -> float:
    """``r^T F F^T r - 2 r^T F x``, i.e. ``||x - F^T r||^2 - ||x||^2``."""
    r = as_vector(r, inst.n, "r")
    Ftr = inst.F.T @ r
    return float(Ftr @ Ftr - 2.0 * (Ftr @ inst.x))


def dual_objective(kind: ProblemKind, inst: Instance, u) -> float:
    u = as_vector(u, inst.m, "u")
    if kind.is_l1:
        return float(inst.x @ u)
    if kind.kind is Kind.LASSO:
        d = inst.x - kind.beta * u
        return 0.5 * float(inst.x @ inst.x) - 0.5 * float(d @ d)
    raise UnsupportedKind("no dual program for NNLS")


def dual_feasibility_violation(inst: Instance, u, eta: float, mode: Mode | str) -> float:
    """How far ``u`` sits outside the polytope ``{F u <= eta}`` (or ``|F u| <= eta``)."""
    u = as_vector(u, inst.m, "u")
    Fu = inst.F @ u
    if Mode(mode) is Mode.SIGNED:
        Fu = np.abs(Fu)
    return max(0.0, float(Fu.max()) - eta)


def clip_to_polytope(inst: Instance, u, eta: float = 1.0, mode: Mode | str = Mode.NONNEG) -> np.ndarray:
    """Shrink ``u`` toward the origin until it is feasible."""
    u = as_vector(u, inst.m, "u")
    Fu = inst.F @ u
    if Mode(mode) is Mode.SIGNED:
        Fu = np.abs(Fu)
    worst = float(Fu.max())
    return u * (eta / worst) if worst > eta else u


def duality_gap(kind: ProblemKind, inst: Instance, r, u, eta: float = 1.0) -> float:
    """Primal objective at ``r`` minus dual objective at ``u / eta``.

    Raises
    ------
    InfeasibleDualPoint
        ``u`` violates the eta-scaled dual polytope by more than ``TOL_FEAS``.
    InfeasiblePrimalPoint
        ``r`` has negative entries (non-negative kinds) or, for the l1
        kinds, misses ``F^T r = x`` by more than ``TOL_FEAS * (1 + ||x||)``.
    """
    if kind.kind is Kind.NNLS:
        raise UnsupportedKind("no dual program for NNLS")
    u = as_vector(u, inst.m, "u")
    r = as_vector(r, inst.n, "r")
    if dual_feasibility_violation(inst, u, eta, kind.mode) > TOL_FEAS:
        raise InfeasibleDualPoint("u lies outside the dual polytope")
    if kind.nonneg and np.any(r < -TOL_NEG):
        raise InfeasiblePrimalPoint("negative rate for a non-negative program")
    if kind.is_l1:
        miss = np.linalg.norm(inst.F.T @ r - inst.x)
        if miss > TOL_FEAS * (1.0 + np.linalg.norm(inst.x)):
            raise InfeasiblePrimalPoint(f"F^T r misses x by {miss:.3e}")
    return objective(kind, inst, r) - dual_objective(kind, inst, u / eta)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def dumps_instance(inst: Instance) -> str:
    rows = ",\n    ".join("[" + ", ".join(_fmt(v) for v in row) + "]" for row in inst.F)
    xs = ", ".join(_fmt(v) for v in inst.x)
    return f'{{\n  "F": [\n    {rows}\n  ],\n  "x": [{xs}]\n}}\n'


def loads_instance(text: str) -> Instance:
    doc = json.loads(text)
    try:
        return Instance(np.array(doc["F"], dtype=float), np.array(doc["x"], dtype=float))
    except KeyError as exc:
        raise DimensionMismatch(f"instance document lacks field {exc}") from None


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def load_instance(path) -> Instance:
    return loads_instance(Path(path).read_text())
