"""Reference solvers used to ground-truth the network.

Each one is deliberately simple and slow: projected gradient for NNLS,
exhaustive support enumeration for l1 minimisation and cyclic coordinate
descent for the non-negative Lasso.  None of them shares code with the
spiking dynamics.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import EnumerationCapExceeded, Infeasible, IterationCapExceeded
from .geometry import ENUMERATION_CAP
from .linalg import GramFactor
from .problems import Instance, Mode

ITERATION_CAP = 10**7
TOL_CANDIDATE = 1e-10
TOL_ROWSPACE = 1e-8


class Method(str, enum.Enum):
    PROJECTED_GRADIENT = "projected_gradient"
    SUPPORT_ENUMERATION = "support_enumeration"
    COORDINATE_DESCENT = "coordinate_descent"


@dataclass
class OracleResult:
    """Reference optimum ``r_star`` with the value it attains.

    ``certificate`` holds the optimality evidence the method can offer:
    KKT residuals for the iterative solvers, the equality residual and
    support for enumeration.
    """

    r_star: np.ndarray
    opt_value: float
    method_tag: Method
    certificate: dict = field(default_factory=dict)
    iterations: int = 0

    @property
    def residual(self) -> float:
        return float(self.certificate.get("residual", np.nan))

    def to_dict(self) -> dict:
        return {
            "method": self.method_tag.value,
            "opt_value": self.opt_value,
            "r_star": self.r_star.tolist(),
            "iterations": self.iterations,
            "certificate": self.certificate,
        }


def _projected_gradient(r: np.ndarray, g: np.ndarray) -> np.ndarray:
    # components that could still decrease the objective inside r >= 0
    return np.where(r > 0, g, np.minimum(g, 0.0))


def nnls_oracle(inst: Instance, tol: float = 1e-10, max_iter: int = ITERATION_CAP) -> OracleResult:
    """Minimise ``||x - F^T r||`` over ``r >= 0`` by projected gradient.

    Step ``1 / lambda_max`` from ``r = 0`` until the projected gradient
    has norm at most ``tol``.

    Raises
    ------
    IterationCapExceeded
        ``max_iter`` steps without meeting ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    F, x = inst.F, inst.x
    G = F @ F.T
    b = F @ x
    step = 1.0 / GramFactor(F).spectral.lambda_max
    r = np.zeros(inst.n)
    g = -b
    for it in range(1, max_iter + 1):
        r = np.maximum(0.0, r - step * g)
        g = G @ r - b
        if np.linalg.norm(_projected_gradient(r, g)) <= tol:
            break
    else:
        raise IterationCapExceeded(f"projected gradient did not reach tol={tol:g} in {max_iter} steps")
    res = x - F.T @ r
    return OracleResult(
        r_star=r,
        opt_value=0.5 * float(res @ res),
        method_tag=Method.PROJECTED_GRADIENT,
        certificate={
            "residual": float(np.linalg.norm(res)),
            "projected_gradient_norm": float(np.linalg.norm(_projected_gradient(r, g))),
            "tol": tol,
        },
        iterations=it,
    )


def l1min_oracle(inst: Instance, mode: Mode | str = Mode.NONNEG, cap: int = ENUMERATION_CAP) -> OracleResult:
    """Minimise ``||r||_1`` subject to ``F^T r = x`` (and ``r >= 0`` in nonneg mode).

    Every basic solution is visited: supports of size at most ``m`` whose
    columns of ``F^T`` are independent.  Ties within round-off go to the
    lexicographically smallest support.

    Raises
    ------
    Infeasible
        ``x`` is not in the row space of ``F`` or no feasible support exists.
    EnumerationCapExceeded
        ``C(n, m) 2^m`` exceeds ``cap``.
    """
    mode = Mode(mode)
    F, x = inst.F, inst.x
    n, m = F.shape
    if comb(n, min(m, n)) * 2**m > cap:
        raise EnumerationCapExceeded(f"C({n},{m})*2^{m} exceeds the cap of {cap}")
    xnorm = float(np.linalg.norm(x))
    if np.linalg.norm(x - GramFactor(F).project_rowspace(x)) > TOL_ROWSPACE * (1.0 + xnorm):
        raise Infeasible("x lies outside the row space of F")
    slack = TOL_ROWSPACE * (1.0 + xnorm)
    best, best_val, best_S = None, np.inf, None
    for k in range(0, min(m, n) + 1):
        for S in itertools.combinations(range(n), k):
            if k == 0:
                if xnorm > slack:
                    continue
                rS = np.zeros(0)
            else:
                A = F[list(S)].T
                if np.linalg.matrix_rank(A, tol=1e-10) < k:
                    continue
                rS, *_ = np.linalg.lstsq(A, x, rcond=None)
                if np.linalg.norm(A @ rS - x) > slack:
                    continue
                if mode is Mode.NONNEG and np.any(rS < -TOL_CANDIDATE):
                    continue
            val = float(np.abs(rS).sum())
            # strict improvement beyond round-off; enumeration order is lexicographic
            if val < best_val - 1e-12 * (1.0 + abs(best_val if np.isfinite(best_val) else 0.0)):
                best_val, best_S = val, S
                best = np.zeros(n)
                best[list(S)] = rS
    if best is None:
        raise Infeasible("no feasible support")
    if mode is Mode.NONNEG:
        best = np.maximum(best, 0.0)
    return OracleResult(
        r_star=best,
        opt_value=float(np.abs(best).sum()),
        method_tag=Method.SUPPORT_ENUMERATION,
        certificate={
            "residual": float(np.linalg.norm(x - F.T @ best)),
            "support": list(best_S),
            "mode": mode.value,
        },
    )


def lasso_kkt(inst: Instance, r: np.ndarray, beta: float) -> float:
    """Worst violation of the non-negative Lasso optimality conditions.

    With ``c = F (x - F^T r)``: ``c_i = beta`` where ``r_i > 0`` and
    ``c_i <= beta`` where ``r_i = 0``.
    """
    c = inst.F @ (inst.x - inst.F.T @ r)
    viol = np.where(r > 0, np.abs(c - beta), np.maximum(c - beta, 0.0))
    return float(viol.max(initial=0.0))


def lasso_oracle(inst: Instance, beta: float, tol: float = 1e-12, max_sweeps: int = ITERATION_CAP) -> OracleResult:
    """Minimise ``0.5 ||x - F^T r||^2 + beta sum(r)`` over ``r >= 0``.

    Cyclic coordinate descent with exact coordinate minimisation, stopped
    once a full sweep moves no coordinate by more than ``tol``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")
    F, x = inst.F, inst.x
    sq = np.einsum("ij,ij->i", F, F)
    r = np.zeros(inst.n)
    res = x.copy()
    for sweep in range(1, max_sweeps + 1):
        biggest = 0.0
        for i in range(inst.n):
            if sq[i] == 0.0:
                continue
            new = max(0.0, r[i] + (F[i] @ res - beta) / sq[i])
            d = new - r[i]
            if d != 0.0:
                res -= d * F[i]
                r[i] = new
                biggest = max(biggest, abs(d))
        if biggest <= tol:
            break
    else:
        raise IterationCapExceeded(f"coordinate descent did not settle within {max_sweeps} sweeps")
    res = x - F.T @ r
    return OracleResult(
        r_star=r,
        opt_value=0.5 * float(res @ res) + beta * float(r.sum()),
        method_tag=Method.COORDINATE_DESCENT,
        certificate={
            "residual": float(np.linalg.norm(res)),
            "kkt_violation": lasso_kkt(inst, r, beta),
            "tol": tol,
            "beta": beta,
        },
        iterations=sweep,
    )


def least_squares_min_norm(inst: Instance) -> np.ndarray:
    """``(F F^T)^+ F x``: the smallest rate reproducing the row-space part of ``x``."""
    return GramFactor(inst.F).min_norm_solution(inst.x)
