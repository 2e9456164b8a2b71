"""Geometry of the dual polytope ``{u : F_i^T u <= eta}``.

A *wall* is a signed row: ``Wall(i, +1)`` is the hyperplane
``F_i^T u = eta`` and, in signed mode, ``Wall(i, -1)`` is
``-F_i^T u = eta``.  Indices are 0-based; ``str(wall)`` prints the 1-based
``+1`` / ``-2`` form used in reports.

Vertex enumeration, the niceness parameter and the ideal coupling are all
brute force over row subsets.  That is the point: they serve as oracles
at desk scale, guarded by ``ENUMERATION_CAP``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    EnumerationCapExceeded,
    MultipleCells,
    NoCellFound,
    PointOutsidePolytope,
    RowsNotNormalized,
)
from .linalg import as_matrix, as_vector
from .problems import Mode

ENUMERATION_CAP = 10**6
TOL_SINGULAR = 1e-10
TOL_MERGE = 1e-9
TOL_TIGHT = 1e-9
TOL_ZERO = 1e-12


class Wall(NamedTuple):
    index: int
    sign: int = 1

    def __str__(self) -> str:
        return f"{'+' if self.sign > 0 else '-'}{self.index + 1}"


ActiveSet = tuple  # sorted tuple of Wall


def _walls(n: int, mode: Mode) -> list[Wall]:
    if Mode(mode) is Mode.SIGNED:
        return [Wall(i, s) for i in range(n) for s in (1, -1)]
    return [Wall(i, 1) for i in range(n)]


def _wall_rows(F: np.ndarray, walls) -> np.ndarray:
    if not walls:
        return np.zeros((0, F.shape[1]))
    idx = np.fromiter((w.index for w in walls), dtype=int)
    sgn = np.fromiter((w.sign for w in walls), dtype=float)
    return F[idx] * sgn[:, None]


def active_walls(F, u, eta: float, mode: Mode | str = Mode.NONNEG, tol: float = TOL_TIGHT) -> ActiveSet:
    """Walls within ``tol`` of being tight at ``u``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    F = as_matrix(F)
    u = as_vector(u, F.shape[1], "u")
    Fu = F @ u
    out = [Wall(int(i), 1) for i in np.flatnonzero(np.abs(Fu - eta) <= tol)]
    if Mode(mode) is Mode.SIGNED:
        out += [Wall(int(i), -1) for i in np.flatnonzero(np.abs(-Fu - eta) <= tol)]
    return tuple(sorted(out))


def _sign_matrix(m: int) -> np.ndarray:
    """All of ``{-1, +1}^m`` as columns, ``+1...+1`` first."""
    return np.array(list(itertools.product((1.0, -1.0), repeat=m))).T


def _check_cap(count: int, cap: int) -> None:
    if count > cap:
        raise EnumerationCapExceeded(f"{count} subsets exceed the cap of {cap}")


def _is_singular(A: np.ndarray) -> bool:
    return np.linalg.svd(A, compute_uv=False)[-1] < TOL_SINGULAR


@dataclass
class VertexSet:
    """Result of ``enumerate_vertices``.

    ``raw`` keeps every solved system as ``(subset, signs, vertex)``;
    ``vertices`` holds them with duplicates merged; ``singular`` lists
    the subsets whose system could not be solved.
    """

    vertices: list
    raw: list
    singular: list


def _merge(points: np.ndarray, tol: float = TOL_MERGE) -> np.ndarray:
    """First representative of each cluster of points closer than ``tol``."""
    if len(points) == 0:
        return points
    parent = list(range(len(points)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in cKDTree(points).query_pairs(tol):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)
    keep = sorted({find(a) for a in range(len(points))})
    return points[keep]


def enumerate_vertices(F, eta: float = 1.0, cap: int = ENUMERATION_CAP) -> VertexSet:
    """Solve ``F_S v = eta * s`` for every size-m row subset and sign vector."""
    F = as_matrix(F)
    n, m = F.shape
    if n < m:
        return VertexSet([], [], [])
    _check_cap(comb(n, m) * 2**m, cap)
    X = _sign_matrix(m)
    raw, singular = [], []
    for S in itertools.combinations(range(n), m):
        A = F[list(S)]
        if _is_singular(A):
            singular.append(S)
            continue
        V = np.linalg.solve(A, eta * X)
        for k in range(X.shape[1]):
            raw.append((S, tuple(int(c) for c in X[:, k]), V[:, k]))
    pts = np.array([v for _, _, v in raw]).reshape(-1, m)
    return VertexSet([p for p in _merge(pts)], raw, singular)


@dataclass
class NicenessReport:
    gamma_nondegen: float
    gamma_vertex: float
    gamma_coeff: float
    gamma: float
    enumerated_subsets: int
    witnesses: dict = field(default_factory=dict)

    @property
    def nice(self) -> bool:
        return self.gamma > 0

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "gamma_nondegen": self.gamma_nondegen,
            "gamma_vertex": self.gamma_vertex,
            "gamma_coeff": self.gamma_coeff,
            "enumerated_subsets": self.enumerated_subsets,
            "witnesses": self.witnesses,
        }


def _distance_to_span(row: np.ndarray, others: np.ndarray) -> float:
    if others.shape[0] == 0:
        return float(np.linalg.norm(row))
    coef, *_ = np.linalg.lstsq(others.T, row, rcond=None)
    return float(np.linalg.norm(row - others.T @ coef))


def niceness(F, cap: int = ENUMERATION_CAP) -> NicenessReport:
    """The three non-degeneracy margins of a unit-row matrix and their minimum.

    * ``gamma_nondegen``: smallest distance from a row to the span of the
      other rows of any size-m subset;
    * ``gamma_vertex``: smallest distance between distinct vertices of the
      unit polytope;
    * ``gamma_coeff``: smallest ``|z_i|`` over ``sum_i z_i F_i = s`` for
      every size-m subset and sign vector ``s``.

    Any singular size-m subset drives the first and third margins to zero.
    """
    F = as_matrix(F)
    n, m = F.shape
    norms = np.linalg.norm(F, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise RowsNotNormalized(f"row norms range over [{norms.min():.6g}, {norms.max():.6g}]")
    if n < m:
        raise ValueError("niceness needs at least m rows")
    _check_cap(comb(n, m) * 2**m, cap)
    X = _sign_matrix(m)
    g_nd = g_cf = np.inf
    w_nd = w_cf = None
    raw_pts = []
    count = 0
    for S in itertools.combinations(range(n), m):
        count += 1
        A = F[list(S)]
        if _is_singular(A):
            if g_nd > 0:
                g_nd, w_nd = 0.0, {"subset": list(S), "row": None}
            if g_cf > 0:
                g_cf, w_cf = 0.0, {"subset": list(S), "signs": None}
            continue
        for k, i in enumerate(S):
            d = _distance_to_span(A[k], np.delete(A, k, axis=0))
            if d < g_nd:
                g_nd, w_nd = d, {"subset": list(S), "row": i}
        Z = np.linalg.solve(A.T, X)
        absZ = np.abs(Z).min(axis=0)
        k = int(np.argmin(absZ))
        if absZ[k] < g_cf:
            g_cf, w_cf = float(absZ[k]), {"subset": list(S), "signs": [int(c) for c in X[:, k]]}
        V = np.linalg.solve(A, X)
        raw_pts.append(V.T)
    g_vx, w_vx = np.inf, None
    if raw_pts:
        pts = np.vstack(raw_pts)
        reps = _merge(pts)
        if len(reps) >= 2:
            d, j = cKDTree(reps).query(reps, k=2)
            a = int(np.argmin(d[:, 1]))
            g_vx = float(d[a, 1])
            w_vx = {"vertices": [reps[a].tolist(), reps[int(j[a, 1])].tolist()]}
    # margins at round-off level are exact zeros in disguise
    g_nd, g_vx, g_cf = (float(g) if np.isfinite(g) and g >= TOL_ZERO else 0.0 for g in (g_nd, g_vx, g_cf))
    return NicenessReport(
        gamma_nondegen=g_nd,
        gamma_vertex=g_vx,
        gamma_coeff=g_cf,
        gamma=min(g_nd, g_vx, g_cf),
        enumerated_subsets=count,
        witnesses={"nondegen": w_nd, "vertex": w_vx, "coeff": w_cf},
    )


@dataclass
class IdealCoupling:
    u_ideal: np.ndarray
    gamma_set: ActiveSet
    z: np.ndarray
    tau_cpl: float


def _wall_subsets(walls: list[Wall], max_size: int):
    for k in range(max_size + 1):
        for sub in itertools.combinations(walls, k):
            if len({w.index for w in sub}) == k:
                yield sub


def _count_wall_subsets(n: int, m: int, mode: Mode) -> int:
    per = 2 if mode is Mode.SIGNED else 1
    return sum(comb(n, k) * per**k for k in range(min(m, n) + 1))


def ideal_coupling(
    F,
    u,
    eta: float,
    tau_cpl: float,
    mode: Mode | str = Mode.SIGNED,
    cap: int = ENUMERATION_CAP,
) -> IdealCoupling:
    """Locate the cell of the shrunk-polytope partition that contains ``u``.

    Finds the unique ``u_ideal`` in ``{g^T u <= (1 - tau_cpl) eta}`` and
    ``z >= 0`` with ``u = u_ideal + sum_{g in Gamma} z_g g`` where
    ``Gamma`` is exactly the set of walls tight at ``u_ideal``.  This
    coincides with the Euclidean projection of ``u`` onto the shrunk
    polytope.

    Raises
    ------
    PointOutsidePolytope
        ``u`` violates the eta-polytope by more than ``1e-9``.
    NoCellFound, MultipleCells
        The enumeration found zero or several cells; both indicate a
        degenerate ``F``.
    """
    if not 0.0 < tau_cpl < 1.0:
        raise ValueError("tau_cpl must lie in (0, 1)")
    mode = Mode(mode)
    F = as_matrix(F)
    n, m = F.shape
    u = as_vector(u, m, "u")
    walls = _walls(n, mode)
    G = _wall_rows(F, walls)
    Gu = G @ u
    if Gu.max() - eta > 1e-9:
        raise PointOutsidePolytope(f"u exceeds the polytope by {Gu.max() - eta:.3e}")
    _check_cap(_count_wall_subsets(n, m, mode), cap)
    level = (1.0 - tau_cpl) * eta
    pos = {w: k for k, w in enumerate(walls)}
    found = []
    for sub in _wall_subsets(walls, m):
        k = len(sub)
        if k:
            Gs = G[[pos[w] for w in sub]]
            M = Gs @ Gs.T
            if _is_singular(M):
                continue
            z = np.linalg.solve(M, Gs @ u - level)
            if z.min() < -1e-10:
                continue
            ui = u - Gs.T @ z
        else:
            z = np.zeros(0)
            ui = u
        slack = G @ ui - level
        inside = np.ones(len(walls), dtype=bool)
        inside[[pos[w] for w in sub]] = False
        if np.any(slack[inside] >= -TOL_TIGHT):
            continue
        found.append(IdealCoupling(ui, tuple(sub), np.maximum(z, 0.0), tau_cpl))
    if not found:
        raise NoCellFound("no cell of the shrunk-polytope partition contains u")
    if len(found) > 1:
        raise MultipleCells(f"{len(found)} cells contain u: " + ", ".join(str([str(w) for w in c.gamma_set]) for c in found))
    return found[0]


def _lawson_hanson(A: np.ndarray, b: np.ndarray, tol: float, max_iter: int | None = None) -> np.ndarray:
    """Non-negative least squares ``min ||A c - b||`` over ``c >= 0``.

    Classic active-set scheme: grow the passive set by the most violated
    multiplier, back off along the segment whenever the unconstrained
    sub-solve leaves the orthant.
    """
    k = A.shape[1]
    max_iter = 3 * k + 10 if max_iter is None else max_iter
    c = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    w = A.T @ (b - A @ c)
    it = 0
    while (~passive).any() and w[~passive].max() > tol:
        j = int(np.argmax(np.where(passive, -np.inf, w)))
        passive[j] = True
        while True:
            it += 1
            if it > max_iter:
                return c
            z = np.zeros(k)
            z[passive], *_ = np.linalg.lstsq(A[:, passive], b, rcond=None)
            if np.all(z[passive] > 0):
                break
            bad = passive & (z <= 0)
            step = np.min(c[bad] / (c[bad] - z[bad]))
            c = c + step * (z - c)
            passive &= c > tol
            c[~passive] = 0.0
        c = z
        w = A.T @ (b - A @ c)
    return c


def ideal_solution(F, x, gamma_set, tol: float = 1e-10) -> np.ndarray:
    """Conic projection of ``x`` onto the cone of the rows named in ``gamma_set``.

    Minimises ``||x - F^T r||`` with ``r`` supported on the walls of
    ``gamma_set`` and carrying each wall's sign (non-negative on ``+i``,
    non-positive on ``-i``).
    """
    F = as_matrix(F)
    n, m = F.shape
    x = as_vector(x, m, "x")
    walls = [w if isinstance(w, Wall) else Wall(*w) for w in gamma_set]
    r = np.zeros(n)
    if not walls:
        return r
    if any(not 0 <= w.index < n for w in walls):
        raise IndexError("wall index out of range")
    A = _wall_rows(F, walls).T
    c = _lawson_hanson(A, x, tol * max(1.0, float(np.abs(A.T @ x).max())))
    for w, ci in zip(walls, c):
        r[w.index] += w.sign * ci
    return r


def ideal_residual(F, x, u, eta: float, tau_cpl: float, mode: Mode | str = Mode.SIGNED) -> float:
    """``||x - F^T r_ideal||`` for the ideal cell of ``u``."""
    cpl = ideal_coupling(F, u, eta, tau_cpl, mode)
    r = ideal_solution(F, x, cpl.gamma_set)
    return float(np.linalg.norm(np.asarray(x, float) - np.asarray(F, float).T @ r))
