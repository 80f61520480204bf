"""Feasible sets and their projection oracles.

A point ``p`` is an *eps-projection* of ``x`` onto ``C`` when ``p`` lies in
``C`` and ``<x - p, y - p> <= eps`` for every ``y`` in ``C``.  At ``eps = 0``
this is the orthogonal projection.  The left-hand supremum is the *gap*; for
compact sets it is evaluated with one call to the linear minimization
oracle (LMO), which is how every oracle below certifies its output.

Symmetric matrices are handled through the ``svec`` embedding (upper
triangle, off-diagonal entries scaled by ``sqrt(2)``), so Frobenius inner
products become Euclidean ones and the solvers need a single code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg

from lmip.errors import BudgetExhausted, NoConverge, RequiresLMO
from lmip.linalg import project_simplex, sym_eig_full, sym_eig_topk

__all__ = [
    "svec",
    "smat",
    "svec_dim",
    "EpsProjection",
    "FeasibleSet",
    "BoxSet",
    "SimplexSet",
    "SpectrahedronSet",
    "RankState",
    "Projector",
    "project_box",
    "exact_project_spectrahedron",
    "condg_project",
    "fw_rank_p_project",
    "certify_eps_projection",
]

# Below this matrix size a dense LAPACK call beats the Lanczos iteration.
_DENSE_EIG_MAX = 64


# --------------------------------------------------------------------------
# svec embedding


@lru_cache(maxsize=16)
def _svec_layout(n):
    rows, cols = np.triu_indices(n)
    scale = np.where(rows == cols, 1.0, math.sqrt(2.0))
    return rows, cols, scale


def svec_dim(n):
    return n * (n + 1) // 2


def _mat_dim(N):
    n = int(round((math.sqrt(8 * N + 1) - 1) / 2))
    if svec_dim(n) != N:
        raise ValueError(f"length {N} is not a triangular number")
    return n


def svec(X):
    """Isometric vectorisation of a symmetric matrix."""
    X = np.asarray(X, dtype=float)
    rows, cols, scale = _svec_layout(X.shape[0])
    return X[rows, cols] * scale


def smat(x):
    """Inverse of :func:`svec`."""
    x = np.asarray(x, dtype=float)
    n = _mat_dim(x.size)
    rows, cols, scale = _svec_layout(n)
    X = np.empty((n, n))
    vals = x / scale
    X[rows, cols] = vals
    X[cols, rows] = vals
    return X


# --------------------------------------------------------------------------
# result type


@dataclass
class EpsProjection:
    """Output of an inexact projection oracle.

    ``gap`` is ``max_{y in C} <x - point, y - point>`` as evaluated by the
    oracle; exact projectors report ``0.0`` without spending an LMO call.
    ``rank`` is the accepted rank for the rank-p Frank-Wolfe projector and
    ``0`` otherwise.
    """

    point: np.ndarray
    gap: float
    epsilon_used: float
    inner_iterations: int = 0
    rank: int = 0


def _tolerance(eps, point):
    return float(eps(point)) if callable(eps) else float(eps)


# --------------------------------------------------------------------------
# sets


class FeasibleSet:
    """Closed convex set with projection and linear-minimization oracles.

    Subclasses provide ``contains``/``infeasibility``, an exact ``project``
    and, for compact sets, ``linear_minimizer`` and ``reference_point``.
    ``closed_form_projection`` marks sets whose exact projection is cheap
    enough to call every iteration (used for stationarity tests).
    """

    dim: int
    closed_form_projection = False

    def contains(self, x, tol=1e-10):
        return self.infeasibility(x) <= tol

    def infeasibility(self, x):
        raise NotImplementedError

    def project(self, x):
        raise NotImplementedError

    def linear_minimizer(self, g):
        raise RequiresLMO(f"{type(self).__name__} has no linear minimization oracle")

    def reference_point(self):
        raise NotImplementedError


class BoxSet(FeasibleSet):
    """``{x : lower <= x <= upper}``; bounds may be infinite."""

    closed_form_projection = True

    def __init__(self, lower, upper):
        self.lower = np.asarray(lower, dtype=float).copy()
        self.upper = np.asarray(upper, dtype=float).copy()
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("bounds must be vectors of equal length")
        if np.any(self.lower > self.upper) or np.any(np.isnan(self.lower + self.upper)):
            raise ValueError("lower must not exceed upper")
        self.dim = self.lower.size

    def __repr__(self):
        return f"BoxSet(lower={self.lower.tolist()}, upper={self.upper.tolist()})"

    def infeasibility(self, x):
        x = np.asarray(x, dtype=float)
        viol = np.maximum(self.lower - x, x - self.upper)
        return float(max(np.max(viol, initial=0.0), 0.0))

    def project(self, x):
        return np.minimum(self.upper, np.maximum(np.asarray(x, dtype=float), self.lower))

    def _require_bounded(self):
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise RequiresLMO("linear minimization over an unbounded box")

    def linear_minimizer(self, g):
        self._require_bounded()
        return np.where(np.asarray(g) < 0.0, self.upper, self.lower)

    def reference_point(self):
        lo = np.where(np.isfinite(self.lower), self.lower, np.nan)
        hi = np.where(np.isfinite(self.upper), self.upper, np.nan)
        mid = 0.5 * (lo + hi)
        mid = np.where(np.isnan(mid), self.project(np.zeros(self.dim)), mid)
        return mid


class SimplexSet(FeasibleSet):
    """Unit simplex ``{x >= 0, sum(x) = 1}``."""

    closed_form_projection = True

    def __init__(self, dim):
        self.dim = int(dim)

    def __repr__(self):
        return f"SimplexSet({self.dim})"

    def infeasibility(self, x):
        x = np.asarray(x, dtype=float)
        return float(max(-np.min(x), abs(np.sum(x) - 1.0), 0.0))

    def project(self, x):
        return project_simplex(x)

    def linear_minimizer(self, g):
        w = np.zeros(self.dim)
        w[int(np.argmin(g))] = 1.0
        return w

    def reference_point(self):
        return np.full(self.dim, 1.0 / self.dim)


def _extreme_eigpair(M, largest=True):
    """Largest (or smallest) eigenpair of a symmetric matrix or operator."""
    n = M.shape[0]
    if isinstance(M, np.ndarray) and n <= _DENSE_EIG_MAX:
        # Full LAPACK solve: the subset driver can return nothing on
        # tightly clustered spectra.
        w, V = np.linalg.eigh(M)
        idx = -1 if largest else 0
        return float(w[idx]), V[:, idx]
    op = scipy.sparse.linalg.aslinearoperator(M)
    sign = 1.0 if largest else -1.0
    try:
        w, V = sym_eig_topk(sign * op, 1)
    except NoConverge:
        dense = M if isinstance(M, np.ndarray) else op.matmat(np.eye(n))
        w, V = sym_eig_full(sign * dense)
    return sign * float(w[0]), V[:, 0]


class SpectrahedronSet(FeasibleSet):
    """Unit-trace positive semidefinite ``n x n`` matrices, in svec form."""

    def __init__(self, n):
        self.n = int(n)
        self.dim = svec_dim(self.n)

    def __repr__(self):
        return f"SpectrahedronSet({self.n})"

    def infeasibility(self, x):
        X = smat(x)
        lam_min, _ = _extreme_eigpair(X, largest=False)
        return float(max(abs(np.trace(X) - 1.0), -lam_min, 0.0))

    def project(self, x):
        return svec(exact_project_spectrahedron(smat(x)))

    def linear_minimizer(self, g):
        _, v = _extreme_eigpair(smat(g), largest=False)
        return svec(np.outer(v, v))

    def reference_point(self):
        return svec(np.eye(self.n) / self.n)


@dataclass
class RankState:
    """Rank guess carried between rank-p Frank-Wolfe calls."""

    p: int = 1

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("rank guess must be at least 1")


# --------------------------------------------------------------------------
# oracles


def project_box(box, x):
    """Componentwise clamp ``min(u, max(x, l))``."""
    return box.project(x)


def exact_project_spectrahedron(Y):
    """Frobenius projection onto the spectrahedron via a full eigensolve."""
    w, Q = sym_eig_full(Y)
    lam = project_simplex(w)
    support = lam > 0.0
    Qs = Q[:, support]
    Z = (Qs * lam[support]) @ Qs.T
    return 0.5 * (Z + Z.T)


def certify_eps_projection(C, x, p):
    """``max_{y in C} <x - p, y - p>`` using one LMO call."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    y = C.linear_minimizer(p - x)
    return float(np.dot(x - p, y - p))


def condg_project(C, x, eps, budget=10_000, z0=None):
    """Conditional-gradient (Frank-Wolfe) eps-projection of ``x`` onto ``C``.

    Minimises ``||z - x||^2 / 2`` over ``C`` with exact line search and stops
    as soon as the Frank-Wolfe gap ``<x - z_t, w_t - z_t>`` drops to the
    tolerance.  ``eps`` may be a number or a callable of the current iterate,
    which allows tolerances that depend on the answer itself.

    The start is ``z0`` when given, ``x`` when it is feasible, and the set's
    reference point otherwise.

    Raises
    ------
    BudgetExhausted
        After ``budget`` steps without meeting the rule.  The last iterate,
        which has the lowest objective since the line search is exact, is
        attached as ``exc.result`` together with its gap.
    """
    x = np.asarray(x, dtype=float)
    if z0 is not None:
        z = np.asarray(z0, dtype=float).copy()
    elif C.contains(x):
        z = x.copy()
    else:
        z = C.reference_point()
    for t in range(budget + 1):
        w = C.linear_minimizer(z - x)
        dz = w - z
        gap = float(np.dot(x - z, dz))
        tol = _tolerance(eps, z)
        if gap <= tol:
            return EpsProjection(z, gap, tol, t)
        if t == budget:
            break
        alpha = min(max(gap / float(np.dot(dz, dz)), 0.0), 1.0)
        z = z + alpha * dz
    raise BudgetExhausted(
        f"conditional gradient: gap {gap:.3e} above tolerance {tol:.3e} "
        f"after {budget} steps",
        result=EpsProjection(z, gap, tol, budget),
    )


def _top_eigs(Y, p, cache):
    n = Y.shape[0]
    if "full" not in cache and (n <= _DENSE_EIG_MAX or 4 * p >= n):
        cache["full"] = sym_eig_full(Y)
    if "full" in cache:
        w, V = cache["full"]
        return w[:p], V[:, :p]
    try:
        return sym_eig_topk(Y, p)
    except NoConverge:
        cache["full"] = sym_eig_full(Y)
        w, V = cache["full"]
        return w[:p], V[:, :p]


def fw_rank_p_project(S, Y, eps, state=None):
    """Rank-p Frank-Wolfe eps-projection onto the spectrahedron.

    With ``V, lam`` the top-p eigenpairs of ``Y``, the candidate is
    ``Z = V diag(P_simplex(lam)) V^T``, the nearest member of rank at most
    ``p``.  The candidate is certified by the LMO: the leading eigenvector
    ``v`` of ``Y - Z`` gives the vertex ``v v^T`` and the gap
    ``<Y - Z, v v^T - Z>``.  If the gap exceeds ``eps`` the rank guess is
    doubled; at ``p = n`` the candidate is the exact projection and is
    accepted unconditionally.

    ``Y`` may be a matrix or an svec vector; the returned point uses the same
    representation, as does the argument passed to a callable ``eps``.

    Returns ``(EpsProjection, RankState)``; the state carries the accepted
    rank as the warm start for the next call.
    """
    as_vector = np.ndim(Y) == 1
    Y = smat(Y) if as_vector else np.asarray(Y, dtype=float)
    n = Y.shape[0]
    if n != S.n:
        raise ValueError(f"matrix of size {n} for {S!r}")
    p = min(max(state.p if state is not None else 1, 1), n)
    cache = {}
    tries = 0
    while True:
        tries += 1
        lam, V = _top_eigs(Y, p, cache)
        w = project_simplex(lam)
        Z = (V * w) @ V.T
        Z = 0.5 * (Z + Z.T)
        point = svec(Z) if as_vector else Z
        tol = _tolerance(eps, point)
        A = Y - Z
        if p >= n:
            gap = max(certify_matrix_gap(A, Z), 0.0)
            return EpsProjection(point, gap, max(tol, gap), tries, p), RankState(p)
        gap = certify_matrix_gap(A, Z)
        if gap <= tol:
            return EpsProjection(point, gap, tol, tries, p), RankState(p)
        p = min(2 * p, n)


def certify_matrix_gap(A, Z):
    """Gap ``max_W <A, W - Z>`` over the spectrahedron, with ``A = Y - Z``."""
    _, v = _extreme_eigpair(A, largest=True)
    return float(v @ A @ v - np.vdot(A, Z))


# --------------------------------------------------------------------------
# solver-facing wrapper


class Projector:
    """Chooses and runs the projection oracle for a solver.

    ``mode`` is ``"exact"``, ``"condg"`` or ``"fwp"`` (spectrahedron only).
    Requests with a zero tolerance use the exact projection whatever the
    mode, since an exact projection is always a valid eps-projection.
    """

    MODES = ("exact", "condg", "fwp")

    def __init__(self, feasible_set, mode="exact", condg_budget=10_000, rank_state=None):
        if mode not in self.MODES:
            raise ValueError(f"unknown projection mode {mode!r}")
        if mode == "fwp" and not isinstance(feasible_set, SpectrahedronSet):
            raise ValueError("rank-p Frank-Wolfe needs a spectrahedron")
        self.set = feasible_set
        self.mode = mode
        self.condg_budget = condg_budget
        self.rank_state = rank_state or RankState()

    def project(self, x, eps):
        if self.mode == "exact" or (not callable(eps) and eps == 0.0):
            point = self.set.project(x)
            return EpsProjection(point, 0.0, _tolerance(eps, point), 0, 0)
        if self.mode == "fwp":
            result, self.rank_state = fw_rank_p_project(self.set, x, eps, self.rank_state)
            return result
        return condg_project(self.set, x, eps, budget=self.condg_budget)
