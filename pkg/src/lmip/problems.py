"""Test problems: spectrahedron instances with a planted solution and a small
box-constrained desk suite.

Random numbers come from NumPy's PCG64 generator (``numpy.random.default_rng``),
whose streams are portable across platforms, so an ``(n, m, q, seed)`` tuple
always produces the same instance bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse

from lmip.errors import InvalidDims
from lmip.sets import BoxSet, FeasibleSet, SpectrahedronSet, svec, svec_dim

__all__ = [
    "NlsProblem",
    "DeskProblem",
    "SpectraInstance",
    "gen_spectra_instance",
    "spectra_start",
    "desk_suite",
    "get_desk_problem",
]


@dataclass
class NlsProblem:
    """Find ``x`` in ``feasible_set`` with ``residual(x) = 0``.

    ``jacobian(x)`` returns an ``(m, n)`` array or scipy sparse matrix.
    """

    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], object]
    feasible_set: FeasibleSet
    n: int
    m: int
    name: str = ""


@dataclass
class DeskProblem(NlsProblem):
    solutions: list = field(default_factory=list)
    start: np.ndarray | None = None


# --------------------------------------------------------------------------
# spectrahedron instances


def _svec_position(n, i, j):
    # Row-major upper triangle: row i starts after sum_{r<i} (n - r) entries.
    return i * n - i * (i - 1) // 2 + (j - i)


def _largest_upper_entries(X, m):
    rows, cols = np.triu_indices(X.shape[0])
    vals = X[rows, cols]
    order = np.lexsort((cols, rows, -vals))[:m]
    return np.column_stack([rows[order], cols[order]])


def _planted_matrix(V, q):
    X = (V @ V.T) / q
    return 0.5 * (X + X.T)


@dataclass(frozen=True, eq=False)
class SpectraInstance:
    """Affine system ``<A_l, X> = b_l`` over the spectrahedron.

    ``A_l = (e_i e_j^T + e_j e_i^T) / 2`` for the pair ``pairs[l] = (i, j)``,
    so ``<A_l, X> = X_ij``.  Points are handled in svec form, where the
    Jacobian is a constant sparse matrix with one entry per row (``1`` on the
    diagonal, ``1/sqrt(2)`` off it).
    """

    n: int
    m: int
    q: int
    seed: int
    pairs: np.ndarray
    b: np.ndarray
    eigvecs: np.ndarray

    def __post_init__(self):
        i, j = self.pairs[:, 0], self.pairs[:, 1]
        pos = _svec_position(self.n, i, j)
        coef = np.where(i == j, 1.0, 1.0 / math.sqrt(2.0))
        jac = scipy.sparse.csr_matrix(
            (coef, (np.arange(self.m), pos)), shape=(self.m, svec_dim(self.n))
        )
        object.__setattr__(self, "_pos", pos)
        object.__setattr__(self, "_coef", coef)
        object.__setattr__(self, "_jac", jac)

    @property
    def X_star(self):
        return _planted_matrix(self.eigvecs, self.q)

    def residual(self, x):
        x = np.asarray(x, dtype=float)
        return x[self._pos] * self._coef - self.b

    def jacobian(self, x=None):
        return self._jac

    def as_problem(self):
        return NlsProblem(
            residual=self.residual,
            jacobian=self.jacobian,
            feasible_set=SpectrahedronSet(self.n),
            n=svec_dim(self.n),
            m=self.m,
            name=f"spectra:{self.n},{self.m},{self.q},{self.seed}",
        )

    # -- text export -------------------------------------------------------

    def to_text(self):
        lines = [
            "# lmip spectrahedron instance v1",
            "# F(X) = (X[i,j] for (i,j) in pairs) - b; X* = V V^T / q",
            f"n {self.n}",
            f"m {self.m}",
            f"q {self.q}",
            f"seed {self.seed}",
            "pairs",
        ]
        lines += [f"{i} {j}" for i, j in self.pairs]
        lines.append("b")
        lines += [repr(float(v)) for v in self.b]
        lines.append("eigvecs")
        lines += [" ".join(repr(float(v)) for v in row) for row in self.eigvecs]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        lines = [ln.strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln and not ln.startswith("#")]
        try:
            header = {}
            for key in ("n", "m", "q", "seed"):
                name, value = lines.pop(0).split()
                if name != key:
                    raise ValueError(f"expected {key!r}, found {name!r}")
                header[key] = int(value)
            n, m, q = header["n"], header["m"], header["q"]
            if lines.pop(0) != "pairs":
                raise ValueError("missing 'pairs' section")
            pairs = np.array([[int(t) for t in lines.pop(0).split()] for _ in range(m)])
            if lines.pop(0) != "b":
                raise ValueError("missing 'b' section")
            b = np.array([float(lines.pop(0)) for _ in range(m)])
            if lines.pop(0) != "eigvecs":
                raise ValueError("missing 'eigvecs' section")
            V = np.array([[float(t) for t in lines.pop(0).split()] for _ in range(n)])
        except (IndexError, ValueError) as exc:
            raise ValueError(f"malformed instance text: {exc}") from exc
        if V.shape != (n, q) or pairs.shape != (m, 2):
            raise ValueError("instance sections have inconsistent sizes")
        inst = cls(n, m, q, header["seed"], pairs, b, V)
        if not np.array_equal(inst.residual(svec(inst.X_star)), np.zeros(m)):
            raise ValueError("stored b does not match the stored eigenbasis")
        return inst

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())


def gen_spectra_instance(n, m, q, seed):
    """Generate an instance with a planted rank-``q`` solution.

    ``Q*`` is Haar-distributed: the QR factor of a standard Gaussian matrix
    with the signs of ``diag(R)`` folded into ``Q``.  ``X* = Q*_q Q*_q^T / q``
    keeps ``q`` eigenvalues equal to ``1/q``.  The equations pick the ``m``
    largest upper-triangular entries of ``X*`` (ties broken by ``(i, j)``)
    and ``b`` is read off ``X*`` so that ``F(X*) = 0`` exactly.
    """
    n, m, q, seed = int(n), int(m), int(q), int(seed)
    if not 1 <= q <= n:
        raise InvalidDims(f"q={q} must lie in [1, n={n}]")
    if not 1 <= m <= svec_dim(n):
        raise InvalidDims(f"m={m} must lie in [1, {svec_dim(n)}]")
    rng = np.random.default_rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    V = (Q * signs)[:, :q].copy()
    X = _planted_matrix(V, q)
    pairs = _largest_upper_entries(X, m)
    i, j = pairs[:, 0], pairs[:, 1]
    coef = np.where(i == j, 1.0, 1.0 / math.sqrt(2.0))
    b = svec(X)[_svec_position(n, i, j)] * coef
    return SpectraInstance(n, m, q, seed, pairs, b, V)


def spectra_start(n, a):
    """``(1 - a) I/n + a e1 e1^T``: barycenter at ``a=0``, a vertex at ``a=1``."""
    if not 0.0 <= a <= 1.0:
        raise ValueError("a must lie in [0, 1]")
    X = (1.0 - a) * np.eye(n) / n
    X[0, 0] += a
    return X


# --------------------------------------------------------------------------
# desk suite


def _linear_problem(seed=7):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((2, 3))
    x_bar = np.array([0.3, 0.6, 0.45])
    b = A @ x_bar
    return DeskProblem(
        residual=lambda x: A @ x - b,
        jacobian=lambda x: A.copy(),
        feasible_set=BoxSet(np.zeros(3), np.ones(3)),
        n=3,
        m=2,
        name="D1",
        solutions=[x_bar],
        start=np.array([1.0, 0.0, 1.0]),
    )


def _identity_problem():
    return DeskProblem(
        residual=lambda x: np.asarray(x, dtype=float).copy(),
        jacobian=lambda x: np.eye(1),
        feasible_set=BoxSet([-1.0], [1.0]),
        n=1,
        m=1,
        name="D2",
        solutions=[np.zeros(1)],
        start=np.array([0.5]),
    )


def _circle_line_problem():
    def F(x):
        return np.array([x[0] ** 2 + x[1] ** 2 - 1.0, x[0] - x[1]])

    def J(x):
        return np.array([[2.0 * x[0], 2.0 * x[1]], [1.0, -1.0]])

    r = math.sqrt(2.0) / 2.0
    return DeskProblem(
        residual=F,
        jacobian=J,
        feasible_set=BoxSet(np.zeros(2), np.ones(2)),
        n=2,
        m=2,
        name="D3",
        solutions=[np.array([r, r])],
        start=np.array([1.0, 0.0]),
    )


def _corner_problem():
    # Both roots sit on the boundary of the box.
    def F(x):
        return np.array([x[0] + x[1] - 1.0, x[0] * x[1]])

    def J(x):
        return np.array([[1.0, 1.0], [x[1], x[0]]])

    return DeskProblem(
        residual=F,
        jacobian=J,
        feasible_set=BoxSet(np.zeros(2), np.ones(2)),
        n=2,
        m=2,
        name="D4",
        solutions=[np.array([1.0, 0.0]), np.array([0.0, 1.0])],
        start=np.array([0.9, 0.5]),
    )


def _sphere_problem():
    # Underdetermined: one equation in three unknowns, lower bounds active
    # along part of the solution set.
    def F(x):
        return np.array([x @ x - 1.0])

    def J(x):
        return 2.0 * np.asarray(x, dtype=float)[None, :]

    return DeskProblem(
        residual=F,
        jacobian=J,
        feasible_set=BoxSet(np.full(3, 0.2), np.full(3, 2.0)),
        n=3,
        m=1,
        name="D5",
        solutions=[np.full(3, 1.0 / math.sqrt(3.0))],
        start=np.array([2.0, 2.0, 0.2]),
    )


def desk_suite():
    """Small analytic box-constrained problems with known roots."""
    return [
        _linear_problem(),
        _identity_problem(),
        _circle_line_problem(),
        _corner_problem(),
        _sphere_problem(),
    ]


def get_desk_problem(name):
    for problem in desk_suite():
        if problem.name == name:
            return problem
    raise KeyError(f"unknown desk problem {name!r}")
