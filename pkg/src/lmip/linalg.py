"""Dense linear-algebra kernels used by the solvers and projection oracles.

Everything here is a pure function of its inputs.  Eigen-decompositions
return ``(values, vectors)`` with values in descending order and the
eigenvectors stored as columns; each eigenvector is sign-normalised so that
its largest-magnitude component is positive, which keeps golden traces
reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from lmip.errors import NoConverge, NonFinite

__all__ = [
    "EigPair",
    "eigpairs",
    "solve_lm_system",
    "sym_eig_full",
    "sym_eig_topk",
    "project_simplex",
]


@dataclass(frozen=True)
class EigPair:
    value: float
    vector: np.ndarray


def eigpairs(values, vectors):
    """Split a ``(values, vectors)`` decomposition into :class:`EigPair` items."""
    return [EigPair(float(v), vectors[:, i]) for i, v in enumerate(values)]


def _check_finite(name, a):
    data = a.data if scipy.sparse.issparse(a) else np.asarray(a)
    if not np.all(np.isfinite(data)):
        raise NonFinite(f"{name} contains non-finite entries")


def _normalize_signs(vectors):
    if vectors.size == 0:
        return vectors
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def _qr_lstsq(A, rhs):
    """Least-squares solution of ``A z ~ rhs`` for full-column-rank ``A``."""
    Q, R = np.linalg.qr(A, mode="reduced")
    return scipy.linalg.solve_triangular(R, Q.T @ rhs, lower=False)


def solve_lm_system(J, residual, mu):
    """Solve the regularised LM system ``(J^T J + mu I) d = -J^T F``.

    The solution is obtained from a Householder QR factorisation of an
    augmented matrix rather than from the normal equations.  Columns of ``J``
    that are identically zero give ``d_j = 0`` and are dropped first.  On the
    remaining columns, a tall Jacobian uses ``[J; sqrt(mu) I]`` directly,
    while a wide one uses the equivalent row form
    ``d = -J^T u`` with ``u`` the least-squares solution of
    ``[J^T; sqrt(mu) I] u ~ [0; F / sqrt(mu)]``.

    Parameters
    ----------
    J : (m, n) ndarray or scipy sparse matrix
    residual : (m,) array_like
    mu : float
        Regularisation parameter, must be positive.

    Returns
    -------
    d : (n,) ndarray
    """
    F = np.asarray(residual, dtype=float)
    _check_finite("residual", F)
    if scipy.sparse.issparse(J):
        J = scipy.sparse.csc_matrix(J, dtype=float)
        J.eliminate_zeros()
        _check_finite("J", J)
        m, n = J.shape
        cols = np.flatnonzero(np.diff(J.indptr))
        J_s = J[:, cols].toarray()
    else:
        J = np.asarray(J, dtype=float)
        if J.ndim != 2:
            raise ValueError("J must be two-dimensional")
        _check_finite("J", J)
        m, n = J.shape
        cols = np.flatnonzero(np.any(J != 0.0, axis=0))
        J_s = J[:, cols]
    if F.shape != (m,):
        raise ValueError(f"residual has shape {F.shape}, expected ({m},)")
    if not (mu > 0.0 and math.isfinite(mu)):
        raise ValueError("mu must be positive and finite")

    d = np.zeros(n)
    s = cols.size
    if s == 0:
        return d
    root_mu = math.sqrt(mu)
    if m >= s:
        A = np.vstack([J_s, root_mu * np.eye(s)])
        rhs = np.concatenate([-F, np.zeros(s)])
        d[cols] = _qr_lstsq(A, rhs)
    else:
        A = np.vstack([J_s.T, root_mu * np.eye(m)])
        rhs = np.concatenate([np.zeros(s), F / root_mu])
        u = _qr_lstsq(A, rhs)
        d[cols] = -(J_s.T @ u)
    return d


def _as_symmetric(M):
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix")
    _check_finite("M", M)
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > 1e-10 * (1.0 + np.max(np.abs(M))):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (M + M.T)


def _jacobi_eigh(A, max_sweeps):
    # Cyclic-by-row Jacobi; rotations are applied to whole rows/columns.
    n = A.shape[0]
    A = A.copy()
    V = np.eye(n)
    scale = np.linalg.norm(A)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= 1e-14 * scale or off == 0.0:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    raise NoConverge(f"Jacobi did not converge in {max_sweeps} sweeps")


def sym_eig_full(M, method="lapack", max_sweeps=30):
    """Full eigendecomposition of a real symmetric matrix.

    ``method="lapack"`` calls the LAPACK divide-and-conquer driver;
    ``method="jacobi"`` runs cyclic Jacobi rotations with a budget of
    ``max_sweeps`` sweeps (only sensible for small matrices).

    Returns ``(values, vectors)`` with values descending.
    """
    A = _as_symmetric(M)
    if method == "lapack":
        try:
            w, V = np.linalg.eigh(A)
        except np.linalg.LinAlgError as exc:
            raise NoConverge(str(exc)) from exc
    elif method == "jacobi":
        w, V = _jacobi_eigh(A, max_sweeps)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.argsort(-w, kind="stable")
    return w[order], _normalize_signs(V[:, order])


def _orthonormalize(W, V, rng, drop_tol=1e-10):
    """Orthonormalise the columns of ``W`` against ``V`` and each other.

    Columns that collapse (numerically inside ``span(V)``) are replaced by
    random directions so the basis keeps growing.
    """
    n = W.shape[0]
    out = []
    basis = V
    for col in W.T:
        for attempt in range(3):
            w = col.copy()
            nrm0 = np.linalg.norm(w)
            for _ in range(2):
                if basis.shape[1]:
                    w -= basis @ (basis.T @ w)
            nrm = np.linalg.norm(w)
            if nrm0 > 0.0 and nrm > drop_tol * nrm0:
                w /= nrm
                out.append(w)
                basis = np.column_stack([basis, w])
                break
            if basis.shape[1] >= n:
                break
            col = rng.standard_normal(n)
    if not out:
        return np.zeros((n, 0))
    return np.column_stack(out)


def sym_eig_topk(M, k, tol=1e-10, max_matvecs=None, block_size=None, seed=0):
    """The ``k`` algebraically largest eigenpairs of a symmetric operator.

    Block Lanczos with full reorthogonalisation and thick restarts: the
    Krylov basis is extended with the residuals of the wanted Ritz pairs
    (which lie in the next Krylov space) and, when it reaches its size cap,
    compressed to the leading Ritz vectors.  A pair is accepted once
    ``||M v - theta v|| <= tol * |theta|_max``.

    Parameters
    ----------
    M : (n, n) ndarray, sparse matrix or LinearOperator
    k : int
        Number of eigenpairs, ``1 <= k <= n``.
    tol : float
        Relative residual tolerance.
    max_matvecs : int, optional
        Budget of operator applications; defaults to ``ceil(10 k sqrt(n))``.
    block_size : int, optional
        Number of vectors added per step; defaults to ``k``.
    seed : int
        Seed of the deterministic random start block.

    Raises
    ------
    NoConverge
        If the budget is exhausted before all ``k`` pairs converge.
    """
    if isinstance(M, np.ndarray):
        _check_finite("M", M)
    op = scipy.sparse.linalg.aslinearoperator(M)
    n = op.shape[0]
    if op.shape != (n, n):
        raise ValueError("operator must be square")
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}]")
    b = min(block_size or k, n)
    budget = max_matvecs or int(math.ceil(10 * k * math.sqrt(n)))
    max_basis = min(n, max(4 * k + 2 * b, 3 * b + 24))
    keep = min(max_basis - b, max(k + b, max_basis // 2))
    rng = np.random.default_rng(seed)

    V = _orthonormalize(rng.standard_normal((n, b)), np.zeros((n, 0)), rng)
    AV = np.asarray(op.matmat(V))
    used = V.shape[1]
    while True:
        H = V.T @ AV
        H = 0.5 * (H + H.T)
        theta, S = np.linalg.eigh(H)
        order = np.argsort(-theta, kind="stable")
        theta, S = theta[order], S[:, order]
        j = V.shape[1]
        nw = min(j, k + b)
        X = V @ S[:, :nw]
        R = AV @ S[:, :nw] - X * theta[:nw]
        rnorm = np.linalg.norm(R, axis=0)
        scale = max(abs(theta[0]), abs(theta[-1]))
        done = rnorm <= tol * scale
        if j >= n or (j >= k and np.all(done[:k])):
            vecs = X[:, :k] / np.linalg.norm(X[:, :k], axis=0)
            return theta[:k].copy(), _normalize_signs(vecs)
        if used >= budget:
            raise NoConverge(
                f"block Lanczos: {int(np.sum(done[:k]))}/{k} pairs converged "
                f"after {used} products"
            )
        pick = [i for i in range(nw) if not done[i]][:b]
        W = R[:, pick] if pick else rng.standard_normal((n, b))
        if j + W.shape[1] > max_basis:
            V = V @ S[:, :keep]
            AV = AV @ S[:, :keep]
        W = _orthonormalize(W, V, rng)
        if W.shape[1] == 0:
            W = _orthonormalize(rng.standard_normal((n, b)), V, rng)
        AW = np.asarray(op.matmat(W))
        used += W.shape[1]
        V = np.column_stack([V, W])
        AV = np.column_stack([AV, AW])


def project_simplex(y):
    """Euclidean projection onto the unit simplex (sort and threshold)."""
    y = np.asarray(y, dtype=float)
    _check_finite("y", y)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("y must be a non-empty vector")
    u = np.sort(y)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, y.size + 1)
    rho = np.nonzero(u - (css - 1.0) / ks > 0.0)[0][-1]
    tau = (css[rho] - 1.0) / (rho + 1)
    return np.maximum(y - tau, 0.0)
