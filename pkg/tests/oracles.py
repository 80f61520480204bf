"""Independent reference implementations used as test oracles."""

import itertools

import numpy as np


def simplex_projection_enum(y):
    """Projection onto the unit simplex by enumerating every support set."""
    y = np.asarray(y, dtype=float)
    n = y.size
    best, best_dist = None, np.inf
    for r in range(1, n + 1):
        for support in itertools.combinations(range(n), r):
            idx = list(support)
            tau = (y[idx].sum() - 1.0) / r
            w = np.zeros(n)
            w[idx] = y[idx] - tau
            if np.any(w[idx] < -1e-15):
                continue
            dist = np.sum((w - y) ** 2)
            if dist < best_dist:
                best, best_dist = np.maximum(w, 0.0), dist
    return best


def normal_equations_step(J, F, mu):
    J = np.asarray(J, dtype=float)
    n = J.shape[1]
    return np.linalg.solve(J.T @ J + mu * np.eye(n), -J.T @ F)


def central_difference_jacobian(F, x):
    """Central differences with ``h_i = 1e-6 (1 + |x_i|)``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = 1e-6 * (1.0 + abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(F(x + e)) - np.asarray(F(x - e))) / (2.0 * h))
    return np.column_stack(cols)


def box_gap(lower, upper, x, p):
    """``max_{y in box} <x - p, y - p>`` in closed form."""
    r = x - p
    y = np.where(r > 0.0, upper, lower)
    return float(r @ (y - p))


def random_feasible_box(rng, lower, upper):
    return lower + rng.random(lower.size) * (upper - lower)


def random_spectrahedron_point(rng, n, rank=None):
    G = rng.standard_normal((n, rank or n))
    X = G @ G.T
    return X / np.trace(X)
