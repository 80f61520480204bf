"""Globalised LM method with inexact projections.

Each iteration tries the projected LM direction ``dbar = P(x + d_u, eps) - x``.
It is used (possibly with its sign flipped) when it is well aligned with the
merit gradient and of comparable length; otherwise an inexact projected
gradient step is taken.  Steps are accepted by a nonmonotone Armijo rule
against the largest merit value in a sliding window of recent iterates.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass, field, fields, replace

import numpy as np

from lmip.errors import BudgetExhausted, InvalidConfig, LineSearchFail, NonFinite
from lmip.local import ThetaSchedule, _start_point, evaluate, lm_direction
from lmip.sets import Projector, RankState
from lmip.trace import IterateTrace, SolveResult, Status

__all__ = [
    "GlobalConfig",
    "PRESETS",
    "preset",
    "HistoryWindow",
    "LineSearchResult",
    "merit_and_gradient",
    "lm_direction_filter",
    "projected_gradient_direction",
    "nonmonotone_search",
    "g_lmm_ip_solve",
]


@dataclass
class GlobalConfig:
    M: int = 1
    eta1: float = 1e-4
    eta2: float = 1e-2
    eta3: float = 1e10
    gamma: float = 1e-3
    beta: float = 0.5
    theta: ThetaSchedule = field(default_factory=ThetaSchedule)
    tol_F: float = 1e-6
    tol_stationarity: float = 1e-10
    max_iters: int = 500
    max_backtracks: int = 60
    projection: str = "exact"
    condg_budget: int = 10_000
    rank_p0: int = 1

    def __post_init__(self):
        self.theta = ThetaSchedule.parse(self.theta)
        if self.M < 0:
            raise InvalidConfig("M must be nonnegative")
        if not (self.eta1 > 0.0 and 0.0 < self.eta2 < self.eta3):
            raise InvalidConfig("need eta1 > 0 and eta3 > eta2 > 0")
        if not (0.0 < self.gamma < 1.0 and 0.0 < self.beta < 1.0):
            raise InvalidConfig("gamma and beta must lie in (0, 1)")
        if not (self.tol_F > 0.0 and self.tol_stationarity > 0.0):
            raise InvalidConfig("tolerances must be positive")
        if self.max_iters < 0 or self.max_backtracks < 0:
            raise InvalidConfig("iteration limits must be nonnegative")
        if self.condg_budget < 1 or self.rank_p0 < 1:
            raise InvalidConfig("projection budgets must be positive")
        if self.projection not in Projector.MODES:
            raise InvalidConfig(f"unknown projection mode {self.projection!r}")

    def as_dict(self):
        return {f.name: str(getattr(self, f.name)) for f in fields(self)}


PRESETS = {
    # box-constrained test set
    "box41": dict(M=1, eta1=1e-4, eta2=1e-2, eta3=1e10, gamma=1e-3, beta=0.5,
                  theta=ThetaSchedule(0.0), tol_F=1e-6),
    # spectrahedron instances, inexact rank-p Frank-Wolfe projections
    "spectra42": dict(M=1, eta1=1e-2, eta2=1e-3, eta3=1e6, gamma=1e-3, beta=0.5,
                      theta=ThetaSchedule(0.9), tol_F=1e-2, projection="fwp"),
}


def preset(name, **overrides):
    """A :class:`GlobalConfig` from a named parameter block plus overrides."""
    try:
        base = PRESETS[name]
    except KeyError:
        raise InvalidConfig(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(GlobalConfig(**base), **overrides)


class HistoryWindow:
    """Merit values of the last ``m_k + 1`` iterates, ``m_k = min(k, M)``."""

    def __init__(self, M, f0):
        self.M = int(M)
        self.values = deque([float(f0)], maxlen=self.M + 1)
        self.m = 0

    @property
    def watermark(self):
        return max(self.values)

    def push(self, f):
        self.values.append(float(f))
        self.m = min(self.m + 1, self.M)


@dataclass
class LineSearchResult:
    alpha: float
    x: np.ndarray
    F_val: np.ndarray
    f: float
    backtracks: int


def merit_and_gradient(problem, x):
    """``f = ||F(x)||^2 / 2`` and ``grad f = J(x)^T F(x)``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise NonFinite("x contains non-finite entries")
    state = evaluate(problem, x)
    return state.f, state.grad


def lm_direction_filter(grad, dbar, config):
    """Accept the projected LM direction or return ``None``.

    Accepted when ``|<g, dbar>| > eta1 ||dbar||^2`` and
    ``eta2 ||g|| <= ||dbar|| <= eta3 ||g||``; the accepted direction is
    ``-sign(<g, dbar>) dbar`` so that it always points downhill.
    """
    slope = float(grad @ dbar)
    dnorm = float(np.linalg.norm(dbar))
    gnorm = float(np.linalg.norm(grad))
    if abs(slope) <= config.eta1 * dnorm * dnorm:
        return None
    if not (config.eta2 * gnorm <= dnorm <= config.eta3 * gnorm):
        return None
    return -math.copysign(1.0, slope) * dbar


def projected_gradient_direction(x, grad, theta, projector):
    """``d = y - x`` with ``y`` an eps-projection of ``x - grad``.

    The tolerance ``theta^2 ||y - x||^2`` depends on the answer, so it is
    re-evaluated at each inner iterate; ``theta = 0`` requests the exact
    projection.  Returns ``(d, EpsProjection)``.
    """
    x = np.asarray(x, dtype=float)
    if theta == 0.0:
        eps = 0.0
    else:
        t2 = theta * theta

        def eps(y):
            r = y - x
            return t2 * float(r @ r)

    proj = projector.project(x - grad, eps)
    return proj.point - x, proj


def nonmonotone_search(problem, x, d, window, config, slope):
    """Backtrack ``alpha = 1, beta, beta^2, ...`` until
    ``f(x + alpha d) <= watermark + gamma alpha slope``.

    ``slope`` is ``<grad f(x), d>`` and must be negative.  Each trial costs
    one residual evaluation; non-finite trial residuals count as rejections.

    Raises
    ------
    LineSearchFail
        After ``max_backtracks`` rejected trials.
    """
    if not slope < 0.0:
        raise ValueError("search direction is not a descent direction")
    ref = window.watermark
    alpha = 1.0
    for backtracks in range(config.max_backtracks + 1):
        trial = x + alpha * d
        F = np.asarray(problem.residual(trial), dtype=float)
        f = 0.5 * float(F @ F) if np.all(np.isfinite(F)) else math.inf
        if f <= ref + config.gamma * alpha * slope:
            return LineSearchResult(alpha, trial, F, f, backtracks)
        alpha *= config.beta
    raise LineSearchFail(
        f"no acceptable step after {config.max_backtracks} backtracks "
        f"(watermark {ref:.3e}, slope {slope:.3e})"
    )


def _is_zero_step(d, x):
    return float(np.linalg.norm(d)) <= 1e-12 * (1.0 + float(np.linalg.norm(x)))


def g_lmm_ip_solve(problem, x0, config=None):
    """Run the globalised method from ``x0``.

    Statuses: ``CONVERGED`` when ``||F|| <= tol_F``; ``STATIONARY`` when the
    projected-gradient step vanishes or, for sets with a closed-form
    projection, ``||P(x - grad) - x|| <= tol_stationarity``; ``MAX_ITERS``;
    ``LINE_SEARCH_FAIL``; ``BUDGET_EXHAUSTED`` when an inexact projection
    runs out of inner iterations; ``NON_FINITE``.

    ``diagnostics`` records, per iteration, the LM tolerance ``eps``, the
    watermark used by the search, the directional derivative, ``||d||``,
    ``||grad||``, ``theta_k`` and the window length ``m_k``.
    """
    config = config or GlobalConfig()
    t0 = time.perf_counter()
    C = problem.feasible_set
    projector = Projector(C, mode=config.projection, condg_budget=config.condg_budget,
                          rank_state=RankState(config.rank_p0))
    x, projected = _start_point(problem, x0)

    def ms():
        return 1000.0 * (time.perf_counter() - t0)

    diag = {key: [] for key in
            ("eps", "watermark", "dir_deriv", "d_norm", "grad_norm", "theta", "m", "gap")}
    diag["watermark_seq"] = []
    try:
        state = evaluate(problem, x, 0, jacobian=False)
    except NonFinite as exc:
        return SolveResult(x, Status.NON_FINITE, [], 1, 0.0, str(exc), diag)
    n_fev = 1
    window = HistoryWindow(config.M, state.f)
    diag["watermark_seq"].append(window.watermark)
    normF = math.sqrt(state.mu)
    trace = [
        IterateTrace(0, normF, state.f, "init-proj" if projected else "init",
                     0.0, 0, 0, 0, C.infeasibility(x), ms())
    ]
    status, message = Status.MAX_ITERS, ""
    try:
        for k in range(config.max_iters + 1):
            if normF <= config.tol_F:
                status = Status.CONVERGED
                break
            state = evaluate(problem, x, k)
            g = state.grad
            if C.closed_form_projection:
                if np.linalg.norm(C.project(x - g) - x) <= config.tol_stationarity:
                    status, message = Status.STATIONARY, "projected gradient vanishes"
                    break
            if k == config.max_iters:
                break
            theta = config.theta(k)

            # projected LM direction
            d_u = lm_direction(state)
            eps = theta * theta * float(d_u @ d_u)
            proj = projector.project(x + d_u, eps)
            dbar = proj.point - x
            d = lm_direction_filter(g, dbar, config)
            kind = "lm" if d is not None and float(g @ dbar) < 0.0 else "lm-flip"
            proj_iters, rank_p = proj.inner_iterations, proj.rank

            # safeguard: inexact projected gradient
            if d is None:
                kind = "pg"
                d, pg = projected_gradient_direction(x, g, theta, projector)
                proj_iters += pg.inner_iterations
                rank_p = pg.rank or rank_p
                eps = pg.epsilon_used
                if _is_zero_step(d, x):
                    status, message = Status.STATIONARY, "projected-gradient step is zero"
                    break

            slope = float(g @ d)
            diag["eps"].append(eps)
            diag["watermark"].append(window.watermark)
            diag["dir_deriv"].append(slope)
            diag["d_norm"].append(float(np.linalg.norm(d)))
            diag["grad_norm"].append(float(np.linalg.norm(g)))
            diag["theta"].append(theta)
            diag["gap"].append(proj.gap)
            if not slope < 0.0:
                raise LineSearchFail(f"{kind} direction is not a descent direction ({slope:.3e})")
            ls = nonmonotone_search(problem, x, d, window, config, slope)
            n_fev += 1 + ls.backtracks
            x = ls.x
            window.push(ls.f)
            diag["m"].append(window.m)
            diag["watermark_seq"].append(window.watermark)
            normF = math.sqrt(2.0 * ls.f)
            trace.append(
                IterateTrace(k + 1, normF, ls.f, kind, ls.alpha, ls.backtracks,
                             proj_iters, rank_p, C.infeasibility(x), ms())
            )
    except LineSearchFail as exc:
        status, message = Status.LINE_SEARCH_FAIL, str(exc)
        n_fev += config.max_backtracks + 1
    except BudgetExhausted as exc:
        status, message = Status.BUDGET_EXHAUSTED, str(exc)
    except NonFinite as exc:
        status, message = Status.NON_FINITE, str(exc)
    return SolveResult(x, status, trace, n_fev, time.perf_counter() - t0, message, diag)
