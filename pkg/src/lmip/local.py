"""Local Levenberg-Marquardt iteration with inexact projections.

Each step solves the regularised system with ``mu_k = ||F(x_k)||^2`` and
maps the full step ``x_k + d_k`` back to the feasible set with an
eps-projection whose tolerance ``theta_k^2 ||d_k||^2`` shrinks with the step.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from lmip.errors import BudgetExhausted, InvalidConfig, NonFinite, ZeroResidual
from lmip.linalg import solve_lm_system
from lmip.sets import Projector, RankState
from lmip.trace import IterateTrace, SolveResult, Status

__all__ = [
    "ThetaSchedule",
    "LocalConfig",
    "IterateState",
    "evaluate",
    "lm_direction",
    "lmm_ip_step",
    "lmm_ip_solve",
]


@dataclass(frozen=True)
class ThetaSchedule:
    """``theta_k = theta0 * rate**k`` (``rate = 1`` is constant)."""

    theta0: float = 0.0
    rate: float = 1.0

    def __post_init__(self):
        if not (self.theta0 >= 0.0 and math.isfinite(self.theta0)):
            raise InvalidConfig("theta must be finite and nonnegative")
        if not (0.0 <= self.rate <= 1.0):
            raise InvalidConfig("theta decay rate must lie in [0, 1]")

    def __call__(self, k):
        return self.theta0 * self.rate**k if self.theta0 else 0.0

    def __str__(self):
        if self.rate == 1.0:
            return f"{self.theta0!r}"
        return f"geom:{self.theta0!r},{self.rate!r}"

    @property
    def is_zero(self):
        return self.theta0 == 0.0

    @classmethod
    def parse(cls, spec):
        """Parse ``"0.9"`` (constant) or ``"geom:0.9,0.5"`` (geometric)."""
        if isinstance(spec, ThetaSchedule):
            return spec
        if isinstance(spec, (int, float)):
            return cls(float(spec))
        text = str(spec).strip()
        try:
            if text.startswith("geom:"):
                theta0, rate = (float(t) for t in text[5:].split(","))
                return cls(theta0, rate)
            return cls(float(text))
        except ValueError as exc:
            raise InvalidConfig(f"cannot parse theta schedule {spec!r}") from exc


@dataclass
class LocalConfig:
    theta: ThetaSchedule = field(default_factory=ThetaSchedule)
    tol_F: float = 1e-6
    max_iters: int = 100
    projection: str = "exact"
    condg_budget: int = 10_000
    rank_p0: int = 1

    def __post_init__(self):
        self.theta = ThetaSchedule.parse(self.theta)
        if not self.tol_F > 0.0:
            raise InvalidConfig("tol_F must be positive")
        if self.max_iters < 0 or self.condg_budget < 1 or self.rank_p0 < 1:
            raise InvalidConfig("iteration budgets must be positive")
        if self.projection not in Projector.MODES:
            raise InvalidConfig(f"unknown projection mode {self.projection!r}")


@dataclass
class IterateState:
    k: int
    x: np.ndarray
    F_val: np.ndarray
    J_val: object = None
    mu: float = 0.0
    f: float = 0.0
    grad: np.ndarray | None = None
    d_u: np.ndarray | None = None
    eps_k: float = 0.0


def _finite(name, a):
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} contains non-finite entries")


def evaluate(problem, x, k=0, jacobian=True):
    """Residual (and Jacobian) at ``x`` packaged as an :class:`IterateState`."""
    F = np.asarray(problem.residual(x), dtype=float)
    _finite("F(x)", F)
    state = IterateState(k=k, x=x, F_val=F)
    state.mu = float(F @ F)
    state.f = 0.5 * state.mu
    if jacobian:
        J = problem.jacobian(x)
        _finite("J(x)", J.data if hasattr(J, "tocsr") else np.asarray(J))
        state.J_val = J
        state.grad = np.asarray(J.T @ F, dtype=float).ravel()
    return state


def lm_direction(state):
    """Unconstrained LM step; stores it in ``state.d_u``."""
    if state.mu == 0.0:
        raise ZeroResidual("residual is zero; the point already solves the system")
    state.d_u = solve_lm_system(state.J_val, state.F_val, state.mu)
    return state.d_u


def make_projector(problem, config):
    return Projector(
        problem.feasible_set,
        mode=config.projection,
        condg_budget=config.condg_budget,
        rank_state=RankState(config.rank_p0),
    )


def lmm_ip_step(problem, state, config, projector=None):
    """eps-project ``x_k + d_u`` with ``eps_k = theta_k^2 ||d_u||^2``.

    Returns the :class:`~lmip.sets.EpsProjection`; the new point is its
    ``point`` attribute.  ``state.eps_k`` is updated.
    """
    projector = projector or make_projector(problem, config)
    theta = config.theta(state.k)
    d = state.d_u
    state.eps_k = theta * theta * float(d @ d)
    return projector.project(state.x + d, state.eps_k)


def _start_point(problem, x0):
    x = np.asarray(x0, dtype=float).ravel().copy()
    _finite("x0", x)
    C = problem.feasible_set
    if x.size != C.dim:
        raise ValueError(f"x0 has length {x.size}, expected {C.dim}")
    if C.contains(x):
        return x, False
    warnings.warn("starting point is infeasible; projecting it onto the set", stacklevel=3)
    return C.project(x), True


def lmm_ip_solve(problem, x0, config=None):
    """Run the local method from ``x0``.

    Stops when ``||F|| <= tol_F`` or after ``max_iters`` steps.  An
    infeasible start is projected once and flagged as ``kind="init-proj"``.
    """
    config = config or LocalConfig()
    t0 = time.perf_counter()
    C = problem.feasible_set
    projector = make_projector(problem, config)
    x, projected = _start_point(problem, x0)

    def ms():
        return 1000.0 * (time.perf_counter() - t0)

    diag = {"eps": [], "theta": [], "gap": [], "d_u_norm": []}
    try:
        state = evaluate(problem, x, 0, jacobian=False)
    except NonFinite as exc:
        return SolveResult(x, Status.NON_FINITE, [], 1, 0.0, str(exc), diag)
    n_fev = 1
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
            if k == config.max_iters:
                break
            state = evaluate(problem, x, k)
            d_u = lm_direction(state)
            proj = lmm_ip_step(problem, state, config, projector)
            diag["eps"].append(state.eps_k)
            diag["theta"].append(config.theta(k))
            diag["gap"].append(proj.gap)
            diag["d_u_norm"].append(float(np.linalg.norm(d_u)))
            x = proj.point
            state = evaluate(problem, x, k + 1, jacobian=False)
            n_fev += 1
            normF = math.sqrt(state.mu)
            trace.append(
                IterateTrace(k + 1, normF, state.f, "lm", 1.0, 0, proj.inner_iterations,
                             proj.rank, C.infeasibility(x), ms())
            )
    except BudgetExhausted as exc:
        status, message = Status.BUDGET_EXHAUSTED, str(exc)
    except NonFinite as exc:
        status, message = Status.NON_FINITE, str(exc)
    return SolveResult(x, status, trace, n_fev, time.perf_counter() - t0, message, diag)
