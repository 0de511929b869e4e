"""L-BFGS inner solver, pretraining, and the soft/penalty/ALM baselines."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import CollocationSet
from .errors import ConfigurationError, NumericOverflowError
from .losses import ConstrainedObjective, PinnObjective, augmented_lagrangian
from .network import MLPArchitecture, init_params
from .pde import PDEProblem


@dataclass(frozen=True)
class StopCriterion:
    """Inner-loop stop: gradient inf-norm, step length, or iteration cap."""

    g_tol: float = 1e-9
    f_tol: float = 1e-9
    l_max: int = 20_000

    def __post_init__(self):
        if self.g_tol <= 0 or self.f_tol <= 0 or self.l_max <= 0:
            raise ConfigurationError(f"stop criterion values must be positive: {self}")


@dataclass(frozen=True)
class OuterLoopConfig:
    mu0: float = 1.0
    rho: float = 1.1
    mu_max: float = 1.1**100

    def __post_init__(self):
        if self.rho <= 1 or self.mu0 <= 0 or not np.isfinite(self.mu_max):
            raise ConfigurationError(f"invalid outer loop config: {self}")

    def mu(self, k: int) -> float:
        return self.mu0 * self.rho**k


@dataclass
class LBFGSResult:
    theta: np.ndarray
    value: float
    grad: np.ndarray
    n_iter: int
    n_evals: int
    status: str  # "gtol" | "ftol" | "max_iter" | "stalled"


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def lbfgs_minimize(
    fun: Callable,
    theta0,
    stop: StopCriterion = StopCriterion(),
    memory: int = 10,
    armijo: float = 1e-4,
    backtrack: float = 0.5,
) -> LBFGSResult:
    """Minimize ``fun(theta) -> (value, gradient)`` with L-BFGS and Armijo backtracking."""
    x = np.array(theta0, dtype=float)
    f, g = fun(x)
    n_evals = 1
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise ConfigurationError("objective is not finite at the starting point")
    s_hist: deque = deque(maxlen=memory)
    y_hist: deque = deque(maxlen=memory)
    eps = np.finfo(float).eps

    status = "max_iter"
    n_iter = 0
    while True:
        if np.max(np.abs(g), initial=0.0) <= stop.g_tol:
            status = "gtol"
            break
        if n_iter >= stop.l_max:
            break
        d = -_two_loop(g, s_hist, y_hist)
        slope = g @ d
        if slope >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = -(g @ g)
        alpha = 1.0 if s_hist else min(1.0, 1.0 / np.linalg.norm(g))
        d_norm = np.linalg.norm(d)
        while True:
            x_new = x + alpha * d
            try:
                f_new, g_new = fun(x_new)
            except NumericOverflowError:
                f_new, g_new = np.inf, None
            n_evals += 1
            if np.isfinite(f_new) and f_new <= f + armijo * alpha * slope:
                break
            alpha *= backtrack
            if alpha * d_norm <= eps * max(1.0, np.linalg.norm(x)):
                return LBFGSResult(x, f, g, n_iter, n_evals, "stalled")
        s = x_new - x
        y = g_new - g
        if s @ y > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
        x, f, g = x_new, f_new, g_new
        n_iter += 1
        if np.linalg.norm(s) <= stop.f_tol:
            status = "ftol"
            break
    return LBFGSResult(x, float(f), g, n_iter, n_evals, status)


def _penalty_fun(objective: ConstrainedObjective, mu: float, lam=None):
    def fun(theta):
        report = augmented_lagrangian(objective, theta, lam, mu, want_gradient=True)
        return report.value, report.gradient

    return fun


def feasibility_fun(objective: ConstrainedObjective):
    """``theta -> (||c||^2, 2 J^T c)``."""

    def fun(theta):
        c, J = objective.constraints_jac(theta)
        return float(c @ c), 2.0 * (J.T @ c)

    return fun


def pretrain(
    problem: PDEProblem,
    arch: MLPArchitecture,
    colloc: CollocationSet,
    stop: StopCriterion = StopCriterion(),
    seed: int = 0,
    theta0=None,
) -> LBFGSResult:
    """Fit the network to the constraints alone: ``argmin ||c(theta)||^2``."""
    if colloc.M == 0:
        raise ConfigurationError("pretraining needs a non-empty collocation set")
    if theta0 is None:
        theta0 = init_params(arch, seed)
    objective = PinnObjective(problem, arch, None, colloc)
    return lbfgs_minimize(feasibility_fun(objective), theta0, stop)


def pinn_train(
    objective: ConstrainedObjective, theta0, mu: float, stop: StopCriterion = StopCriterion()
) -> LBFGSResult:
    """One L-BFGS run on ``loss + mu ||c||^2`` with ``mu`` held fixed."""
    return lbfgs_minimize(_penalty_fun(objective, mu), theta0, stop)


@dataclass
class OuterResult:
    theta: np.ndarray
    mus: list = field(default_factory=list)
    lam: np.ndarray | None = None
    history: list = field(default_factory=list)


def _outer_record(objective, k, mu, theta, result, start):
    loss = objective.loss(theta)
    c_norm = float(np.linalg.norm(objective.constraints(theta)))
    return {
        "k": k,
        "mu": mu,
        "inner_iters": result.n_iter,
        "inner_status": result.status,
        "subproblem_value": result.value,
        "loss": loss,
        "c_norm": c_norm,
        "merit": loss + mu * c_norm,
        "wall_time": time.perf_counter() - start,
    }


def penalty_train(
    objective: ConstrainedObjective,
    theta0,
    outer: OuterLoopConfig = OuterLoopConfig(),
    stop: StopCriterion = StopCriterion(),
    log: Callable | None = None,
) -> OuterResult:
    """Quadratic penalty method with warm starts and ``mu_k = mu0 rho^k``."""
    return _outer_loop(objective, theta0, outer, stop, log, use_multipliers=False)


def alm_train(
    objective: ConstrainedObjective,
    theta0,
    outer: OuterLoopConfig = OuterLoopConfig(),
    stop: StopCriterion = StopCriterion(),
    log: Callable | None = None,
    lam0=None,
) -> OuterResult:
    """Augmented Lagrangian method; ``lam <- lam + mu_k c(theta_{k+1})``."""
    return _outer_loop(objective, theta0, outer, stop, log, use_multipliers=True, lam0=lam0)


def _outer_loop(objective, theta0, outer, stop, log, use_multipliers, lam0=None):
    start = time.perf_counter()
    theta = np.array(theta0, dtype=float)
    lam = None
    if use_multipliers:
        m = objective.constraints(theta).size
        lam = np.zeros(m) if lam0 is None else np.array(lam0, dtype=float)
    out = OuterResult(theta=theta, lam=lam)
    k = 0
    while True:
        mu = outer.mu(k)
        result = lbfgs_minimize(_penalty_fun(objective, mu, lam), theta, stop)
        theta = result.theta
        if use_multipliers:
            lam = lam + mu * objective.constraints(theta)
        out.mus.append(mu)
        record = _outer_record(objective, k, mu, theta, result, start)
        out.history.append(record)
        if log is not None:
            log(record)
        k += 1
        if outer.mu(k) >= outer.mu_max:
            break
    out.theta = theta
    out.lam = lam
    return out
