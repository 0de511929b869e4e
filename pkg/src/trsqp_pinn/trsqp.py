"""Trust-region SQP for ``min loss(theta) s.t. c(theta) = 0``.

Each iteration splits the step into a normal part (dogleg on the linearized
infeasibility within ``nu * radius``) and a tangential part (projected
Steihaug CG on the quadratic loss model, keeping the normal step's
linearized feasibility). Steps are judged by the non-smooth merit
``loss + mu ||c||`` through the ratio of actual to predicted reduction.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg, optimize

from .errors import ConfigurationError, InternalInvariantError, TrainingDivergedError
from .losses import ConstrainedObjective, predicted_reduction

DAMPED_BFGS = "damped_bfgs"
SR1 = "sr1"
IDENTITY = "identity"
HESSIAN_SCHEMES = (DAMPED_BFGS, SR1, IDENTITY)
SUBPROBLEM_SOLVERS = ("auto", "iterative", "exact")


@dataclass(frozen=True)
class TrSQPConfig:
    radius0: float = 1.0
    mu_init: float = 1.0
    damping: float = 0.2
    nu: float = 0.8
    eta_low: float = 1e-8
    eta_upp: float = 0.3
    radius_factor: float = 2.0
    max_iter: int = 20_000
    g_tol: float = 1e-9
    f_tol: float = 1e-9
    hessian_scheme: str = SR1
    sr1_skip_tol: float = 1e-8
    cg_rtol: float = 1e-10
    subproblem_solver: str = "auto"
    exact_max_dim: int = 64
    second_order_correction: bool = False
    check_invariants: bool = False
    checkpoint_every: int = 0

    def __post_init__(self):
        if not 0 < self.eta_low < self.eta_upp < 1:
            raise ConfigurationError("need 0 < eta_low < eta_upp < 1")
        if not 0 < self.nu < 1 or not 0 < self.damping < 1:
            raise ConfigurationError("nu and damping must lie in (0, 1)")
        if self.radius_factor <= 1 or self.radius0 <= 0 or self.mu_init <= 0:
            raise ConfigurationError("radius_factor must exceed 1; radius0, mu_init positive")
        if self.hessian_scheme not in HESSIAN_SCHEMES:
            raise ConfigurationError(f"hessian_scheme must be one of {HESSIAN_SCHEMES}")
        if self.subproblem_solver not in SUBPROBLEM_SOLVERS:
            raise ConfigurationError(f"subproblem_solver must be one of {SUBPROBLEM_SOLVERS}")

    def uses_exact_subproblems(self, n_params: int) -> bool:
        if self.subproblem_solver == "auto":
            return n_params <= self.exact_max_dim
        return self.subproblem_solver == "exact"


@dataclass
class TrustRegionState:
    theta: np.ndarray
    lam: np.ndarray
    H: np.ndarray
    radius: float
    mu: float
    k: int = 0

    def as_dict(self) -> dict:
        return {
            "k": self.k,
            "radius": self.radius,
            "mu": self.mu,
            "theta": self.theta.tolist(),
            "lam": self.lam.tolist(),
        }


@dataclass
class TrSQPResult:
    theta: np.ndarray
    state: TrustRegionState
    n_iter: int
    n_accepted: int
    status: str  # "converged" | "max_iter"
    history: list = field(default_factory=list)


# ---------------------------------------------------------------- quasi-Newton


def damped_bfgs_update(H, s, y, delta: float = 0.2):
    """Powell-damped BFGS; ``r = gamma y + (1 - gamma) H s`` keeps ``s^T r >= delta s^T H s``.

    Each damped update scales ``det(H)`` by ``s^T r / s^T H s``, which can be
    as small as ``delta``, so a long run of negative-curvature pairs drives
    the smallest eigenvalue below round-off. An update whose result no longer
    admits a Cholesky factorization is skipped.
    """
    Hs = H @ s
    sHs = float(s @ Hs)
    if not sHs > 0:
        raise InternalInvariantError(f"s^T H s = {sHs:.3e}; H is not positive definite")
    sy = float(s @ y)
    gamma = 1.0 if sy >= delta * sHs else (1.0 - delta) * sHs / (sHs - sy)
    r = gamma * y + (1.0 - gamma) * Hs
    H_new = H - np.outer(Hs, Hs) / sHs + np.outer(r, r) / float(s @ r)
    H_new = 0.5 * (H_new + H_new.T)
    try:
        linalg.cholesky(H_new, check_finite=False)
    except linalg.LinAlgError:
        return H
    return H_new


def sr1_update(H, s, y, skip_tol: float = 1e-8):
    w = y - H @ s
    ws = float(w @ s)
    if abs(ws) < skip_tol * np.linalg.norm(w) * np.linalg.norm(s) or ws == 0.0:
        return H
    H_new = H + np.outer(w, w) / ws
    return 0.5 * (H_new + H_new.T)


# ---------------------------------------------------------------- linear algebra


class NormalEquations:
    """Solves ``(J J^T + eps I) z = b`` with ``eps = 1e-10 trace(J J^T) / M``."""

    def __init__(self, J):
        self.J = np.asarray(J, float)
        m = self.J.shape[0]
        self.m = m
        if m == 0:
            return
        A = self.J @ self.J.T
        eps = 1e-10 * np.trace(A) / m
        if eps <= 0:
            eps = 1.0  # J == 0; every right-hand side J v is zero anyway
        self.eps = eps
        self._factor = linalg.cho_factor(A + eps * np.eye(m))

    def solve(self, b):
        if self.m == 0:
            return np.zeros(0)
        return linalg.cho_solve(self._factor, b)

    def project(self, v):
        """Component of ``v`` in the null space of ``J`` (one refinement pass)."""
        if self.m == 0:
            return v
        v = v - self.J.T @ self.solve(self.J @ v)
        return v - self.J.T @ self.solve(self.J @ v)


def least_squares_multipliers(grad, J, normal_eq: NormalEquations | None = None):
    """``argmin_lam ||grad + J^T lam||`` via regularized normal equations."""
    J = np.asarray(J, float)
    if J.shape[0] == 0:
        return np.zeros(0)
    normal_eq = normal_eq or NormalEquations(J)
    return normal_eq.solve(-(J @ grad))


def _boundary_tau(p, d, radius):
    """Largest ``tau >= 0`` with ``||p + tau d|| = radius`` (given ``||p|| <= radius``)."""
    a = float(d @ d)
    b = 2.0 * float(p @ d)
    c = float(p @ p) - radius * radius
    return (-b + math.sqrt(max(b * b - 4.0 * a * c, 0.0))) / (2.0 * a)


def cauchy_point(c, J, radius):
    """Minimizer of ``||c + J p||^2`` along steepest descent within ``radius``."""
    g = J.T @ c
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        return np.zeros(J.shape[1])
    Jg = J @ g
    alpha = g_norm**2 / float(Jg @ Jg)
    return -min(alpha, radius / g_norm) * g


def normal_step(c, J, radius, normal_eq: NormalEquations | None = None):
    """Dogleg step for ``min ||c + J p||^2`` s.t. ``||p|| <= radius``."""
    c = np.asarray(c, float)
    J = np.asarray(J, float)
    p_dim = J.shape[1]
    if c.size == 0 or not np.any(c):
        return np.zeros(p_dim)
    g = J.T @ c
    g_norm = float(np.linalg.norm(g))
    if g_norm == 0.0:
        return np.zeros(p_dim)
    Jg = J @ g
    alpha = g_norm**2 / float(Jg @ Jg)
    if alpha * g_norm >= radius:
        return -(radius / g_norm) * g
    p_c = -alpha * g
    normal_eq = normal_eq or NormalEquations(J)
    p_gn = -(J.T @ normal_eq.solve(c))
    if np.linalg.norm(p_gn) <= radius:
        step = p_gn
    else:
        d = p_gn - p_c
        step = p_c + _boundary_tau(p_c, d, radius) * d
    if np.linalg.norm(c + J @ step) > np.linalg.norm(c + J @ p_c):
        step = p_c
    return step


def tangential_step(
    grad,
    H,
    J,
    normal,
    radius,
    rtol: float = 1e-10,
    max_iter: int | None = None,
    normal_eq: NormalEquations | None = None,
):
    """Projected Steihaug CG for ``grad^T p + p^T H p / 2`` from ``normal`` in ``null(J)``."""
    grad = np.asarray(grad, float)
    J = np.asarray(J, float)
    normal_eq = normal_eq or NormalEquations(J)
    p = np.array(normal, dtype=float)
    r = grad + H @ p
    rp = normal_eq.project(r)
    rr = float(rp @ rp)
    # a projected residual at round-off level carries no null-space direction;
    # following it into negative curvature would leave the linearized constraints
    floor = (1e-10 * float(np.linalg.norm(r))) ** 2
    if rr <= floor:
        return p
    stop = max((rtol**2) * rr, floor)
    d = -rp
    for _ in range(max_iter or p.size):
        Hd = H @ d
        dHd = float(d @ Hd)
        if dHd <= 0:
            return p + _boundary_tau(p, d, radius) * d
        alpha = rr / dHd
        p_next = p + alpha * d
        if np.linalg.norm(p_next) >= radius:
            return p + _boundary_tau(p, d, radius) * d
        p = p_next
        r = r + alpha * Hd
        rp = normal_eq.project(r)
        rr_next = float(rp @ rp)
        if rr_next <= stop:
            break
        d = -rp + (rr_next / rr) * d
        rr = rr_next
    return p


def _rank_split(J):
    """Orthonormal bases of range(J^T) and null(J) plus the nonzero singular values."""
    p_dim = J.shape[1]
    if J.shape[0] == 0:
        return np.zeros((p_dim, 0)), np.eye(p_dim), np.zeros(0), np.zeros((0, 0))
    U, sv, Vt = linalg.svd(J, full_matrices=True)
    tol = max(J.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > tol))
    return Vt[:rank].T, Vt[rank:].T, sv[:rank], U[:, :rank]


def _ball_quadratic_min(g, A, radius):
    """Global minimizer of ``g^T w + w^T A w / 2`` over ``||w|| <= radius`` (dense).

    Eigen-decomposes ``A`` and solves the secular equation for the shift;
    the hard case fills up to the boundary along the lowest eigenvector.
    """
    n = g.size
    if n == 0:
        return np.zeros(0)
    if radius <= 0:
        return np.zeros(n)
    lam, Q = linalg.eigh(0.5 * (A + A.T))
    beta = Q.T @ g
    scale = max(1.0, float(np.max(np.abs(lam))))
    if lam[0] > 1e-14 * scale:
        w = -beta / lam
        if np.linalg.norm(w) <= radius:
            return Q @ w

    def norm_at(sigma):
        return float(np.linalg.norm(beta / (lam + sigma)))

    lo = max(0.0, -lam[0])
    gap = 1e-14 * scale
    if norm_at(lo + gap) <= radius:
        # hard case: the shift sits at -lam_min and the lowest mode takes the slack
        w = np.zeros(n)
        free = lam + lo > gap
        w[free] = -beta[free] / (lam[free] + lo)
        rest = radius**2 - float(w @ w)
        w[np.argmin(lam)] += math.sqrt(max(rest, 0.0))
        return Q @ w
    hi = lo + float(np.linalg.norm(beta)) / radius + scale
    while norm_at(hi) > radius:
        hi *= 2.0
    sigma = optimize.brentq(lambda s: 1.0 / radius - 1.0 / norm_at(s), lo + gap, hi,
                            xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return Q @ (-beta / (lam + sigma))


def exact_normal_step(c, J, radius):
    """Global minimizer of ``||c + J p||`` over ``||p|| <= radius`` inside range(J^T)."""
    c = np.asarray(c, float)
    J = np.asarray(J, float)
    if c.size == 0 or not np.any(c):
        return np.zeros(J.shape[1])
    V, _, sv, U = _rank_split(J)
    if sv.size == 0:
        return np.zeros(J.shape[1])
    # ||c + J V w||^2 = ||U^T c + diag(sv) w||^2 + const
    return V @ _ball_quadratic_min(sv * (U.T @ c), np.diag(sv**2), radius)


def exact_tangential_step(grad, H, J, normal, radius):
    """Global minimizer of ``grad^T p + p^T H p / 2`` s.t. ``J p = J normal``, ``||p|| <= radius``."""
    grad = np.asarray(grad, float)
    J = np.asarray(J, float)
    _, Z, _, _ = _rank_split(J)
    p_range = normal - Z @ (Z.T @ normal)
    slack = radius**2 - float(p_range @ p_range)
    if Z.shape[1] == 0 or slack <= 0:
        return np.array(normal, dtype=float)
    A = Z.T @ H @ Z
    g = Z.T @ (grad + H @ p_range)
    return p_range + Z @ _ball_quadratic_min(g, A, math.sqrt(slack))


def composite_step(grad, H, c, J, radius, config: "TrSQPConfig", normal_eq=None):
    """Normal then tangential step, dense-exact or iterative per ``config``."""
    if config.uses_exact_subproblems(np.asarray(grad).size):
        normal = exact_normal_step(c, J, config.nu * radius)
        return normal, exact_tangential_step(grad, H, J, normal, radius)
    normal_eq = normal_eq or NormalEquations(J)
    normal = normal_step(c, J, config.nu * radius, normal_eq)
    step = tangential_step(grad, H, J, normal, radius, config.cg_rtol, normal_eq=normal_eq)
    return normal, step


def adaptive_penalty(mu_prev, grad, H, step, c, J):
    decrease = float(np.linalg.norm(c)) - float(np.linalg.norm(c + J @ step))
    if decrease <= 1e-12 * max(1.0, float(np.linalg.norm(c))):
        return mu_prev
    quad = float(grad @ step) + 0.5 * float(step @ (H @ step))
    return max(mu_prev, quad / (0.7 * decrease))


# ---------------------------------------------------------------- main loop


def trsqp_train(
    objective: ConstrainedObjective,
    theta_init,
    config: TrSQPConfig = TrSQPConfig(),
    log: Callable | None = None,
    checkpoint: Callable | None = None,
) -> TrSQPResult:
    """Run the trust-region SQP iteration from ``theta_init``.

    Stops when a rejected step is shorter than ``f_tol`` or the Lagrangian
    gradient inf-norm is below ``g_tol``, or after ``max_iter`` iterations.
    """
    start = time.perf_counter()
    cfg = config
    theta = np.array(theta_init, dtype=float)
    n = theta.size
    loss, grad = objective.loss_grad(theta)
    c, J = objective.constraints_jac(theta)
    if not (np.isfinite(loss) and np.all(np.isfinite(c))):
        raise TrainingDivergedError("non-finite loss or constraints at the initial point")
    normal_eq = NormalEquations(J)
    state = TrustRegionState(
        theta=theta,
        lam=least_squares_multipliers(grad, J, normal_eq),
        H=np.eye(n),
        radius=cfg.radius0,
        mu=cfg.mu_init,
    )
    pending = None
    n_accepted = 0
    history = []
    status = "max_iter"
    k = 0
    for k in range(cfg.max_iter):
        state.k = k
        if pending is not None:
            s, y = pending
            if cfg.hessian_scheme == DAMPED_BFGS:
                state.H = damped_bfgs_update(state.H, s, y, cfg.damping)
            elif cfg.hessian_scheme == SR1:
                state.H = sr1_update(state.H, s, y, cfg.sr1_skip_tol)
            pending = None
        H = state.H

        normal, step = composite_step(grad, H, c, J, state.radius, cfg, normal_eq)
        _check_step(normal, step, c, J, state.radius, cfg)
        if cfg.check_invariants:
            _check_hessian(H, cfg.hessian_scheme)

        mu_prev = state.mu
        state.mu = adaptive_penalty(mu_prev, grad, H, step, c, J)
        pred = predicted_reduction(step, grad, H, c, J, state.mu)
        c_norm = float(np.linalg.norm(c))
        merit_now = loss + state.mu * c_norm

        trial = state.theta + step
        loss_trial = objective.loss(trial)
        c_trial = objective.constraints(trial)
        if not (np.isfinite(loss_trial) and np.all(np.isfinite(c_trial))):
            raise TrainingDivergedError(f"non-finite loss or constraints at iteration {k}", state)
        merit_trial = loss_trial + state.mu * float(np.linalg.norm(c_trial))
        ared = merit_now - merit_trial
        eta = ared / pred if pred > 0 else -math.inf
        corrected = False
        if (cfg.second_order_correction and pred > 0 and eta < cfg.eta_low
                and np.linalg.norm(c_trial) > 0.1 * c_norm):
            # project the trial point back toward the linearized feasible set;
            # Pred is kept, so the correction only rescues steps the merit rejects
            soc_step = step - J.T @ normal_eq.solve(c_trial)
            soc_theta = state.theta + soc_step
            soc_loss = objective.loss(soc_theta)
            soc_c = objective.constraints(soc_theta)
            if np.isfinite(soc_loss) and np.all(np.isfinite(soc_c)):
                soc_ared = merit_now - (soc_loss + state.mu * float(np.linalg.norm(soc_c)))
                if soc_ared / pred >= cfg.eta_low:
                    corrected = True
                    step, trial, ared, eta = soc_step, soc_theta, soc_ared, soc_ared / pred
        accepted = eta >= cfg.eta_low

        if accepted:
            n_accepted += 1
            grad_old, J_old = grad, J
            state.theta = trial
            loss, grad = objective.loss_grad(trial)
            c, J = objective.constraints_jac(trial)
            normal_eq = NormalEquations(J)
            state.lam = least_squares_multipliers(grad, J, normal_eq)
            if cfg.hessian_scheme != IDENTITY:
                lam = state.lam
                pending = (step, (grad + J.T @ lam) - (grad_old + J_old.T @ lam))
            if eta >= cfg.eta_upp:
                state.radius *= cfg.radius_factor
        else:
            state.radius /= cfg.radius_factor

        step_norm = float(np.linalg.norm(step))
        record = {
            "k": k,
            "accepted": bool(accepted),
            "eta": eta if math.isfinite(eta) else None,
            "radius": state.radius,
            "mu": state.mu,
            "loss": loss,
            "c_norm": float(np.linalg.norm(c)),
            "merit": loss + state.mu * float(np.linalg.norm(c)),
            "merit_before": merit_now,
            "pred": pred,
            "ared": ared,
            "step_norm": step_norm,
            "corrected": corrected,
            "hessian_scheme": cfg.hessian_scheme,
            "wall_time": time.perf_counter() - start,
        }
        history.append(record)
        if log is not None:
            log(record)
        if checkpoint is not None and cfg.checkpoint_every and (k + 1) % cfg.checkpoint_every == 0:
            checkpoint(state)

        if not accepted:
            lag_grad = grad + J.T @ state.lam
            if step_norm <= cfg.f_tol or np.max(np.abs(lag_grad), initial=0.0) <= cfg.g_tol:
                status = "converged"
                break
    return TrSQPResult(
        theta=state.theta,
        state=state,
        n_iter=len(history),
        n_accepted=n_accepted,
        status=status,
        history=history,
    )


def _check_step(normal, step, c, J, radius, cfg):
    slack = 1.0 + 1e-10
    if np.linalg.norm(normal) > cfg.nu * radius * slack:
        raise InternalInvariantError("normal step leaves the shrunken trust region")
    if np.linalg.norm(step) > radius * slack:
        raise InternalInvariantError("step leaves the trust region")
    if c.size:
        p_c = cauchy_point(c, J, cfg.nu * radius)
        achieved = np.linalg.norm(c + J @ normal)
        cauchy = np.linalg.norm(c + J @ p_c)
        if achieved > cauchy + 1e-10 * max(1.0, float(np.linalg.norm(c))):
            raise InternalInvariantError("normal step misses the Cauchy decrease")


def _check_hessian(H, scheme):
    if np.max(np.abs(H - H.T)) > 1e-12:
        raise InternalInvariantError("Hessian approximation lost symmetry")
    if scheme == DAMPED_BFGS:
        try:
            np.linalg.cholesky(H)
        except np.linalg.LinAlgError as exc:
            raise InternalInvariantError("damped BFGS matrix is not positive definite") from exc
