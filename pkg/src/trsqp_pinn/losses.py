"""Empirical loss, soft-constrained losses, the merit function, and model reductions.

Trainers talk to a problem through the small :class:`ConstrainedObjective`
interface (loss, gradient, constraints, Jacobian), so the same code runs on
PINN problems and on hand-written toy problems.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import autodiff
from .data import CollocationSet, LabeledSet
from .errors import ConfigurationError
from .network import MLPArchitecture, forward
from .pde import PDEProblem


@dataclass
class LossReport:
    value: float
    gradient: np.ndarray | None = None


class ConstrainedObjective:
    """``min loss(theta) s.t. constraints(theta) = 0``."""

    n_params: int

    def loss(self, theta) -> float:
        raise NotImplementedError

    def loss_grad(self, theta) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def constraints(self, theta) -> np.ndarray:
        raise NotImplementedError

    def constraints_jac(self, theta) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


class FunctionObjective(ConstrainedObjective):
    """Objective assembled from plain callables (toy problems, tests)."""

    def __init__(
        self,
        n_params: int,
        loss: Callable,
        loss_grad: Callable,
        constraints: Callable | None = None,
        constraints_jac: Callable | None = None,
    ):
        self.n_params = n_params
        self._loss = loss
        self._loss_grad = loss_grad
        self._c = constraints or (lambda th: np.zeros(0))
        self._jac = constraints_jac or (lambda th: np.zeros((0, n_params)))

    def loss(self, theta):
        return float(self._loss(np.asarray(theta, float)))

    def loss_grad(self, theta):
        theta = np.asarray(theta, float)
        return float(self._loss(theta)), np.asarray(self._loss_grad(theta), float)

    def constraints(self, theta):
        return np.atleast_1d(np.asarray(self._c(np.asarray(theta, float)), float))

    def constraints_jac(self, theta):
        theta = np.asarray(theta, float)
        c = self.constraints(theta)
        J = np.asarray(self._jac(theta), float).reshape(c.size, self.n_params)
        return c, J


class PinnObjective(ConstrainedObjective):
    """Data misfit of the MLP subject to collocation residuals of a PDE."""

    def __init__(
        self,
        problem: PDEProblem,
        arch: MLPArchitecture,
        data: LabeledSet | None,
        colloc: CollocationSet,
    ):
        self.problem = problem
        self.arch = arch
        self.data = data
        self.colloc = colloc
        self.n_params = arch.n_params

    def loss(self, theta):
        if self.data is None:
            return 0.0
        return empirical_loss(self.arch, theta, self.data).value

    def loss_grad(self, theta):
        if self.data is None:
            return 0.0, np.zeros(self.n_params)
        report = empirical_loss(self.arch, theta, self.data, want_gradient=True)
        return report.value, report.gradient

    def constraints(self, theta):
        c, _ = autodiff.residual_and_jacobian(
            self.problem, self.arch, theta, self.colloc, want_jacobian=False
        )
        return c

    def constraints_jac(self, theta):
        return autodiff.residual_and_jacobian(self.problem, self.arch, theta, self.colloc)


def empirical_loss(
    arch: MLPArchitecture, theta, data: LabeledSet, want_gradient: bool = False
) -> LossReport:
    if len(data) == 0:
        raise ConfigurationError("empirical loss needs at least one labeled point")
    if not want_gradient:
        resid = data.u - forward(arch, theta, data.x, data.t)
        return LossReport(float(np.mean(resid**2)))
    tape = autodiff.Tape()
    params = tape.network_params(arch, theta)
    node = autodiff.data_loss_node(tape, params, data.x, data.t, data.u)
    return LossReport(float(node.value), autodiff.grad_scalar(node))


def soft_loss(objective: ConstrainedObjective, theta, mu: float, want_gradient=False) -> LossReport:
    """``loss + mu ||c||^2``."""
    return augmented_lagrangian(objective, theta, None, mu, want_gradient)


def augmented_lagrangian(
    objective: ConstrainedObjective, theta, lam, mu: float, want_gradient=False
) -> LossReport:
    """``loss + lam^T c + mu ||c||^2`` (``lam=None`` means zero multipliers)."""
    if not want_gradient:
        c = objective.constraints(theta)
        value = objective.loss(theta) + mu * float(c @ c)
        if lam is not None:
            value += float(np.dot(lam, c))
        return LossReport(value)
    value, grad = objective.loss_grad(theta)
    c, J = objective.constraints_jac(theta)
    weights = 2.0 * mu * c
    value += mu * float(c @ c)
    if lam is not None:
        value += float(np.dot(lam, c))
        weights = weights + lam
    return LossReport(value, grad + J.T @ weights)


def merit(objective: ConstrainedObjective, theta, mu: float) -> float:
    """``loss + mu ||c||`` with the (unsquared) Euclidean norm."""
    return objective.loss(theta) + mu * float(np.linalg.norm(objective.constraints(theta)))


def local_model(step, loss, grad, H, c, J, mu) -> float:
    """Linear-quadratic model of the merit function around the current point."""
    step = np.asarray(step, float)
    return (
        loss
        + float(grad @ step)
        + 0.5 * float(step @ (H @ step))
        + mu * float(np.linalg.norm(c + J @ step))
    )


def predicted_reduction(step, grad, H, c, J, mu) -> float:
    step = np.asarray(step, float)
    quad = float(grad @ step) + 0.5 * float(step @ (H @ step))
    return -quad + mu * (float(np.linalg.norm(c)) - float(np.linalg.norm(c + J @ step)))
