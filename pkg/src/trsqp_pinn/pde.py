"""Transport, reaction, and reaction-diffusion problems on [0, 2pi] x [0, 1].

All three use the periodic boundary condition ``u(0, t) = u(2pi, t)``.
Reaction-diffusion has no closed form; :func:`reference_solve` produces a
pseudo-spectral reference on a periodic grid.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError

TRANSPORT = "transport"
REACTION = "reaction"
REACTION_DIFFUSION = "reaction_diffusion"
KINDS = (TRANSPORT, REACTION, REACTION_DIFFUSION)

X_MAX = 2.0 * math.pi
T_MAX = 1.0


@dataclass(frozen=True)
class PDEProblem:
    kind: str
    beta: float = 0.0
    alpha: float = 0.0
    tau: float = 0.0
    zeta: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown problem kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == REACTION_DIFFUSION and not self.tau > 0:
            raise ConfigurationError("reaction-diffusion needs tau > 0")

    @classmethod
    def transport(cls, beta):
        return cls(TRANSPORT, beta=float(beta))

    @classmethod
    def reaction(cls, alpha, zeta=2.0):
        return cls(REACTION, alpha=float(alpha), zeta=float(zeta))

    @classmethod
    def reaction_diffusion(cls, alpha, tau, zeta=2.0):
        return cls(REACTION_DIFFUSION, alpha=float(alpha), tau=float(tau), zeta=float(zeta))

    @property
    def coefficients(self) -> dict:
        if self.kind == TRANSPORT:
            return {"beta": self.beta}
        if self.kind == REACTION:
            return {"alpha": self.alpha, "zeta": self.zeta}
        return {"alpha": self.alpha, "tau": self.tau, "zeta": self.zeta}

    def initial_condition(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == TRANSPORT:
            return np.sin(x)
        return np.exp(-self.zeta * (x - math.pi) ** 2)


def pde_residual(problem: PDEProblem, jet, u=None):
    """Interior residual ``F(u)`` from a jet ``(u, u_x, u_t, u_xx)``.

    Works on floats, numpy arrays, and autodiff nodes alike. ``u`` overrides
    the value used inside the logistic nonlinearity (defaults to ``jet.u``).
    """
    if u is None:
        u = jet.u
    if problem.kind == TRANSPORT:
        return jet.du_dt + problem.beta * jet.du_dx
    growth = problem.alpha * (u - u * u)
    if problem.kind == REACTION:
        return jet.du_dt - growth
    return jet.du_dt - problem.tau * jet.d2u_dx2 - growth


def logistic_flow(u0, rate_times_t):
    """Exact solution of ``u' = a u (1 - u)`` after time ``t`` (``rate_times_t = a t``)."""
    growth = np.exp(rate_times_t)
    return u0 * growth / (u0 * growth + 1.0 - u0)


def analytic_solution(problem: PDEProblem, x, t):
    if problem.kind == TRANSPORT:
        return np.sin(np.asarray(x, dtype=float) - problem.beta * np.asarray(t, dtype=float))
    if problem.kind == REACTION:
        u0 = problem.initial_condition(x)
        return logistic_flow(u0, problem.alpha * np.asarray(t, dtype=float))
    raise ConfigurationError(
        "reaction-diffusion has no closed-form solution; use reference_solve"
    )


@dataclass
class ReferenceGrid:
    """Solution values on ``x_j = 2 pi j / n_x`` (periodic) by ``t_k = k / (n_t - 1)``."""

    values: np.ndarray  # (n_x, n_t)
    coefficients: dict

    @property
    def n_x(self) -> int:
        return self.values.shape[0]

    @property
    def n_t(self) -> int:
        return self.values.shape[1]

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * (X_MAX / self.n_x)

    @property
    def t(self) -> np.ndarray:
        return np.linspace(0.0, T_MAX, self.n_t)

    def to_csv(self, path) -> None:
        write_grid_csv(path, self.values, self.coefficients)

    @classmethod
    def from_csv(cls, path) -> "ReferenceGrid":
        values, coefficients = read_grid_csv(path)
        return cls(values=values, coefficients=coefficients)


def write_grid_csv(path, values, coefficients: dict) -> None:
    """Header row ``n_x, n_t, key=value...`` then one row-major value per line.

    Values are written with ``repr`` so a re-import is bit-exact.
    """
    values = np.asarray(values, dtype=float)
    n_x, n_t = values.shape
    header = [f"n_x={n_x}", f"n_t={n_t}"] + [
        f"{k}={v}" if isinstance(v, str) else f"{k}={float(v)!r}" for k, v in coefficients.items()
    ]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in values:
            writer.writerow([repr(float(v)) for v in row])


def read_grid_csv(path) -> tuple[np.ndarray, dict]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    meta = dict(item.split("=", 1) for item in header)
    n_x, n_t = int(meta.pop("n_x")), int(meta.pop("n_t"))
    coefficients = {}
    for key, raw in meta.items():
        try:
            coefficients[key] = float(raw)
        except ValueError:
            coefficients[key] = raw
    values = np.array(rows, dtype=float).reshape(n_x, n_t)
    return values, coefficients


def reference_solve(
    problem: PDEProblem,
    n_x: int = 256,
    n_steps: int = 2000,
    n_t: int = 100,
    initial=None,
) -> ReferenceGrid:
    """Strang-split Fourier solver for ``u_t = tau u_xx + alpha u (1 - u)``.

    Each step of size ``dt`` applies an exact logistic half step, an exact
    diffusion step in Fourier space, then another logistic half step. The
    step count is rounded up to a multiple of ``n_t - 1`` so every stored
    time slice falls on a step boundary.

    Args:
        problem: reaction-diffusion problem (the reaction kind is accepted
            too and treated as ``tau = 0``).
        n_x: number of periodic grid points, a power of two.
        n_steps: minimum total number of time steps over [0, 1].
        n_t: number of stored time slices including t = 0 and t = 1.
        initial: optional callable overriding the initial data ``u(x, 0)``.
    """
    if n_x < 2 or n_x & (n_x - 1):
        raise ConfigurationError(f"n_x must be a power of two, got {n_x}")
    if n_t < 2 or n_steps < 1:
        raise ConfigurationError("need n_t >= 2 and n_steps >= 1")
    if problem.kind == TRANSPORT:
        raise ConfigurationError("reference_solve handles reaction(-diffusion) problems only")

    x = np.arange(n_x) * (X_MAX / n_x)
    u = np.asarray(initial(x) if initial is not None else problem.initial_condition(x), dtype=float)
    sub_steps = -(-n_steps // (n_t - 1))
    dt = T_MAX / ((n_t - 1) * sub_steps)
    k = np.fft.rfftfreq(n_x, d=1.0 / n_x)
    heat = np.exp(-problem.tau * k**2 * dt)
    half = 0.5 * problem.alpha * dt

    values = np.empty((n_x, n_t))
    values[:, 0] = u
    for j in range(1, n_t):
        for _ in range(sub_steps):
            u = logistic_flow(u, half)
            u = np.fft.irfft(np.fft.rfft(u) * heat, n=n_x)
            u = logistic_flow(u, half)
        values[:, j] = u
    if not np.all(np.isfinite(values)):
        raise ConfigurationError("reference solution blew up; reduce the time step")
    coefficients = {"kind": problem.kind, **problem.coefficients}
    return ReferenceGrid(values=values, coefficients=coefficients)
