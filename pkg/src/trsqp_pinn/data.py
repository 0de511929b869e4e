"""Labeled observations, collocation sets, and evaluation grids."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .pde import REACTION_DIFFUSION, T_MAX, X_MAX, PDEProblem, ReferenceGrid, analytic_solution


@dataclass
class LabeledSet:
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray

    def __len__(self):
        return self.x.size

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "t", "u"])
            for row in zip(self.x, self.t, self.u):
                writer.writerow([repr(float(v)) for v in row])

    @classmethod
    def from_csv(cls, path) -> "LabeledSet":
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())


@dataclass
class CollocationSet:
    """Unlabeled points: PDE interior points, BC times, and IC locations.

    Each BC time ``t`` stands for the pair ``(0, t), (2pi, t)``.
    """

    pde_points: np.ndarray  # (M_pde, 2) columns x, t
    bc_times: np.ndarray  # (M_bc,)
    ic_xs: np.ndarray  # (M_ic,)

    @property
    def sizes(self) -> tuple[int, int, int]:
        return len(self.pde_points), len(self.bc_times), len(self.ic_xs)

    @property
    def M(self) -> int:
        return sum(self.sizes)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["role", "x", "t"])
            for x, t in self.pde_points:
                writer.writerow(["pde", repr(float(x)), repr(float(t))])
            for t in self.bc_times:
                writer.writerow(["bc", "", repr(float(t))])
            for x in self.ic_xs:
                writer.writerow(["ic", repr(float(x)), "0.0"])


def sample_labeled(
    problem: PDEProblem,
    n: int,
    noise_std: float = 0.01,
    seed: int = 0,
    reference: ReferenceGrid | None = None,
) -> LabeledSet:
    """Noisy observations ``u(x, t) + eps`` with Gaussian ``eps``.

    Points are uniform on the domain, except for reaction-diffusion where
    they are drawn (without replacement) from the reference grid nodes.
    """
    if n <= 0:
        raise ConfigurationError(f"need at least one labeled point, got N={n}")
    rng = np.random.default_rng(seed)
    if problem.kind == REACTION_DIFFUSION:
        if reference is None:
            raise ConfigurationError("reaction-diffusion sampling needs a reference grid")
        size = reference.values.size
        if n > size:
            raise ConfigurationError(f"N={n} exceeds the {size} reference grid points")
        flat = rng.choice(size, size=n, replace=False)
        ix, it = np.unravel_index(flat, reference.values.shape)
        x, t, u = reference.x[ix], reference.t[it], reference.values[ix, it]
    else:
        x = rng.uniform(0.0, X_MAX, n)
        t = rng.uniform(0.0, T_MAX, n)
        u = analytic_solution(problem, x, t)
    if noise_std > 0:
        u = u + rng.normal(0.0, noise_std, n)
    return LabeledSet(np.asarray(x, float), np.asarray(t, float), np.asarray(u, float))


def even_split(m_total: int) -> tuple[int, int, int]:
    """Split ``m_total`` into PDE/BC/IC counts; the remainder goes PDE first, then BC."""
    base, rem = divmod(m_total, 3)
    return base + (rem > 0), base + (rem > 1), base


def sample_collocation(m_total: int, split="even", seed: int = 0) -> CollocationSet:
    if split == "even":
        if m_total < 3:
            raise ConfigurationError(f"an even split needs M_total >= 3, got {m_total}")
        m_pde, m_bc, m_ic = even_split(m_total)
    else:
        m_pde, m_bc, m_ic = (int(v) for v in split)
        if min(m_pde, m_bc, m_ic) < 0 or m_pde + m_bc + m_ic != m_total:
            raise ConfigurationError(f"split {tuple(split)} does not sum to M_total={m_total}")
    rng = np.random.default_rng(seed)
    pde = np.column_stack([rng.uniform(0.0, X_MAX, m_pde), rng.uniform(0.0, T_MAX, m_pde)])
    bc = rng.uniform(0.0, T_MAX, m_bc)
    ic = rng.uniform(0.0, X_MAX, m_ic)
    return CollocationSet(pde.reshape(m_pde, 2), bc, ic)


def evaluation_grid(n_x: int, n_t: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor grid as ``(X, T)`` arrays of shape ``(n_x, n_t)``.

    ``x`` is periodic (``2pi`` excluded); ``t`` includes both end points.
    """
    if n_x < 2 or n_t < 2:
        raise ConfigurationError("evaluation grid needs n_x, n_t >= 2")
    x = np.arange(n_x) * (X_MAX / n_x)
    t = np.linspace(0.0, T_MAX, n_t)
    return np.meshgrid(x, t, indexing="ij")
