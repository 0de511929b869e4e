"""The reaction-diffusion reference solution and how far it can be trusted.

The solver splits each time step into half reaction steps (solved exactly
by the logistic flow) around a full diffusion step (solved exactly in
Fourier space). Without diffusion it must reproduce the closed-form
reaction solution; on a single Fourier mode without reaction it must decay
like exp(-tau t); halving the step should cut the error by about four.
"""

import numpy as np

from trsqp_pinn import PDEProblem, analytic_solution, reference_solve

# %% no diffusion: compare against the closed form
reaction = PDEProblem.reaction(30.0)
grid = reference_solve(reaction, n_x=256, n_steps=2000, n_t=100)
X, T = np.meshgrid(grid.x, grid.t, indexing="ij")
print("max error vs reaction closed form:", np.abs(grid.values - analytic_solution(reaction, X, T)).max())

# %% no reaction: a single mode decays exponentially
heat = reference_solve(PDEProblem.reaction_diffusion(0.0, 2.0), 64, 200, n_t=11, initial=np.sin)
decay = np.exp(-2.0 * heat.t)[None, :] * np.sin(heat.x)[:, None]
print("max error vs exp(-tau t) sin(x):  ", np.abs(heat.values - decay).max())

# %% self-convergence on the full problem
rd = PDEProblem.reaction_diffusion(20.0, 2.0)
runs = {n: reference_solve(rd, 256, n, n_t=11).values for n in (100, 200, 400, 800)}
steps = sorted(runs)
diffs = [np.abs(runs[a] - runs[b]).max() for a, b in zip(steps, steps[1:])]
print("successive differences:", ["%.2e" % d for d in diffs])
print("ratios (second order gives ~4):", ["%.2f" % (a / b) for a, b in zip(diffs, diffs[1:])])

# %% the solution itself: logistic growth saturating towards 1
final = runs[800][:, -1]
print("u(x, 1) ranges over [%.3f, %.3f]" % (final.min(), final.max()))
