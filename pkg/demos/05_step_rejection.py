"""Why the literal trust-region iteration stalls, and what a correction buys.

The merit function l + mu ||c|| is compared against its linear-quadratic
model. The loss part of the model is accurate, but ||c|| grows
quadratically along the step while the model treats the constraints as
linear. Near a feasible point that curvature outweighs the predicted gain
and most steps get rejected, so the radius collapses (the Maratos effect).

A second-order correction pulls the trial point back onto the linearized
constraints with one extra residual evaluation. It is off by default.
"""

import numpy as np

from trsqp_pinn import RunConfig
from trsqp_pinn.harness import initial_parameters, truth_on_grid, evaluate
from trsqp_pinn.data import sample_collocation, sample_labeled
from trsqp_pinn.losses import PinnObjective
from trsqp_pinn.trsqp import TrSQPConfig, trsqp_train

cfg = RunConfig.desk_scale(problem="reaction", alpha=30.0, noise_std=0.0)
problem, arch = cfg.pde, cfg.arch
X, T, u_true, _ = truth_on_grid(cfg)
objective = PinnObjective(
    problem, arch,
    sample_labeled(problem, cfg.n_labeled, 0.0, seed=cfg.seed + 1),
    sample_collocation(cfg.train_points, seed=cfg.seed + 3),
)
theta0, _ = initial_parameters(cfg)

# %% the same start, with and without the correction
for soc in (False, True):
    res = trsqp_train(objective, theta0, TrSQPConfig(max_iter=500, second_order_correction=soc))
    accepted = np.mean([r["accepted"] for r in res.history])
    radii = [r["radius"] for r in res.history]
    report = evaluate(arch, res.theta, X, T, u_true)
    print(f"correction={soc!s:5s} accepted {accepted:.0%}, final radius {radii[-1]:.1e}, "
          f"loss {res.history[-1]['loss']:.2e}, rel_l2 {report.rel_l2:.4f}")

# %% how much ||c|| overshoots its linear model along one rejected step
res = trsqp_train(objective, theta0, TrSQPConfig(max_iter=60))
rejected = [r for r in res.history if not r["accepted"]]
if rejected:
    r = rejected[-1]
    print(f"last rejection: pred {r['pred']:.2e}, ared {r['ared']:.2e}, step {r['step_norm']:.2e}")
