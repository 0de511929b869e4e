"""Three ways to solve a two-variable equality-constrained problem.

    min (a - 2)^2 + (b - 2)^2   subject to   a^2 + b^2 = 2

The answer is (1, 1) with multiplier 1. The penalty and augmented
Lagrangian loops only approach it as mu grows, while the trust-region SQP
iteration lands on it to machine precision in a handful of steps.
"""

import numpy as np

from trsqp_pinn import FunctionObjective, TrSQPConfig, alm_train, penalty_train, trsqp_train

toy = FunctionObjective(
    2,
    lambda th: float(np.sum((th - 2) ** 2)),
    lambda th: 2 * (th - 2),
    lambda th: np.array([th @ th - 2]),
    lambda th: 2 * th[None, :],
)
start = np.array([2.0, 0.0])

# %% penalty method: every outer iteration is a warm-started L-BFGS solve
pen = penalty_train(toy, start)
print("penalty  ", pen.theta, "final |c| = %.1e" % pen.history[-1]["c_norm"])

# %% augmented Lagrangian: same loop, plus a first-order multiplier update
alm = alm_train(toy, start)
print("ALM      ", alm.theta, "lambda =", alm.lam)

# %% trust-region SQP with each Hessian scheme
for scheme in ("sr1", "damped_bfgs", "identity"):
    res = trsqp_train(toy, start, TrSQPConfig(hessian_scheme=scheme, max_iter=100))
    print(f"trSQP {scheme:12s}", res.theta, f"{res.n_iter} iterations, {res.n_accepted} accepted")

# %% the per-iteration records show the radius and penalty logic at work
res = trsqp_train(toy, start, TrSQPConfig(max_iter=100))
for rec in res.history[:8]:
    print("k=%2d accepted=%-5s eta=%8s radius=%.3g mu=%.3g |c|=%.2e" % (
        rec["k"], rec["accepted"], "%.3f" % rec["eta"] if rec["eta"] is not None else "-",
        rec["radius"], rec["mu"], rec["c_norm"]))
