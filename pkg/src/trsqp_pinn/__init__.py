"""Hard-constrained PINN training with a trust-region SQP solver.

The network is a small tanh MLP evaluated in numpy; PDE, boundary and initial
residuals at collocation points form the equality constraints ``c(theta) = 0``
while the labeled observations define the loss.
"""

from .errors import (
    ConfigurationError,
    InternalInvariantError,
    NumericOverflowError,
    ParameterShapeError,
    TrainingDivergedError,
)
from .network import MLPArchitecture, forward, init_params, load_params, save_params
from .pde import PDEProblem, analytic_solution, reference_solve
from .data import evaluation_grid, sample_collocation, sample_labeled
from .losses import FunctionObjective, PinnObjective
from .optimizers import (
    OuterLoopConfig,
    StopCriterion,
    alm_train,
    lbfgs_minimize,
    penalty_train,
    pinn_train,
    pretrain,
)
from .trsqp import TrSQPConfig, trsqp_train
from .harness import RunConfig, run_experiment

__version__ = "0.1.0"
