"""Simulator for unconstrained bandit linear optimization.

A perturbation-based reduction turns any online linear optimization (OLO)
learner into a bandit learner: play a randomized axis perturbation of the
OLO iterate, observe one scalar loss, and feed back an unbiased one-point
loss estimate.  The package provides the reduction, comparator-adaptive OLO
learners (a dynamic base learner, a step-size-grid meta-learner, and an
optimistic composite-penalty learner), hard-instance environments, and an
experiment harness with a CLI.
"""

from .core import (
    DimensionMismatch,
    Learner,
    NonFiniteValue,
    PabloError,
    RngStream,
    as_vector,
    linearithmic_metrics,
    path_length,
    switch_count,
)
from .perturbation import (
    PerturbationConfig,
    PerturbationDraw,
    enumerate_estimates,
    estimate_loss,
    make_lambda,
    pablo_round,
    perturb,
)

__version__ = "0.1.0"
