"""Optimal steering of Gaussian-mixture state densities for discrete-time linear systems."""

from .errors import ConditioningError, InconsistentPolicyError, NotControllableError, SteeringError
from .gmm import EmFit, Gaussian, Gmm, em_fit, gaussian_pdf, gmm_pdf, log_likelihood, sample
from .policy import GmmPolicy, Synthesis, gamma, predict_terminal, push_forward, sample_control, synthesize
from .sim import McReport, Trajectory, evaluate_cost, monte_carlo, rollout
from .gaussian_steering import (
    CovSteeringSolution,
    MeanSteeringSolution,
    PairCost,
    SteeringFactors,
    SteeringLaw,
    cov_cost,
    feedback_for_rotation,
    mean_cost,
    pair_cost,
    solve_cov,
    solve_mean,
)
from .system import (
    LiftedMatrices,
    LtvSystem,
    QuadraticCost,
    assert_controllable,
    grammian,
    is_controllable,
    lift,
    null_basis,
    require_controllable,
    state_transition,
)
from .transport import TransportPlan, mixing_weights, solve_transport

__version__ = "0.1.0"
