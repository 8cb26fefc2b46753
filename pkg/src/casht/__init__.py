"""Cost-aware active sequential hypothesis testing with abortable random costs."""
from .costs import (
    CostModel, Erlang, Exponential, Hyperexponential, LogLogistic, Pareto,
    ZeroMassError, kappa, kappa_mc_oracle, make_cost_model,
)
from .deadlines import DeadlinePlan, benefit_verdict, pareto_optimal_deadline, plan_deadlines
from .engine import Arm, TrialRecord, available_backends, default_backend, run_batch, run_trial, run_trials
from .observations import ObservationModel, generate_benchmark_instance, make_gaussian_model
from .policies import PolicyConfig

HAS_EXTENSION = "cython" in available_backends()

__version__ = "0.1.0"
__all__ = [
    "Arm", "CostModel", "DeadlinePlan", "Erlang", "Exponential", "HAS_EXTENSION", "Hyperexponential",
    "LogLogistic", "ObservationModel", "Pareto", "PolicyConfig", "TrialRecord", "ZeroMassError",
    "available_backends", "benefit_verdict", "default_backend", "generate_benchmark_instance", "kappa",
    "kappa_mc_oracle", "make_cost_model", "make_gaussian_model", "pareto_optimal_deadline",
    "plan_deadlines", "run_batch", "run_trial", "run_trials",
]
