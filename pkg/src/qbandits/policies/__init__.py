"""Learner policies behind the ``start(actions, horizon, rng)`` contract."""

from .base import Policy, TabulatedPolicy
from .baseline import FixedArmPolicy, TwoPhasePolicy, UniformPolicy
from .design import DesignResult, g_optimal_design
from .elimination import PhasedElimination, PhasedElimState, phase_budget
from .linucb import (LinUCB, LinUcbState, confidence_radius, linucb_select_continuous,
                     linucb_select_discrete, ridge_update)
from .pls import BanditPLS, PlsState
from .tomography import (InfeasibleProjectionError, pls_linear_estimator, project_to_density,
                         project_to_pure, project_to_simplex)
from .ucb import UCB, UcbState, ucb_index

POLICIES = {
    "uniform": UniformPolicy,
    "fixed": FixedArmPolicy,
    "two_phase": TwoPhasePolicy,
    "ucb": UCB,
    "linucb": LinUCB,
    "phased_elim": PhasedElimination,
    "bandit_pls": BanditPLS,
}


def make_policy(spec):
    """Build a policy from a name or a ``{"name": ..., **hyperparameters}`` mapping."""
    if isinstance(spec, str):
        spec = {"name": spec}
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in POLICIES:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(POLICIES)}")
    try:
        return POLICIES[name](**spec)
    except TypeError as exc:
        raise ValueError(f"bad hyperparameters for {name}: {exc}") from None

__all__ = [
    "Policy", "TabulatedPolicy", "FixedArmPolicy", "TwoPhasePolicy", "UniformPolicy", "DesignResult",
    "g_optimal_design", "PhasedElimination", "PhasedElimState", "phase_budget", "LinUCB", "LinUcbState",
    "confidence_radius", "linucb_select_continuous", "linucb_select_discrete", "ridge_update", "BanditPLS",
    "PlsState", "InfeasibleProjectionError", "pls_linear_estimator", "project_to_density", "project_to_pure",
    "project_to_simplex", "UCB", "UcbState", "ucb_index", "POLICIES", "make_policy",
]
