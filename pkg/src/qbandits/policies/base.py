"""Policy contract shared by every learner.

A :class:`Policy` is an immutable bundle of hyperparameters. ``start`` builds
the mutable per-episode learner state, which exposes ``select(t)`` and
``update(arm, reward)``. Learners that stop adapting may also expose
``committed_arm()``; the episode runner then samples the remaining rounds in
bulk.
"""

from __future__ import annotations

from ..bandit import DiscreteActions, IncompatibleActionSetError, Rank1Actions


class Policy:
    name = "policy"
    discrete = True
    continuous = False

    def check(self, actions):
        if isinstance(actions, DiscreteActions) and not self.discrete:
            raise IncompatibleActionSetError(f"{self.name} cannot play a discrete action set")
        if isinstance(actions, Rank1Actions) and not self.continuous:
            raise IncompatibleActionSetError(f"{self.name} cannot play a continuous action set")

    def start(self, actions, horizon, rng):
        raise NotImplementedError


class TabulatedPolicy(Policy):
    """Policies whose conditional action law is available in closed form.

    ``action_probs(history, k)`` returns the distribution of the next arm
    given the list of past ``(arm, reward)`` pairs. Exact-enumeration audits
    use it directly; simulations sample from it.
    """

    def action_probs(self, history, k):
        raise NotImplementedError

    def start(self, actions, horizon, rng):
        self.check(actions)
        return _TabulatedLearner(self, actions.k, rng)


class _TabulatedLearner:
    def __init__(self, policy, k, rng):
        self.policy, self.k, self.rng = policy, k, rng
        self.history = []

    def select(self, t):
        p = self.policy.action_probs(self.history, self.k)
        return int(self.rng.choice(self.k, p=p))

    def update(self, arm, reward):
        self.history.append((arm, reward))
