"""Two-armed bandit: the immediate-reward special case."""

from __future__ import annotations

import numpy as np
from numba import njit

from ..mdp import TabularMdp, TabularSoftmaxPolicy
from .base import Environment


def _arm(arm):
    """Normalise an arm: a number (deterministic) or ``(mean, sd)``."""
    if np.isscalar(arm):
        return float(arm), 0.0
    mean, sd = arm
    if sd < 0:
        raise ValueError("reward standard deviation must be >= 0")
    return float(mean), float(sd)


# params: [mean0, sd0, mean1, sd1]
@njit(cache=True)
def _step(state, action, u, params):
    mean, sd = params[2 * action], params[2 * action + 1]
    # Box-Muller on the two uniforms; 1 - u keeps the log argument positive
    z = np.sqrt(-2.0 * np.log(1.0 - u[0])) * np.cos(2.0 * np.pi * u[1])
    return state.copy(), mean + sd * z


@njit(cache=True)
def _features(state, params):
    return np.ones(1)


class TwoArmedBandit(Environment):
    """Single-state, two-action problem with Gaussian (or fixed) rewards.

    Parameters
    ----------
    mu0 : float in (0, 1)
        Probability of action 0 under the initial policy.
    r0, r1 : float or (mean, sd)
        Reward distribution of each action.
    """

    name = "bandit"
    n_actions = 2
    n_features = 1
    n_uniforms = 2
    step_fn = staticmethod(_step)
    feature_fn = staticmethod(_features)

    def __init__(self, mu0=0.5, r0=0.0, r1=1.0):
        if not 0.0 < mu0 < 1.0:
            raise ValueError(f"mu0 must lie strictly between 0 and 1, got {mu0}")
        self.mu0 = float(mu0)
        self.arms = (_arm(r0), _arm(r1))
        self.params = np.array([*self.arms[0], *self.arms[1]])

    @property
    def means(self):
        return np.array([self.arms[0][0], self.arms[1][0]])

    def initial_state(self, rng=None):
        return np.zeros(1)

    def initial_theta(self):
        """Per-action logits giving probability ``mu0`` to action 0."""
        return np.array([np.log(self.mu0 / (1.0 - self.mu0)), 0.0])

    def tabular_policy(self, theta=None):
        return TabularSoftmaxPolicy(1, 2, self.initial_theta() if theta is None else theta)

    def expected_reward(self, mu0=None):
        mu0 = self.mu0 if mu0 is None else mu0
        return mu0 * self.means[0] + (1 - mu0) * self.means[1]

    def gradient(self, theta=None):
        """Exact gradient of the expected reward w.r.t. the per-action logits."""
        theta = self.initial_theta() if theta is None else np.asarray(theta, dtype=float)
        mu = np.exp(theta - theta.max())
        mu /= mu.sum()
        return mu * (self.means - mu @ self.means)

    def as_mdp(self):
        """Expected-reward model: two terminal-free states, one per last arm.

        State ``a`` means "the last pull was arm ``a``"; every action moves
        to its own state, so ``reward[X_{t+1}]`` is the mean of the arm just
        pulled.
        """
        P = np.zeros((2, 2, 2))
        P[:, 0, 0] = 1.0
        P[:, 1, 1] = 1.0
        return TabularMdp(P, self.means)

    def sample(self, policy, rng):
        """One episode: ``(action, reward, score)`` under ``policy``."""
        u = rng.random(3)
        a = policy.sample_action(0, u[0])
        _, r = self.step(self.initial_state(), a, u[1:])
        return a, float(r), policy.score(0, a)
