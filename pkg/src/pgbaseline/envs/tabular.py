"""Tabular environments, including the shipped three-state system."""

from __future__ import annotations

import numpy as np
from numba import njit

from .._kernels import inverse_cdf
from ..mdp import TabularMdp, TabularSoftmaxPolicy
from .base import Environment

# Three states on a line; action 0 tries to move left, action 1 right.
# A move succeeds with the listed probability, otherwise the state is kept.
THREE_STATE_RIGHT = (0.7, 1.0)  # success from states 0 and 1
THREE_STATE_LEFT = (0.7, 1.0)  # success from states 1 and 2
THREE_STATE_REWARD = (-0.5, -0.3, 1.0)
THREE_STATE_THETA = (1.0, -0.5, 0.0, 0.0, -1.0, 0.5)


def line_mdp(right, left, reward):
    """Three-state chain where each action moves one step or stays put."""
    right, left = tuple(right), tuple(left)
    n = len(reward)
    if len(right) != n - 1 or len(left) != n - 1:
        raise ValueError("need one move probability per interior edge")
    P = np.zeros((n, 2, n))
    for x in range(n):
        if x > 0:
            P[x, 0, x - 1] = left[x - 1]
        P[x, 0, x] += 1.0 - (left[x - 1] if x > 0 else 0.0)
        if x < n - 1:
            P[x, 1, x + 1] = right[x]
        P[x, 1, x] += 1.0 - (right[x] if x < n - 1 else 0.0)
    return TabularMdp(P, np.asarray(reward, dtype=float))


def default_three_state(theta=None):
    """The shipped three-state system and its tabular softmax policy.

    States 0, 1, 2 sit on a line with rewards -0.5, -0.3 and 1.0. A right
    move succeeds with probability 0.7 from state 0 and always from state 1;
    a left move succeeds with probability 0.7 from state 1 and always from
    state 2. The default policy leans left in state 0 (p=0.82), is uniform in
    state 1 and leans right in state 2 (p=0.82), so the average reward sits
    near 0.165 while its gradient stays well away from zero.
    """
    mdp = line_mdp(THREE_STATE_RIGHT, THREE_STATE_LEFT, THREE_STATE_REWARD)
    policy = TabularSoftmaxPolicy(3, 2, THREE_STATE_THETA if theta is None else theta)
    return mdp, policy


# params: [n_states, n_actions, cumulative transitions..., rewards...]
@njit(cache=True)
def _step(state, action, u, params):
    n_s, n_a = int(params[0]), int(params[1])
    x = int(state[0])
    base = 2 + (x * n_a + action) * n_s
    y = inverse_cdf(params[base:base + n_s], u[0])
    out = np.empty(1)
    out[0] = y
    return out, params[2 + n_s * n_a * n_s + y]


@njit(cache=True)
def _features(state, params):
    out = np.zeros(int(params[0]))
    out[int(state[0])] = 1.0
    return out


class TabularEnv(Environment):
    """Run a :class:`TabularMdp` as a continuing environment.

    The policy features are the one-hot state vector, so a linear softmax
    policy over them is a tabular policy (with the weights laid out per
    action rather than per state).
    """

    n_uniforms = 1
    step_fn = staticmethod(_step)
    feature_fn = staticmethod(_features)

    def __init__(self, mdp: TabularMdp, start_state=None, name="tabular"):
        self.mdp = mdp
        self.name = name
        self.n_actions = mdp.n_actions
        self.n_features = mdp.n_states
        self.start_state = start_state
        self.params = np.concatenate([[mdp.n_states, mdp.n_actions],
                                      np.cumsum(mdp.transition, axis=2).ravel(), mdp.reward])

    def initial_state(self, rng):
        if self.start_state is None:
            return np.array([float(rng.integers(self.mdp.n_states))])
        return np.array([float(self.start_state)])


def three_state_env(**overrides):
    right = overrides.pop("right", THREE_STATE_RIGHT)
    left = overrides.pop("left", THREE_STATE_LEFT)
    reward = overrides.pop("reward", THREE_STATE_REWARD)
    return TabularEnv(line_mdp(right, left, reward), name="three-state", **overrides)
