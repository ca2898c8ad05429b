from __future__ import annotations

import numpy as np

from ..mdp import LinearSoftmaxPolicy


class Environment:
    """A continuing environment driven by compiled step/feature functions.

    Subclasses set ``step_fn(state, action, u, params) -> (state, reward)``
    and ``feature_fn(state, params) -> features`` (both numba-jitted),
    ``params`` (a float array of constants), ``n_actions``, ``n_features``
    and ``n_uniforms``, the number of uniform variates one step consumes.
    """

    name = "environment"
    n_actions: int
    n_features: int
    n_uniforms = 0
    params: np.ndarray

    def initial_state(self, rng) -> np.ndarray:
        raise NotImplementedError

    def step(self, state, action, u=()):
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape[0] != self.n_uniforms:
            raise ValueError(f"{self.name} step needs {self.n_uniforms} uniforms, got {u.shape[0]}")
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range")
        return self.step_fn(np.asarray(state, dtype=float), int(action), u, self.params)

    def features(self, state):
        return self.feature_fn(np.asarray(state, dtype=float), self.params)

    def policy(self, theta=None):
        return LinearSoftmaxPolicy(self.features, self.n_actions, self.n_features, theta)
