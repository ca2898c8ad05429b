"""Finite MDPs, softmax policies and trajectory sampling.

Rewards attach to the successor state: the reward for acting at step t is
``reward[X_{t+1}]``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from . import _kernels
from ._validation import check_positive_int, check_random_state, check_vector

_ROW_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """A finite MDP with transition tensor ``P[x, a, y]`` and state rewards.

    Parameters
    ----------
    transition : array of shape (n_states, n_actions, n_states)
        Row ``transition[x, a]`` is the successor distribution.
    reward : array of shape (n_states,)
        Reward received on entering each state.
    """

    transition: np.ndarray
    reward: np.ndarray

    def __post_init__(self):
        P = np.array(self.transition, dtype=float)
        rho = np.array(self.reward, dtype=float)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must have shape (S, A, S), got {P.shape}")
        if P.shape[0] < 1 or P.shape[1] < 1:
            raise ValueError("need at least one state and one action")
        if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
            raise ValueError("transition probabilities must be finite and in [0, 1]")
        row_sums = P.sum(axis=2)
        bad = np.argwhere(np.abs(row_sums - 1.0) > _ROW_ATOL)
        if bad.size:
            x, a = bad[0]
            raise ValueError(
                f"transition[{x}][{a}] sums to {row_sums[x, a]!r}, not 1")
        if rho.shape != (P.shape[0],):
            raise ValueError(f"reward must have length {P.shape[0]}, got shape {rho.shape}")
        if not np.all(np.isfinite(rho)):
            raise ValueError("reward contains non-finite entries")
        P.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", rho)

    @property
    def n_states(self):
        return self.transition.shape[0]

    @property
    def n_actions(self):
        return self.transition.shape[1]

    def to_dict(self):
        return {
            "n_states": self.n_states,
            "n_actions": self.n_actions,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            n_states, n_actions = int(doc["n_states"]), int(doc["n_actions"])
            mdp = cls(np.asarray(doc["transition"], dtype=float),
                      np.asarray(doc["reward"], dtype=float))
        except KeyError as exc:
            raise ValueError(f"MDP document is missing field {exc.args[0]!r}") from None
        if (mdp.n_states, mdp.n_actions) != (n_states, n_actions):
            raise ValueError(
                f"declared size ({n_states}, {n_actions}) does not match "
                f"transition shape {mdp.transition.shape}")
        return mdp

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text

    @classmethod
    def from_json(cls, source):
        """Load from a JSON string or a path to a JSON file."""
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            source = Path(source).read_text()
        return cls.from_dict(json.loads(source))


def _softmax(logits):
    logits = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError(f"non-finite logits {logits}")
    z = np.exp(logits - logits.max())
    return z / z.sum()


class SoftmaxPolicy:
    """Gibbs policy ``mu(a|x) ∝ exp(theta · phi(x, a))``.

    ``features(observation)`` must return an ``(n_actions, dim)`` array whose
    row ``a`` is ``phi(x, a)``. Instances are immutable; use
    :meth:`with_theta` for a perturbed copy.
    """

    def __init__(self, theta, features: Callable[[object], np.ndarray], n_actions: int):
        self.theta = check_vector(theta, "theta").copy()
        self.theta.setflags(write=False)
        self.features = features
        self.n_actions = check_positive_int(n_actions, "n_actions")

    @property
    def dim(self):
        return self.theta.shape[0]

    def with_theta(self, theta):
        clone = object.__new__(type(self))
        clone.__dict__.update(self.__dict__)
        clone.theta = check_vector(theta, "theta", self.dim).copy()
        clone.theta.setflags(write=False)
        return clone

    def feature_matrix(self, observation):
        phi = np.asarray(self.features(observation), dtype=float)
        if phi.shape != (self.n_actions, self.dim):
            raise ValueError(
                f"feature map returned shape {phi.shape}, expected {(self.n_actions, self.dim)}")
        return phi

    def action_distribution(self, observation):
        return _softmax(self.feature_matrix(observation) @ self.theta)

    def score(self, observation, action):
        """``grad log mu(action | observation)``: ``phi(x,a) - E_mu[phi(x,.)]``."""
        phi = self.feature_matrix(observation)
        mu = _softmax(phi @ self.theta)
        if not 0 <= action < self.n_actions:
            raise ValueError(f"action {action} out of range")
        if mu[action] <= 0.0:
            raise ValueError(f"action {action} has zero probability; score undefined")
        return phi[action] - mu @ phi

    def sample_action(self, observation, u):
        """Inverse-CDF draw using the uniform variate ``u``."""
        return int(_kernels.inverse_cdf(np.cumsum(self.action_distribution(observation)), u))


class TabularSoftmaxPolicy(SoftmaxPolicy):
    """Softmax policy over one-hot ``(state, action)`` features.

    ``theta[x * n_actions + a]`` is the logit of action ``a`` in state ``x``.
    """

    def __init__(self, n_states, n_actions, theta=None):
        self.n_states = check_positive_int(n_states, "n_states")
        n_actions = check_positive_int(n_actions, "n_actions")
        if theta is None:
            theta = np.zeros(self.n_states * n_actions)
        super().__init__(theta, self._one_hot, n_actions)
        if self.dim != self.n_states * n_actions:
            raise ValueError(
                f"tabular theta needs {self.n_states * n_actions} entries, got {self.dim}")

    def _one_hot(self, x):
        x = int(x)
        if not 0 <= x < self.n_states:
            raise ValueError(f"state {x} out of range")
        phi = np.zeros((self.n_actions, self.dim))
        phi[np.arange(self.n_actions), x * self.n_actions + np.arange(self.n_actions)] = 1.0
        return phi

    def probabilities(self):
        """All action distributions at once, shape (n_states, n_actions)."""
        logits = self.theta.reshape(self.n_states, self.n_actions)
        if not np.all(np.isfinite(logits)):
            raise FloatingPointError("non-finite logits")
        z = np.exp(logits - logits.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)

    def score_table(self):
        """``table[x, a]`` is the score vector for action a in state x."""
        mu = self.probabilities()
        S, A = mu.shape
        table = np.zeros((S, A, S * A))
        for x in range(S):
            block = slice(x * A, (x + 1) * A)
            table[x, :, block] = np.eye(A) - mu[x]
        return table


class LinearSoftmaxPolicy(SoftmaxPolicy):
    """Softmax policy with one weight block per action.

    ``phi(x, a)`` places the state feature vector ``f(x)`` in block ``a`` of an
    ``n_actions * n_features`` vector, so ``theta.reshape(n_actions, -1)[a]``
    are the weights of action ``a``.
    """

    def __init__(self, state_features, n_actions, n_features, theta=None):
        self.state_features = state_features
        self.n_features = check_positive_int(n_features, "n_features")
        if theta is None:
            theta = np.zeros(n_actions * self.n_features)
        super().__init__(theta, self._blocks, n_actions)
        if self.dim != n_actions * self.n_features:
            raise ValueError(f"theta needs {n_actions * self.n_features} entries, got {self.dim}")

    def _blocks(self, observation):
        f = np.asarray(self.state_features(observation), dtype=float)
        return np.kron(np.eye(self.n_actions), f)

    @property
    def weights(self):
        return self.theta.reshape(self.n_actions, self.n_features)


def action_distribution(policy, observation):
    """Action probabilities ``mu(. | observation)``."""
    return policy.action_distribution(observation)


def score(policy, observation, action):
    """Score vector ``zeta = grad mu / mu`` for one action."""
    return policy.score(observation, action)


@dataclass(frozen=True)
class TrajectoryStep:
    observation: object
    action: int
    reward: float
    score: np.ndarray


class Trajectory(Sequence):
    """Array-backed sequence of :class:`TrajectoryStep`.

    ``observations[t]`` is X_t, ``actions[t]`` is A_t, ``rewards[t]`` is the
    reward for that step and ``scores[t]`` its score vector. ``final_state``
    is the state reached after the last step.
    """

    def __init__(self, observations, actions, rewards, scores, final_state=None):
        self.observations = np.asarray(observations)
        self.actions = np.asarray(actions, dtype=np.int64)
        self.rewards = np.asarray(rewards, dtype=float)
        self.scores = np.atleast_2d(np.asarray(scores, dtype=float))
        self.final_state = final_state
        T = len(self.actions)
        if not (len(self.observations) == len(self.rewards) == len(self.scores) == T):
            raise ValueError("trajectory arrays have inconsistent lengths")
        if not (np.all(np.isfinite(self.rewards)) and np.all(np.isfinite(self.scores))):
            raise ValueError("trajectory rewards and scores must be finite")

    @classmethod
    def from_steps(cls, steps):
        steps = list(steps)
        if not steps:
            raise ValueError("empty trajectory")
        return cls([s.observation for s in steps], [s.action for s in steps],
                   [s.reward for s in steps], np.stack([s.score for s in steps]))

    def __len__(self):
        return len(self.actions)

    def __getitem__(self, t):
        if isinstance(t, slice):
            return Trajectory(self.observations[t], self.actions[t],
                              self.rewards[t], self.scores[t])
        return TrajectoryStep(self.observations[t].item() if self.observations.ndim == 1
                              else self.observations[t],
                              int(self.actions[t]), float(self.rewards[t]), self.scores[t])

    def __iter__(self) -> Iterator[TrajectoryStep]:
        for t in range(len(self)):
            yield self[t]


def sample_trajectory(mdp: TabularMdp, policy: SoftmaxPolicy, start_state, length, rng=None):
    """Simulate ``length`` steps from ``start_state`` under ``policy``.

    Each step draws ``A_t ~ mu(.|X_t)``, then ``X_{t+1} ~ P[X_t, A_t]`` and
    records ``R_t = reward[X_{t+1}]``. The result is a pure function of the
    inputs and the generator state.
    """
    length = check_positive_int(length, "length")
    if not 0 <= int(start_state) < mdp.n_states:
        raise ValueError(f"start state {start_state} out of range")
    rng = check_random_state(rng)
    u = rng.random((length, 2))
    transition_cdf = np.cumsum(mdp.transition, axis=2)

    if isinstance(policy, TabularSoftmaxPolicy):
        if policy.n_states != mdp.n_states or policy.n_actions != mdp.n_actions:
            raise ValueError("policy and MDP sizes differ")
        states, actions = _kernels.sample_tabular_chain(
            np.cumsum(policy.probabilities(), axis=1), transition_cdf, int(start_state), u)
        scores = policy.score_table()[states[:-1], actions]
    else:
        states = np.empty(length + 1, dtype=np.int64)
        actions = np.empty(length, dtype=np.int64)
        scores = np.empty((length, policy.dim))
        states[0] = int(start_state)
        for t in range(length):
            x = states[t]
            a = policy.sample_action(x, u[t, 0])
            actions[t] = a
            scores[t] = policy.score(x, a)
            states[t + 1] = _kernels.inverse_cdf(transition_cdf[x, a], u[t, 1])
    return Trajectory(states[:-1], actions, mdp.reward[states[1:]], scores,
                      final_state=int(states[-1]))
