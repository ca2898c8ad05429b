"""Exact quantities for small tabular problems.

Everything here is computed from the model, never from samples: the
stationary distribution, the average reward and its gradient, the binary
bandit's optimal baseline and the variance-minimising constant baseline for
the discounted estimator. Exhaustive trajectory enumeration is provided as
an independent route for tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np
from scipy.signal import lfilter
from scipy.sparse.csgraph import connected_components

from ._validation import check_gamma, check_positive_int, check_vector
from .mdp import SoftmaxPolicy, TabularMdp, TabularSoftmaxPolicy

STATIONARY_TOL = 1e-10
MAX_PATHS = 10**7


class OracleError(ValueError):
    """An exact computation is impossible for the given model."""


def policy_table(mdp: TabularMdp, policy: SoftmaxPolicy):
    """``table[x, a] = mu(a | x)``."""
    if isinstance(policy, TabularSoftmaxPolicy):
        if (policy.n_states, policy.n_actions) != (mdp.n_states, mdp.n_actions):
            raise ValueError("policy and MDP sizes differ")
        return policy.probabilities()
    if policy.n_actions != mdp.n_actions:
        raise ValueError("policy and MDP have different action counts")
    return np.stack([policy.action_distribution(x) for x in range(mdp.n_states)])


def score_table(mdp: TabularMdp, policy: SoftmaxPolicy):
    """``table[x, a]`` is the score of action a in state x (zero if impossible)."""
    if isinstance(policy, TabularSoftmaxPolicy):
        return policy.score_table()
    mu = policy_table(mdp, policy)
    table = np.zeros((mdp.n_states, mdp.n_actions, policy.dim))
    for x, a in zip(*np.nonzero(mu > 0)):
        table[x, a] = policy.score(x, a)
    return table


def policy_chain(mdp: TabularMdp, policy: SoftmaxPolicy):
    """State chain ``P_theta[x, y] = sum_a mu(a|x) P[x, a, y]``."""
    return np.einsum("xa,xay->xy", policy_table(mdp, policy), mdp.transition)


def _closed_classes(chain):
    n, labels = connected_components(chain > 0, directed=True, connection="strong")
    closed = []
    for c in range(n):
        members = labels == c
        if not np.any(chain[np.ix_(members, ~members)] > 0):
            closed.append(np.flatnonzero(members))
    return closed


def _power_iteration(chain, tol=1e-13, max_iter=100_000):
    # the lazy chain has the same fixed point and no periodicity
    lazy = 0.5 * (chain + np.eye(len(chain)))
    p = np.full(len(chain), 1.0 / len(chain))
    for _ in range(max_iter):
        nxt = p @ lazy
        if np.abs(nxt - p).max() < tol:
            return nxt
        p = nxt
    return p


def stationary_from_chain(chain):
    chain = np.asarray(chain, dtype=float)
    n = chain.shape[0]
    closed = _closed_classes(chain)
    if len(closed) != 1:
        raise OracleError(
            f"policy-induced chain has {len(closed)} recurrent classes; "
            "a unique stationary distribution needs exactly one")
    A = np.vstack([chain.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    residual = np.abs(pi @ chain - pi).max()
    if np.any(pi < -STATIONARY_TOL) or residual > STATIONARY_TOL:
        raise OracleError(f"stationary solve failed (residual {residual:.3g})")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.abs(_power_iteration(chain) - pi).max() > 1e-8:
        raise OracleError("linear solve and power iteration disagree on the stationary distribution")
    return pi


def stationary_distribution(mdp: TabularMdp, policy: SoftmaxPolicy):
    """Unique ``pi`` with ``pi P_theta = pi`` and ``sum(pi) = 1``.

    Raises :class:`OracleError` if the chain has more than one closed
    communicating class.
    """
    return stationary_from_chain(policy_chain(mdp, policy))


def average_reward(mdp: TabularMdp, policy: SoftmaxPolicy):
    """Long-run reward per step, ``pi . reward``."""
    return float(stationary_distribution(mdp, policy) @ mdp.reward)


def exact_gradient(mdp: TabularMdp, policy: SoftmaxPolicy, h=1e-6):
    """Gradient of the average reward by central differences (error O(h^2))."""
    if not h > 0:
        raise ValueError(f"finite-difference step must be positive, got {h}")
    theta = policy.theta
    grad = np.empty(policy.dim)
    for j in range(policy.dim):
        step = np.zeros(policy.dim)
        step[j] = h
        up = average_reward(mdp, policy.with_theta(theta + step))
        down = average_reward(mdp, policy.with_theta(theta - step))
        grad[j] = (up - down) / (2 * h)
    return grad


def discounted_gradient(mdp: TabularMdp, policy: SoftmaxPolicy, gamma):
    """Limit of the discounted estimator as ``t -> inf`` for a fixed ``gamma``.

    ``sum_{x,a} pi(x) mu(a|x) score(x,a) [P(x,a,.) . (I - gamma P_theta)^-1 reward]``.
    It tends to the true gradient as ``gamma -> 1``.
    """
    gamma = check_gamma(gamma)
    mu = policy_table(mdp, policy)
    chain = np.einsum("xa,xay->xy", mu, mdp.transition)
    pi = stationary_from_chain(chain)
    values = np.linalg.solve(np.eye(mdp.n_states) - gamma * chain, mdp.reward)
    weight = pi[:, None] * mu * (mdp.transition @ values)
    return np.einsum("xa,xad->d", weight, score_table(mdp, policy))


@dataclass(frozen=True)
class OracleResult:
    stationary: np.ndarray
    average_reward: float
    gradient: np.ndarray

    def reward_deviation(self, reward):
        """``reward - average_reward``."""
        return np.asarray(reward, dtype=float) - self.average_reward


def evaluate(mdp: TabularMdp, policy: SoftmaxPolicy, h=1e-6) -> OracleResult:
    pi = stationary_distribution(mdp, policy)
    return OracleResult(pi, float(pi @ mdp.reward), exact_gradient(mdp, policy, h))


def dayan_optimal_baseline(mu0, r0, r1):
    """Variance-minimising baseline for a two-action, immediate-reward task.

    ``mu0`` is the probability of action 0 and ``r0``, ``r1`` the expected
    rewards of the two actions.
    """
    if not 0.0 < mu0 < 1.0:
        raise ValueError(f"mu0 must lie strictly between 0 and 1, got {mu0}")
    return mu0 * r1 + (1.0 - mu0) * r0


def relative_error(estimate, truth):
    """``||estimate - truth|| / ||truth||``."""
    truth = np.asarray(truth, dtype=float)
    norm = np.linalg.norm(truth)
    if norm == 0:
        raise ValueError("relative error is undefined for a zero reference vector")
    return float(np.linalg.norm(np.asarray(estimate, dtype=float) - truth) / norm)


@dataclass(frozen=True)
class OptimalBaselineResult:
    """Variance-minimising constant baseline.

    ``b_star`` aggregates over parameters with weights ``||score||^2``;
    ``b_star_per_param[j]`` uses ``score_j^2`` and is NaN where
    ``undefined[j]`` (that score component is always zero).
    ``horizon`` is None for the infinite-horizon limit.
    """

    b_star: float
    b_star_per_param: np.ndarray
    gamma: float
    horizon: int | None
    undefined: np.ndarray = field(default=None)


def optimal_constant_baseline(mdp: TabularMdp, policy: SoftmaxPolicy, gamma, s=1, horizon=None):
    """Constant ``b`` minimising the variance of ``Q_s`` for the chain started from ``pi``.

    ``Q_s = score_s * sum_{i=s}^{horizon} (R_i - b) gamma^(i-s)``; setting
    its variance's derivative to zero gives
    ``b = E[score_s^2 sum R_i gamma^(i-s)] / E[score_s^2 sum gamma^(i-s)]``.
    The expectations are propagated exactly through powers of ``P_theta``.
    Because the chain starts in steady state only ``horizon - s`` matters.
    ``horizon=None`` takes the infinite sum (needs ``gamma < 1``).
    """
    gamma = check_gamma(gamma)
    s = check_positive_int(s, "s")
    mu = policy_table(mdp, policy)
    chain = np.einsum("xa,xay->xy", mu, mdp.transition)
    pi = stationary_from_chain(chain)

    if horizon is None:
        discounted = np.linalg.solve(np.eye(mdp.n_states) - gamma * chain, mdp.reward)
        total_weight = 1.0 / (1.0 - gamma)
    else:
        horizon = check_positive_int(horizon, "horizon")
        if horizon < s:
            raise ValueError(f"horizon {horizon} is before step {s}")
        discounted = np.zeros(mdp.n_states)
        v, total_weight, g = mdp.reward.copy(), 0.0, 1.0
        for _ in range(horizon - s + 1):
            discounted += g * v
            total_weight += g
            v = chain @ v
            g *= gamma

    sq = score_table(mdp, policy) ** 2
    weight = pi[:, None] * mu
    reward_to_go = mdp.transition @ discounted  # (x, a)
    num = np.einsum("xa,xad->d", weight * reward_to_go, sq)
    den = total_weight * np.einsum("xa,xad->d", weight, sq)
    undefined = den <= 0
    per_param = np.full(policy.dim, np.nan)
    per_param[~undefined] = num[~undefined] / den[~undefined]
    if np.all(undefined):
        raise OracleError("every score component is identically zero; baseline undefined")
    b_star = num.sum() / den.sum()
    return OptimalBaselineResult(float(b_star), per_param, gamma, horizon, undefined)


@dataclass(frozen=True)
class PathEnsemble:
    """All trajectories of a fixed horizon with their probabilities.

    ``states`` has shape (n, horizon + 1) and includes the final successor,
    ``actions`` (n, horizon); ``rewards[:, i] = reward[states[:, i + 1]]``.
    """

    states: np.ndarray
    actions: np.ndarray
    probabilities: np.ndarray
    rewards: np.ndarray
    scores: np.ndarray  # (n, horizon, dim)


def enumerate_trajectories(mdp: TabularMdp, policy: SoftmaxPolicy, horizon, start=None):
    """Enumerate every positive-probability trajectory of length ``horizon``.

    ``start`` is the initial state distribution (stationary by default).
    """
    horizon = check_positive_int(horizon, "horizon")
    S, A = mdp.n_states, mdp.n_actions
    if S * (S * A) ** horizon > MAX_PATHS:
        raise OracleError(f"{S * (S * A) ** horizon} trajectories exceed the enumeration limit")
    mu = policy_table(mdp, policy)
    start = stationary_distribution(mdp, policy) if start is None else np.asarray(start, float)
    states = np.flatnonzero(start > 0)[:, None]
    actions = np.empty((len(states), 0), dtype=np.int64)
    prob = start[states[:, 0]]
    pairs = np.array(list(product(range(A), range(S))))
    for _ in range(horizon):
        n = len(states)
        a = np.tile(pairs[:, 0], n)
        y = np.tile(pairs[:, 1], n)
        x = np.repeat(states[:, -1], len(pairs))
        p = np.repeat(prob, len(pairs)) * mu[x, a] * mdp.transition[x, a, y]
        keep = p > 0
        states = np.column_stack([np.repeat(states, len(pairs), axis=0), y])[keep]
        actions = np.column_stack([np.repeat(actions, len(pairs), axis=0), a])[keep]
        prob = p[keep]
    table = score_table(mdp, policy)
    scores = table[states[:, :-1], actions]
    return PathEnsemble(states, actions, prob, mdp.reward[states[:, 1:]], scores)


def expected_estimate(mdp, policy, gamma, horizon, baseline=0.0, start=None):
    """``E[G_horizon]`` for a constant baseline, by enumeration."""
    gamma = check_gamma(gamma)
    paths = enumerate_trajectories(mdp, policy, horizon, start)
    z = lfilter([1.0], [1.0, -gamma], paths.scores, axis=1)
    g = ((paths.rewards - baseline)[:, :, None] * z).sum(axis=1) / horizon
    return paths.probabilities @ g


def q_samples(rewards, scores, gamma, baseline=0.0):
    """``Q_s = score_s * sum_{i>=s} (R_i - b) gamma^(i-s)`` for every step s.

    Sums run to the end of the supplied arrays. Row ``s-1`` holds ``Q_s``.
    """
    rewards = check_vector(rewards, "rewards")
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    gamma = check_gamma(gamma)
    to_go = lfilter([1.0], [1.0, -gamma], (rewards - baseline)[::-1])[::-1]
    return scores * to_go[:, None]


def q_moments(mdp, policy, gamma, horizon, baseline=0.0, s=1):
    """Exact mean and variance of ``Q_s`` per parameter, by enumeration."""
    paths = enumerate_trajectories(mdp, policy, horizon)
    if not 1 <= s <= horizon:
        raise ValueError(f"step {s} outside 1..{horizon}")
    q = np.stack([q_samples(r, z, gamma, baseline)[s - 1]
                  for r, z in zip(paths.rewards, paths.scores)])
    mean = paths.probabilities @ q
    var = paths.probabilities @ (q - mean) ** 2
    return mean, var


def enumerated_optimal_baseline(mdp, policy, gamma, horizon, s=1):
    """Same criterion as :func:`optimal_constant_baseline`, by brute force."""
    paths = enumerate_trajectories(mdp, policy, horizon)
    disc = gamma ** np.arange(horizon - s + 1)
    reward_sum = paths.rewards[:, s - 1:] @ disc
    sq = paths.scores[:, s - 1] ** 2
    num = paths.probabilities @ (sq * reward_sum[:, None])
    den = disc.sum() * (paths.probabilities @ sq)
    return float(num.sum() / den.sum()), num / den


def oracle_report(mdp, policy, gamma=None, horizon=None, h=1e-6):
    """JSON-ready summary of the exact quantities at the policy's theta."""
    result = evaluate(mdp, policy, h)
    report = {
        "stationary": result.stationary.tolist(),
        "average_reward": result.average_reward,
        "gradient": result.gradient.tolist(),
        "settings": {"theta": policy.theta.tolist(), "fd_step": h,
                     "gamma": gamma, "horizon": horizon},
    }
    if gamma is not None:
        opt = optimal_constant_baseline(mdp, policy, gamma, horizon=horizon)
        report["b_star"] = opt.b_star
        report["b_star_per_param"] = [None if np.isnan(v) else float(v)
                                      for v in opt.b_star_per_param]
    return report
