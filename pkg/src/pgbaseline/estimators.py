"""GPOMDP, GARB, OLPOMDP and OLGARB.

Two layers live here. The per-step update rules (``gpomdp_update``,
``garb_update``, ``olpomdp_step``, ``olgarb_step``) are the literal
recursions and are what the tests treat as ground truth. The batch helpers
(``discounted_traces``, ``running_estimates``) compute the same quantities
for a whole recorded trajectory with vectorised numpy, and back the
scikit-learn style estimator classes used by the experiments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.signal import lfilter
from sklearn.base import BaseEstimator

from ._validation import (check_gamma, check_positive_int, check_random_state,
                          check_step_size, check_vector)

BaselineMode = Literal["none", "constant", "adaptive"]


@dataclass(frozen=True)
class EstimatorConfig:
    gamma: float
    baseline_mode: BaselineMode = "none"
    baseline: float = 0.0
    step_size: float | None = None

    def __post_init__(self):
        check_gamma(self.gamma)
        if self.baseline_mode not in ("none", "constant", "adaptive"):
            raise ValueError(f"unknown baseline mode {self.baseline_mode!r}")
        if not np.isfinite(self.baseline):
            raise ValueError("baseline must be finite")
        if self.step_size is not None:
            check_step_size(self.step_size)


@dataclass
class EstimatorState:
    """Eligibility trace Z, gradient estimate G, baseline B and step count."""

    trace: np.ndarray
    estimate: np.ndarray
    baseline: float = 0.0
    steps: int = 0

    @classmethod
    def zeros(cls, dim):
        return cls(np.zeros(dim), np.zeros(dim))

    @property
    def dim(self):
        return self.trace.shape[0]


def _check_step(state, reward, score):
    score = np.asarray(score, dtype=float)
    if score.shape != state.trace.shape:
        raise ValueError(f"score has shape {score.shape}, expected {state.trace.shape}")
    if not np.isfinite(reward) or not np.all(np.isfinite(score)):
        raise ValueError("reward and score must be finite")
    return score


def gpomdp_update(state: EstimatorState, reward, score, gamma, baseline=0.0):
    """One GPOMDP step with an optional constant baseline ``b``.

    ``Z <- gamma Z + score``; ``G <- G + ((reward - b) Z - G) / (t + 1)``.
    """
    score = _check_step(state, reward, score)
    t = state.steps + 1
    z = gamma * state.trace + score
    g = state.estimate + ((reward - baseline) * z - state.estimate) / t
    return EstimatorState(z, g, state.baseline, t)


def garb_update(state: EstimatorState, reward, score, gamma, frozen_baseline=None):
    """One GARB step: update B, then Z, then G.

    With ``frozen_baseline`` the running average is not updated and the
    given value is used as B instead; replaying a recorded run with each
    step's B frozen reproduces the adaptive run exactly.
    """
    score = _check_step(state, reward, score)
    s = state.steps + 1
    if frozen_baseline is None:
        b = state.baseline + (reward - state.baseline) / s
    else:
        b = float(frozen_baseline)
    z = gamma * state.trace + score
    g = state.estimate + ((reward - b) * z - state.estimate) / s
    return EstimatorState(z, g, b, s)


def olpomdp_step(theta, trace, reward, score, alpha, gamma):
    """``Z <- gamma Z + score``; ``theta <- theta + alpha * reward * Z``."""
    z = gamma * np.asarray(trace, dtype=float) + np.asarray(score, dtype=float)
    new_theta = np.asarray(theta, dtype=float) + alpha * reward * z
    if not np.all(np.isfinite(new_theta)):
        raise FloatingPointError("OLPOMDP produced a non-finite parameter vector")
    return new_theta, z


def olgarb_step(theta, trace, baseline, steps, reward, score, alpha, gamma):
    """One OLGARB step. Returns ``(theta, trace, baseline, steps)``.

    B is refreshed with the new reward before it is used, so on the very
    first step ``reward - B`` is zero and theta does not move.
    """
    s = steps + 1
    b = baseline + (reward - baseline) / s
    z = gamma * np.asarray(trace, dtype=float) + np.asarray(score, dtype=float)
    new_theta = np.asarray(theta, dtype=float) + alpha * (reward - b) * z
    if not np.all(np.isfinite(new_theta)):
        raise FloatingPointError("OLGARB produced a non-finite parameter vector")
    return new_theta, z, b, s


def discounted_traces(scores, gamma, initial=None):
    """All eligibility traces ``Z_t = sum_{s<=t} gamma^(t-s) zeta_s``.

    ``initial`` is the trace before the first score (zero by default).
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    if initial is None:
        return lfilter([1.0], [1.0, -gamma], scores, axis=0)
    zi = gamma * np.asarray(initial, dtype=float)[None, :]
    z, _ = lfilter([1.0], [1.0, -gamma], scores, axis=0, zi=zi)
    return z


def _advantages(rewards, baseline, prior_baseline=0.0, prior_steps=0):
    """Per-step ``R_s - B_s`` and the final baseline."""
    if isinstance(baseline, str):
        if baseline != "adaptive":
            raise ValueError(f"unknown baseline {baseline!r}")
        counts = prior_steps + np.arange(1, len(rewards) + 1)
        b = (prior_baseline * prior_steps + np.cumsum(rewards)) / counts
        return rewards - b, float(b[-1])
    return rewards - float(baseline), float(baseline)


def running_estimates(rewards, scores, gamma, baseline=0.0, checkpoints=None):
    """Gradient estimates G_t of a whole trajectory, vectorised.

    ``baseline`` is a constant ``b`` or ``"adaptive"`` for GARB's running
    mean. Returns the final estimate, or an array of estimates at the given
    1-based ``checkpoints``.
    """
    rewards = np.asarray(rewards, dtype=float)
    z = discounted_traces(scores, gamma)
    adv, _ = _advantages(rewards, baseline)
    g = np.cumsum(adv[:, None] * z, axis=0)
    if checkpoints is None:
        return g[-1] / len(rewards)
    idx = np.asarray(checkpoints, dtype=np.int64)
    if idx.min() < 1 or idx.max() > len(rewards):
        raise ValueError("checkpoints must lie in [1, len(trajectory)]")
    return g[idx - 1] / idx[:, None]


def constant_baseline_estimate(trajectory, b, gamma):
    """``G_t = (1/t) sum_s (R_s - b) Z_s`` over the whole trajectory."""
    gamma = check_gamma(gamma)
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    return running_estimates(trajectory.rewards, trajectory.scores, gamma, baseline=float(b))


class _TraceEstimator(BaseEstimator):
    """Common streaming machinery for GPOMDP and GARB."""

    def _mode(self):
        raise NotImplementedError

    def fit(self, trajectory, y=None):
        """Estimate the gradient from a fresh start on ``trajectory``."""
        for attr in ("state_", "gradient_", "trace_", "baseline_", "n_steps_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(trajectory)

    def partial_fit(self, trajectory, y=None):
        """Continue the estimate with more steps of the same run."""
        gamma = check_gamma(self.gamma)
        if len(trajectory) == 0:
            raise ValueError("empty trajectory")
        scores = np.atleast_2d(trajectory.scores)
        state = getattr(self, "state_", None) or EstimatorState.zeros(scores.shape[1])
        if scores.shape[1] != state.dim:
            raise ValueError(f"score dimension {scores.shape[1]} does not match {state.dim}")
        rewards = np.asarray(trajectory.rewards, dtype=float)
        z = discounted_traces(scores, gamma, initial=state.trace)
        adv, b = _advantages(rewards, self._mode(), state.baseline, state.steps)
        t0, n = state.steps, len(rewards)
        g = (t0 * state.estimate + (adv[:, None] * z).sum(axis=0)) / (t0 + n)
        self.state_ = EstimatorState(z[-1].copy(), g, b, t0 + n)
        self.gradient_ = g
        self.trace_ = self.state_.trace
        self.baseline_ = b
        self.n_steps_ = t0 + n
        return self

    def write_log(self, trajectory, path):
        """Replay ``trajectory`` from scratch and write a per-step CSV log.

        Columns are ``step, reward, baseline, G_1..G_d``.
        """
        gamma = check_gamma(self.gamma)
        rewards = np.asarray(trajectory.rewards, dtype=float)
        z = discounted_traces(trajectory.scores, gamma)
        mode = self._mode()
        adv, _ = _advantages(rewards, mode)
        baselines = rewards - adv
        t = np.arange(1, len(rewards) + 1)
        g = np.cumsum(adv[:, None] * z, axis=0) / t[:, None]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["step", "reward", "baseline"] + [f"G_{i + 1}" for i in range(g.shape[1])])
            for k in range(len(rewards)):
                writer.writerow([int(t[k])] + [f"{v:.17g}" for v in (rewards[k], baselines[k], *g[k])])


class GPOMDP(_TraceEstimator):
    """Discounted policy-gradient estimator with a constant reward baseline.

    Parameters
    ----------
    gamma : float in [0, 1)
        Discount factor of the eligibility trace.
    baseline : float, default 0.0
        Constant subtracted from every reward. Zero gives plain GPOMDP.

    Attributes
    ----------
    gradient_ : ndarray
        The estimate G_t after the last ``fit``/``partial_fit``.
    trace_ : ndarray
        Final eligibility trace.
    n_steps_ : int
    """

    def __init__(self, gamma=0.9, baseline=0.0):
        self.gamma = gamma
        self.baseline = baseline

    def _mode(self):
        return float(self.baseline)


class GARB(_TraceEstimator):
    """GPOMDP with the running average reward as its baseline.

    ``baseline_`` holds the average of all rewards seen so far.
    """

    def __init__(self, gamma=0.9):
        self.gamma = gamma

    def _mode(self):
        return "adaptive"


class OLPOMDP(BaseEstimator):
    """Online policy-gradient ascent, updating theta after every step.

    ``fit(env)`` runs the learner on an environment from
    :mod:`pgbaseline.envs` and records the average reward of each window of
    ``window`` steps. After fitting, ``theta_`` is the final parameter vector
    (block ``a`` of ``theta_.reshape(n_actions, -1)`` holds action ``a``'s
    weights), ``curve_`` the list of ``(step, windowed average reward)`` and
    ``diverged_`` whether theta became non-finite (the run then stops).
    """

    _use_baseline = False

    def __init__(self, alpha=0.01, gamma=0.99, n_steps=100_000, window=10_000,
                 theta_init=0.5, random_state=None):
        self.alpha = alpha
        self.gamma = gamma
        self.n_steps = n_steps
        self.window = window
        self.theta_init = theta_init
        self.random_state = random_state

    def fit(self, env, theta=None):
        """Train on ``env``.

        ``theta`` overrides the initial parameters; by default they are drawn
        uniformly from ``[-theta_init, theta_init]``.
        """
        from . import _kernels

        alpha = check_step_size(self.alpha, allow_zero=True)
        gamma = check_gamma(self.gamma)
        n_steps = check_positive_int(self.n_steps, "n_steps")
        window = check_positive_int(self.window, "window")
        rng = check_random_state(self.random_state)

        shape = (env.n_actions, env.n_features)
        if theta is None:
            w = rng.uniform(-self.theta_init, self.theta_init, size=shape)
        else:
            w = check_vector(theta, "theta", shape[0] * shape[1]).reshape(shape).copy()
        trace = np.zeros(shape)
        baseline = np.zeros(2)
        state = env.initial_state(rng)
        rewards = np.empty(window)
        curve, done, diverged = [], 0, False
        while done < n_steps:
            k = min(window, n_steps - done)
            u = rng.random((k, 1 + env.n_uniforms))
            state, ok = _kernels.online_chunk(env.step_fn, env.feature_fn, env.params, state,
                                              w, trace, baseline, alpha, gamma,
                                              self._use_baseline, u, rewards[:k])
            if not ok:
                diverged = True
                break
            done += k
            curve.append((done, float(rewards[:k].mean())))
        self.theta_ = w.ravel()
        self.curve_ = curve
        self.diverged_ = diverged
        self.baseline_ = float(baseline[0])
        self.final_state_ = state
        return self


class OLGARB(OLPOMDP):
    """OLPOMDP with the running average reward subtracted from each reward."""

    _use_baseline = True
