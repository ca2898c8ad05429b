"""Replicated experiments: bias/variance curves, baseline sweeps and training runs.

Replica ``k`` of an experiment draws all of its randomness from
``replica_rng(base_seed, k)``, and results are merged in replica order, so
every output is independent of how many worker processes were used.

Within one replica, a single simulated trajectory is shared by all the
estimators, discount factors and baselines being compared (common random
numbers), which makes the comparisons much sharper than independent runs.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import _kernels
from ._validation import (check_gamma, check_positive_int, check_random_state,
                          check_step_size, replica_rng)
from .csvio import SchemaError, read_table, write_table
from .estimators import OLGARB, OLPOMDP, discounted_traces, running_estimates
from .mdp import TabularMdp, sample_trajectory
from .oracle import evaluate, stationary_distribution

log = logging.getLogger(__name__)

DEFAULT_CHECKPOINTS = (100, 316, 1000, 3162, 10_000)
DEFAULT_SWEEP_GAMMAS = (0.4, 0.8, 0.95, 0.99)
DEFAULT_B_GRID = tuple(np.round(np.arange(1, 15) / 10, 10))  # b / r_bar
ESTIMATOR_BASELINES = {"gpomdp": 0.0, "garb": "adaptive"}
ONLINE_LEARNERS = {"olpomdp": OLPOMDP, "olgarb": OLGARB}


@dataclass(frozen=True)
class SweepRecord:
    """Mean and sample std of the relative error over replicas.

    ``baseline`` is ``"none"``, ``"adaptive"`` or, for a constant baseline,
    the ratio ``b / r_bar``.
    """

    algorithm: str
    gamma: float
    baseline: float | str
    steps: int
    replicas: int
    mean_error: float
    std_error: float

    def __post_init__(self):
        if self.replicas < 2:
            raise ValueError("a sweep record needs at least 2 replicas")
        if not self.std_error >= 0:
            raise ValueError("std must be non-negative")


@dataclass
class TrainingCurve:
    """Windowed average reward of one training run."""

    algorithm: str
    seed: int
    steps: np.ndarray
    rewards: np.ndarray
    diverged: bool = False
    theta: np.ndarray | None = field(default=None, repr=False)
    noop_iterations: int = 0

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int64)
        self.rewards = np.asarray(self.rewards, dtype=float)
        if self.steps.shape != self.rewards.shape:
            raise ValueError("steps and rewards differ in length")
        if np.any(np.diff(self.steps) <= 0):
            raise ValueError("curve steps must be strictly increasing")

    @property
    def final_reward(self):
        return float(self.rewards[-1]) if len(self.rewards) else float("nan")


def _as_mdp(env):
    mdp = getattr(env, "mdp", env)
    if not isinstance(mdp, TabularMdp):
        raise ValueError("this experiment needs a tabular environment with an exact oracle")
    return mdp


def _map_replicas(fn, replicas, n_jobs):
    """``[fn(k) for k in range(replicas)]``, optionally spread over processes."""
    n_jobs = check_positive_int(n_jobs, "n_jobs")
    if n_jobs == 1 or replicas == 1:
        return [fn(k) for k in range(replicas)]
    blocks = np.array_split(np.arange(replicas), min(n_jobs, replicas))
    parts = Parallel(n_jobs=n_jobs)(delayed(_run_block)(fn, b) for b in blocks)
    return [r for part in parts for r in part]


def _run_block(fn, block):
    return [fn(int(k)) for k in block]


def _stationary_trajectory(mdp, policy, stationary, length, base_seed, k):
    """Replica k's trajectory, started from a draw of the stationary law."""
    rng = replica_rng(base_seed, k)
    start = rng.choice(mdp.n_states, p=stationary)
    return sample_trajectory(mdp, policy, start, length, rng)


def _summaries(errors):
    errors = np.asarray(errors)
    return errors.mean(axis=0), errors.std(axis=0, ddof=1)


class _BiasVarianceReplica:
    def __init__(self, mdp, policy, stationary, gradient, algorithms, gammas, checkpoints, seed):
        self.__dict__.update(locals())
        del self.__dict__["self"]

    def __call__(self, k):
        traj = _stationary_trajectory(self.mdp, self.policy, self.stationary,
                                      int(self.checkpoints[-1]), self.seed, k)
        out = np.empty((len(self.algorithms), len(self.gammas), len(self.checkpoints)))
        norm = np.linalg.norm(self.gradient)
        for i, algo in enumerate(self.algorithms):
            for j, gamma in enumerate(self.gammas):
                g = running_estimates(traj.rewards, traj.scores, gamma,
                                      ESTIMATOR_BASELINES[algo], self.checkpoints)
                out[i, j] = np.linalg.norm(g - self.gradient, axis=1) / norm
        return out


def bias_variance_experiment(env, policy, algorithms=("gpomdp", "garb"), gammas=(0.4, 0.99),
                             checkpoints=DEFAULT_CHECKPOINTS, replicas=300, base_seed=0,
                             n_jobs=1):
    """Relative error of GPOMDP/GARB against the exact gradient, over time.

    Returns one :class:`SweepRecord` per algorithm, discount factor and
    checkpoint.
    """
    mdp = _as_mdp(env)
    algorithms = tuple(algorithms)
    for a in algorithms:
        if a not in ESTIMATOR_BASELINES:
            raise ValueError(f"unknown estimator {a!r}; choose from {sorted(ESTIMATOR_BASELINES)}")
    gammas = tuple(check_gamma(g) for g in gammas)
    checkpoints = np.array(sorted({check_positive_int(int(c), "checkpoint") for c in checkpoints}))
    replicas = check_positive_int(replicas, "replicas", minimum=2)
    truth = evaluate(mdp, policy)
    if np.linalg.norm(truth.gradient) == 0:
        raise ValueError("exact gradient is zero; relative error undefined")

    job = _BiasVarianceReplica(mdp, policy, truth.stationary, truth.gradient,
                               algorithms, gammas, checkpoints, base_seed)
    mean, std = _summaries(_map_replicas(job, replicas, n_jobs))
    return [SweepRecord(algo, gamma, "none" if algo == "gpomdp" else "adaptive", int(t),
                        replicas, float(mean[i, j, c]), float(std[i, j, c]))
            for i, algo in enumerate(algorithms)
            for j, gamma in enumerate(gammas)
            for c, t in enumerate(checkpoints)]


def replica_estimates(env, policy, gamma, steps, replicas, base_seed=0, algorithm="gpomdp",
                      n_jobs=1):
    """Final gradient estimate of each replica, shape (replicas, dim)."""
    mdp = _as_mdp(env)
    gamma = check_gamma(gamma)
    steps = check_positive_int(steps, "steps")
    stationary = stationary_distribution(mdp, policy)

    def one(k):
        traj = _stationary_trajectory(mdp, policy, stationary, steps, base_seed, k)
        return running_estimates(traj.rewards, traj.scores, gamma, ESTIMATOR_BASELINES[algorithm])

    return np.array(_map_replicas(one, check_positive_int(replicas, "replicas"), n_jobs))


class _SweepReplica:
    def __init__(self, mdp, policy, stationary, gradient, gammas, baselines, steps, seed):
        self.__dict__.update(locals())
        del self.__dict__["self"]

    def __call__(self, k):
        traj = _stationary_trajectory(self.mdp, self.policy, self.stationary,
                                      self.steps, self.seed, k)
        out = np.empty((len(self.gammas), len(self.baselines)))
        for j, gamma in enumerate(self.gammas):
            z = discounted_traces(traj.scores, gamma)
            # G(b) = G(0) - b * mean(Z): one simulation serves the whole grid
            g0 = traj.rewards @ z / self.steps
            zbar = z.mean(axis=0)
            g = g0[None, :] - self.baselines[:, None] * zbar[None, :]
            out[j] = np.linalg.norm(g - self.gradient, axis=1)
        return out / np.linalg.norm(self.gradient)


def baseline_sweep(env, policy, gammas=DEFAULT_SWEEP_GAMMAS, b_grid=DEFAULT_B_GRID, steps=100,
                   replicas=300, base_seed=0, n_jobs=1):
    """Relative error of GPOMDP with constant baselines ``b = ratio * r_bar``.

    ``b_grid`` holds the ratios ``b / r_bar``; records report the ratio.
    """
    mdp = _as_mdp(env)
    gammas = tuple(check_gamma(g) for g in gammas)
    ratios = np.asarray(b_grid, dtype=float)
    if ratios.ndim != 1 or ratios.size == 0 or not np.all(np.isfinite(ratios)):
        raise ValueError("b grid must be a non-empty list of finite ratios")
    steps = check_positive_int(steps, "steps")
    replicas = check_positive_int(replicas, "replicas", minimum=2)
    truth = evaluate(mdp, policy)
    if np.linalg.norm(truth.gradient) == 0:
        raise ValueError("exact gradient is zero; relative error undefined")

    job = _SweepReplica(mdp, policy, truth.stationary, truth.gradient, gammas,
                        ratios * truth.average_reward, steps, base_seed)
    mean, std = _summaries(_map_replicas(job, replicas, n_jobs))
    return [SweepRecord("gpomdp", gamma, float(ratio), steps, replicas,
                        float(mean[j, i]), float(std[j, i]))
            for j, gamma in enumerate(gammas) for i, ratio in enumerate(ratios)]


def sweep_minimizers(records):
    """Map each gamma to the ``b / r_bar`` with the smallest error std.

    Ties go to the earliest grid point.
    """
    best = {}
    for rec in records:
        if isinstance(rec.baseline, str):
            continue
        if rec.gamma not in best or rec.std_error < best[rec.gamma].std_error:
            best[rec.gamma] = rec
    return {g: r.baseline for g, r in best.items()}


def _uniform_theta(rng, shape, theta_init):
    return rng.uniform(-theta_init, theta_init, size=shape)


def _train_online_one(env, algorithm, alpha, gamma, steps, window, theta_init, seed):
    learner = ONLINE_LEARNERS[algorithm](alpha=alpha, gamma=gamma, n_steps=steps,
                                         window=window, theta_init=theta_init,
                                         random_state=seed).fit(env)
    if learner.diverged_:
        log.warning("%s seed %d diverged after %d steps", algorithm, seed,
                    learner.curve_[-1][0] if learner.curve_ else 0)
    pts = np.array(learner.curve_, dtype=float).reshape(-1, 2)
    return TrainingCurve(algorithm, seed, pts[:, 0].astype(np.int64), pts[:, 1],
                         learner.diverged_, learner.theta_)


def train_online(env, algorithm="olgarb", alpha=0.01, gamma=0.99, steps=2_000_000,
                 seeds=range(20), theta_init=0.5, window=10_000, n_jobs=1):
    """Run OLPOMDP or OLGARB once per seed and record windowed reward curves.

    Initial parameters are uniform on ``[-theta_init, theta_init]``. Runs
    whose parameters become non-finite are returned with ``diverged=True``.
    """
    if algorithm not in ONLINE_LEARNERS:
        raise ValueError(f"unknown online learner {algorithm!r}; choose from {sorted(ONLINE_LEARNERS)}")
    check_step_size(alpha, allow_zero=True)
    seeds = [int(s) for s in seeds]
    return _map_seeds(_train_online_one, seeds, n_jobs,
                      env, algorithm, alpha, check_gamma(gamma),
                      check_positive_int(steps, "steps"), check_positive_int(window, "window"),
                      theta_init)


def _map_seeds(fn, seeds, n_jobs, *args):
    n_jobs = check_positive_int(n_jobs, "n_jobs")
    if n_jobs == 1 or len(seeds) <= 1:
        return [fn(*args, s) for s in seeds]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(*args, s) for s in seeds)


def kernel_estimate(env, theta, gamma, steps, rng, algorithm="gpomdp", state=None):
    """One GPOMDP/GARB estimate on any :mod:`pgbaseline.envs` environment.

    ``theta`` is the flat linear-softmax parameter vector. Returns
    ``(gradient, mean reward, final state)``.
    """
    shape = (env.n_actions, env.n_features)
    theta = np.asarray(theta, dtype=float).reshape(shape)
    state = env.initial_state(rng) if state is None else state
    trace, total, baseline = np.zeros(shape), np.zeros(shape), np.zeros(2)
    rewards = np.empty(steps)
    u = rng.random((steps, 1 + env.n_uniforms))
    state = _kernels.estimate_chunk(env.step_fn, env.feature_fn, env.params, state, theta,
                                    trace, total, baseline, gamma, algorithm == "garb",
                                    u, rewards)
    return (total / steps).ravel(), float(rewards.mean()), state


def _train_batch_one(env, estimator, alpha, gamma, steps_per_estimate, iterations,
                     theta_init, seed):
    rng = check_random_state(seed)
    theta = _uniform_theta(rng, env.n_actions * env.n_features, theta_init)
    state = env.initial_state(rng)
    steps, means, noops, diverged = [], [], 0, False
    for it in range(iterations):
        # each estimate starts a fresh trace and, for GARB, a fresh average
        g, mean_reward, state = kernel_estimate(env, theta, gamma, steps_per_estimate, rng,
                                                estimator, state)
        norm = np.linalg.norm(g)
        if not np.isfinite(norm):
            log.warning("%s seed %d: non-finite gradient at iteration %d", estimator, seed, it)
            diverged = True
            break
        steps.append((it + 1) * steps_per_estimate)
        means.append(mean_reward)
        if norm == 0.0:
            noops += 1
            log.info("%s seed %d: zero gradient at iteration %d, parameters unchanged",
                     estimator, seed, it)
            continue
        theta = theta + alpha * g / norm
    return TrainingCurve(estimator, seed, steps, means, diverged, theta, noops)


def train_batch_ascent(env, estimator="garb", alpha=0.1, gamma=0.95, steps_per_estimate=1000,
                       iterations=100, seeds=range(10), theta_init=0.5, n_jobs=1):
    """Alternate a fresh GPOMDP/GARB estimate with ``theta += alpha G / ||G||``.

    A zero estimate leaves theta unchanged; the count of such iterations is
    kept in ``noop_iterations``. The curve records the mean reward observed
    during each estimate.
    """
    if estimator not in ESTIMATOR_BASELINES:
        raise ValueError(f"unknown estimator {estimator!r}; choose from {sorted(ESTIMATOR_BASELINES)}")
    check_step_size(alpha, allow_zero=True)
    iterations = check_positive_int(iterations, "iterations", minimum=0)
    return _map_seeds(_train_batch_one, [int(s) for s in seeds], n_jobs,
                      env, estimator, alpha, check_gamma(gamma),
                      check_positive_int(steps_per_estimate, "steps_per_estimate"),
                      iterations, theta_init)


def aggregate_stats(curves):
    """Pointwise mean and sample std of aligned curves.

    Diverged runs are left out (with a warning). Returns ``(steps, mean, std)``.
    """
    curves = list(curves)
    kept = [c for c in curves if not c.diverged]
    if len(kept) < len(curves):
        log.warning("excluding %d diverged run(s) from the statistics", len(curves) - len(kept))
    if len(kept) < 2:
        raise ValueError("need at least two non-diverged curves")
    steps = kept[0].steps
    for c in kept[1:]:
        if not np.array_equal(c.steps, steps):
            raise ValueError(f"curve for seed {c.seed} is not aligned with seed {kept[0].seed}")
    values = np.stack([c.rewards for c in kept])
    return steps.copy(), values.mean(axis=0), values.std(axis=0, ddof=1)


SWEEP_HEADER = ["algorithm", "gamma", "baseline", "steps", "replicas",
                "mean_relative_error", "std_relative_error"]
CURVE_HEADER = ["algorithm", "seed", "step", "reward", "diverged"]


def write_sweep_csv(path, records, description="relative error of gradient estimates"):
    comment = (f"{description}; baseline is none, adaptive or b/r_bar; "
               "columns: " + ", ".join(SWEEP_HEADER))
    rows = [[r.algorithm, r.gamma, r.baseline, r.steps, r.replicas, r.mean_error, r.std_error]
            for r in records]
    return write_table(path, comment, SWEEP_HEADER, rows)


def read_sweep_csv(path):
    _, header, rows = read_table(path)
    if header != SWEEP_HEADER:
        raise SchemaError(f"{path}: not a sweep table (header {header})")

    def baseline(v):
        return v if v in ("none", "adaptive") else float(v)

    return [SweepRecord(a, float(g), baseline(b), int(t), int(n), float(m), float(s))
            for a, g, b, t, n, m, s in rows]


def write_curves_csv(path, curves, description="windowed average reward"):
    """One row per curve point; a diverged run with no points gets one NaN row."""
    comment = f"{description}; diverged=1 flags runs that blew up; columns: " + ", ".join(CURVE_HEADER)
    rows = []
    for c in curves:
        if len(c.steps) == 0:
            rows.append([c.algorithm, c.seed, 0, float("nan"), c.diverged])
        rows.extend([c.algorithm, c.seed, int(s), float(r), c.diverged]
                    for s, r in zip(c.steps, c.rewards))
    return write_table(path, comment, CURVE_HEADER, rows)


def read_curves_csv(path):
    _, header, rows = read_table(path)
    if header != CURVE_HEADER:
        raise SchemaError(f"{path}: not a training-curve table (header {header})")
    grouped = {}
    for algo, seed, step, reward, diverged in rows:
        key = (algo, int(seed))
        entry = grouped.setdefault(key, ([], [], diverged == "1"))
        if not (int(step) == 0 and reward.lower() == "nan"):
            entry[0].append(int(step))
            entry[1].append(float(reward))
    return [TrainingCurve(a, s, st, rw, dv) for (a, s), (st, rw, dv) in grouped.items()]
