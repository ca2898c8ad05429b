import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from sklearn.base import clone

from pgbaseline.envs import Acrobot, Puckworld, TwoArmedBandit, three_state_env
from pgbaseline.estimators import (GARB, GPOMDP, OLGARB, OLPOMDP, EstimatorConfig,
                                   EstimatorState, constant_baseline_estimate,
                                   discounted_traces, garb_update, gpomdp_update,
                                   olgarb_step, olpomdp_step, running_estimates)
from pgbaseline.experiments import kernel_estimate
from pgbaseline.mdp import Trajectory, sample_trajectory


def _trajectory(three_state, length, seed):
    mdp, policy = three_state
    return sample_trajectory(mdp, policy, 0, length, np.random.default_rng(seed))


def test_gpomdp_two_steps_by_hand():
    state = EstimatorState.zeros(2)
    state = gpomdp_update(state, 2.0, [1.0, 0.0], 0.5)
    np.testing.assert_allclose(state.estimate, [2.0, 0.0])
    state = gpomdp_update(state, 1.0, [0.0, 1.0], 0.5)
    # Z_2 = (0.5, 1); G_2 = (2*(1,0) + 1*(0.5,1)) / 2
    np.testing.assert_allclose(state.trace, [0.5, 1.0])
    np.testing.assert_allclose(state.estimate, [1.25, 0.5])
    assert state.steps == 2


def test_gpomdp_constant_baseline_shifts_each_reward():
    s0 = EstimatorState.zeros(1)
    with_b = gpomdp_update(gpomdp_update(s0, 3.0, [1.0], 0.9, 1.0), 1.0, [-1.0], 0.9, 1.0)
    shifted = gpomdp_update(gpomdp_update(s0, 2.0, [1.0], 0.9), 0.0, [-1.0], 0.9)
    np.testing.assert_allclose(with_b.estimate, shifted.estimate)


def test_garb_updates_baseline_before_using_it():
    state = garb_update(EstimatorState.zeros(1), 4.0, [1.0], 0.9)
    assert state.baseline == 4.0
    np.testing.assert_array_equal(state.estimate, [0.0])
    state = garb_update(state, 2.0, [1.0], 0.9)
    assert state.baseline == 3.0
    # Z_2 = 1.9, (R_2 - B_2) = -1, G_2 = (0 + -1.9) / 2
    np.testing.assert_allclose(state.estimate, [-0.95])


def test_garb_replay_with_frozen_baselines_matches(three_state):
    traj = _trajectory(three_state, 300, 0)
    adaptive, frozen = EstimatorState.zeros(6), EstimatorState.zeros(6)
    for step in traj:
        adaptive = garb_update(adaptive, step.reward, step.score, 0.8)
        frozen = garb_update(frozen, step.reward, step.score, 0.8,
                             frozen_baseline=adaptive.baseline)
    np.testing.assert_allclose(frozen.estimate, adaptive.estimate, atol=1e-14)


def test_update_rejects_bad_inputs():
    state = EstimatorState.zeros(2)
    with pytest.raises(ValueError, match="shape"):
        gpomdp_update(state, 1.0, [1.0], 0.5)
    with pytest.raises(ValueError, match="finite"):
        garb_update(state, np.nan, [1.0, 0.0], 0.5)


def test_olgarb_first_step_leaves_theta_unchanged():
    theta, z, b, s = olgarb_step(np.ones(3), np.zeros(3), 0.0, 0, 5.0, [1.0, -1.0, 0.5],
                                 alpha=0.1, gamma=0.9)
    np.testing.assert_array_equal(theta, np.ones(3))
    assert (b, s) == (5.0, 1)
    theta, z, b, s = olgarb_step(theta, z, b, s, 7.0, [0.0, 1.0, 0.0], alpha=0.1, gamma=0.9)
    # B = 6, Z = (0.9, 0.1, 0.45), theta += 0.1 * 1 * Z
    np.testing.assert_allclose(theta, 1 + 0.1 * np.array([0.9, 0.1, 0.45]))


def test_olpomdp_step_and_divergence():
    theta, z = olpomdp_step([0.0, 0.0], [1.0, 0.0], 2.0, [0.0, 1.0], 0.5, 0.5)
    np.testing.assert_allclose(z, [0.5, 1.0])
    np.testing.assert_allclose(theta, [0.5, 1.0])
    with pytest.raises(FloatingPointError):
        olpomdp_step([0.0], [1e308], 1e308, [0.0], 10.0, 1.0 - 1e-16)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 60), st.sampled_from([0.0, 0.3, 0.9, 0.999]),
       st.one_of(st.floats(-3, 3), st.just("adaptive")), st.integers(0, 2**32 - 1))
def test_batch_path_equals_streaming_rules(length, gamma, baseline, seed):
    rng = np.random.default_rng(seed)
    rewards = rng.normal(size=length)
    scores = rng.normal(size=(length, 3))
    state = EstimatorState.zeros(3)
    for r, z in zip(rewards, scores):
        if baseline == "adaptive":
            state = garb_update(state, r, z, gamma)
        else:
            state = gpomdp_update(state, r, z, gamma, baseline)
    np.testing.assert_allclose(running_estimates(rewards, scores, gamma, baseline),
                               state.estimate, atol=1e-11)
    np.testing.assert_allclose(discounted_traces(scores, gamma)[-1], state.trace, atol=1e-11)


@settings(max_examples=30, deadline=None)
@given(arrays(float, (20, 2), elements=st.floats(-5, 5)), st.integers(1, 19),
       st.floats(0, 0.99))
def test_trace_continuation(scores, split, gamma):
    whole = discounted_traces(scores, gamma)
    head = discounted_traces(scores[:split], gamma)
    tail = discounted_traces(scores[split:], gamma, initial=head[-1])
    np.testing.assert_allclose(np.vstack([head, tail]), whole, atol=1e-12)


@pytest.mark.parametrize("make", [lambda: GPOMDP(0.9, baseline=0.3), lambda: GARB(0.9)])
def test_partial_fit_continues_a_run(three_state, make):
    traj = _trajectory(three_state, 1000, 3)
    whole = make().fit(traj)
    pieces = make().fit(traj[:400]).partial_fit(traj[400:700]).partial_fit(traj[700:])
    np.testing.assert_allclose(pieces.gradient_, whole.gradient_, atol=1e-13)
    np.testing.assert_allclose(pieces.trace_, whole.trace_, atol=1e-13)
    assert pieces.n_steps_ == 1000
    assert pieces.baseline_ == pytest.approx(whole.baseline_, abs=1e-14)


def test_refit_starts_from_scratch(three_state):
    traj = _trajectory(three_state, 200, 4)
    est = GARB(0.5).fit(traj)
    first = est.gradient_.copy()
    np.testing.assert_array_equal(est.fit(traj).gradient_, first)


def test_garb_estimator_matches_streaming(three_state):
    traj = _trajectory(three_state, 2000, 5)
    state = EstimatorState.zeros(6)
    for step in traj:
        state = garb_update(state, step.reward, step.score, 0.95)
    est = GARB(gamma=0.95).fit(traj)
    np.testing.assert_allclose(est.gradient_, state.estimate, atol=1e-12)
    assert est.baseline_ == pytest.approx(traj.rewards.mean())


def test_constant_baseline_estimate_matches_estimator(three_state):
    traj = _trajectory(three_state, 500, 6)
    np.testing.assert_allclose(constant_baseline_estimate(traj, 0.7, 0.9),
                               GPOMDP(0.9, baseline=0.7).fit(traj).gradient_)


def test_sklearn_parameter_protocol():
    est = GPOMDP(gamma=0.4, baseline=1.5)
    assert est.get_params() == {"gamma": 0.4, "baseline": 1.5}
    twin = clone(est).set_params(gamma=0.8)
    assert twin.gamma == 0.8 and est.gamma == 0.4
    assert OLGARB(alpha=0.02).get_params()["alpha"] == 0.02
    assert "GARB(gamma=0.3)" in repr(GARB(gamma=0.3))


def test_invalid_gamma_is_rejected_at_fit(three_state):
    traj = _trajectory(three_state, 10, 0)
    with pytest.raises(ValueError, match="gamma"):
        GPOMDP(gamma=1.0).fit(traj)
    with pytest.raises(ValueError):
        EstimatorConfig(gamma=0.5, baseline_mode="median")


def test_write_log_columns(tmp_path, three_state):
    traj = _trajectory(three_state, 50, 7)
    est = GARB(0.9).fit(traj)
    path = tmp_path / "log.csv"
    est.write_log(traj, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["step", "reward", "baseline"] + [f"G_{i}" for i in range(1, 7)]
    assert len(rows) == 51 and rows[1][0] == "1"
    np.testing.assert_array_equal(np.array(rows[-1][3:], dtype=float), est.gradient_)
    assert float(rows[-1][2]) == pytest.approx(traj.rewards.mean())


def _python_online(env, learner, seed, n_steps):
    """Plain-Python OLPOMDP/OLGARB consuming the same random stream as ``fit``."""
    rng = np.random.default_rng(seed)
    shape = (env.n_actions, env.n_features)
    theta = rng.uniform(-learner.theta_init, learner.theta_init, size=shape).ravel()
    state = env.initial_state(rng)
    u = rng.random((n_steps, 1 + env.n_uniforms))
    trace, b, s = np.zeros(theta.size), 0.0, 0
    rewards = []
    for t in range(n_steps):
        policy = env.policy(theta)
        a = policy.sample_action(state, u[t, 0])
        zeta = policy.score(state, a)
        state, r = env.step(state, a, u[t, 1:])
        rewards.append(r)
        if isinstance(learner, OLGARB):
            theta, trace, b, s = olgarb_step(theta, trace, b, s, r, zeta, learner.alpha,
                                             learner.gamma)
        else:
            theta, trace = olpomdp_step(theta, trace, r, zeta, learner.alpha, learner.gamma)
    return theta, np.mean(rewards), b


@pytest.mark.parametrize("env", [Acrobot(), Puckworld(), three_state_env(),
                                 TwoArmedBandit(0.3, (0.0, 1.0), (1.0, 2.0))],
                         ids=lambda e: e.name)
@pytest.mark.parametrize("cls", [OLPOMDP, OLGARB])
def test_compiled_learner_matches_python_reference(env, cls):
    learner = cls(alpha=0.05, gamma=0.9, n_steps=400, window=400, random_state=3).fit(env)
    theta, mean_reward, baseline = _python_online(env, learner, 3, 400)
    np.testing.assert_allclose(learner.theta_, theta, rtol=1e-9, atol=1e-12)
    assert learner.curve_ == [(400, pytest.approx(mean_reward, rel=1e-12))]
    if cls is OLGARB:
        assert learner.baseline_ == pytest.approx(baseline, rel=1e-12)


@pytest.mark.parametrize("algorithm", ["gpomdp", "garb"])
def test_compiled_estimate_matches_streaming_rules(algorithm):
    env = Puckworld()
    rng = np.random.default_rng(8)
    theta = rng.uniform(-0.5, 0.5, env.n_actions * env.n_features)
    g, mean_reward, _ = kernel_estimate(env, theta, 0.9, 300, np.random.default_rng(1), algorithm)

    stream = np.random.default_rng(1)
    state_x = env.initial_state(stream)
    u = stream.random((300, 1 + env.n_uniforms))
    policy = env.policy(theta)
    est = EstimatorState.zeros(theta.size)
    for t in range(300):
        a = policy.sample_action(state_x, u[t, 0])
        zeta = policy.score(state_x, a)
        state_x, r = env.step(state_x, a, u[t, 1:])
        est = (garb_update(est, r, zeta, 0.9) if algorithm == "garb"
               else gpomdp_update(est, r, zeta, 0.9))
    np.testing.assert_allclose(g, est.estimate, rtol=1e-9, atol=1e-12)


def test_online_learner_is_deterministic_and_windowed():
    env = Acrobot()
    a = OLGARB(n_steps=25_000, window=10_000, random_state=4).fit(env)
    b = OLGARB(n_steps=25_000, window=10_000, random_state=4).fit(env)
    np.testing.assert_array_equal(a.theta_, b.theta_)
    assert [s for s, _ in a.curve_] == [10_000, 20_000, 25_000]
    assert a.curve_ == b.curve_ and not a.diverged_


def test_online_learner_flags_divergence():
    env = three_state_env(reward=(1e300, -1e300, 1e300))
    learner = OLPOMDP(alpha=1e10, gamma=0.9, n_steps=5000, window=1000,
                      random_state=0).fit(env)
    assert learner.diverged_
    assert len(learner.curve_) < 5


def test_zero_step_size_keeps_initial_theta():
    env = Acrobot()
    theta0 = np.linspace(-0.5, 0.5, 12)
    learner = OLPOMDP(alpha=0.0, n_steps=1000, window=500, random_state=1).fit(env, theta0)
    np.testing.assert_array_equal(learner.theta_, theta0)


def test_single_step_bandit_estimate_is_reinforce():
    bandit = TwoArmedBandit(0.3, 0.0, 1.0)
    policy = bandit.tabular_policy()
    rng = np.random.default_rng(0)
    for _ in range(5):
        a, r, zeta = bandit.sample(policy, rng)
        traj = Trajectory([0], [a], [r], [zeta])
        g = GPOMDP(gamma=0.0, baseline=0.4).fit(traj).gradient_
        np.testing.assert_array_equal(g, (r - 0.4) * zeta)
