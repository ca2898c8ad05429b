"""Compiled inner loops.

Every kernel here has a plain-Python counterpart elsewhere in the package
(``sample_trajectory``'s generic branch, ``olgarb_step``, ``garb_update``) and the test suite
checks that both produce the same numbers from the same uniform draws.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def inverse_cdf(cdf, u):
    n = cdf.shape[0]
    for k in range(n):
        if u < cdf[k]:
            return k
    return n - 1


@njit(cache=True)
def sample_tabular_chain(policy_cdf, transition_cdf, start, uniforms):
    """Sample states and actions of a tabular MDP under a fixed policy.

    ``uniforms[t, 0]`` picks the action at step t and ``uniforms[t, 1]`` the
    successor state.
    """
    T = uniforms.shape[0]
    states = np.empty(T + 1, np.int64)
    actions = np.empty(T, np.int64)
    states[0] = start
    for t in range(T):
        x = states[t]
        a = inverse_cdf(policy_cdf[x], uniforms[t, 0])
        actions[t] = a
        states[t + 1] = inverse_cdf(transition_cdf[x, a], uniforms[t, 1])
    return states, actions


@njit(cache=True)
def softmax_action(theta, f, u, probs):
    """Fill ``probs`` with the linear-softmax distribution and draw an action."""
    n_actions, n_features = theta.shape
    m = -np.inf
    for a in range(n_actions):
        s = 0.0
        for i in range(n_features):
            s += theta[a, i] * f[i]
        probs[a] = s
        if s > m:
            m = s
    total = 0.0
    for a in range(n_actions):
        probs[a] = np.exp(probs[a] - m)
        total += probs[a]
    for a in range(n_actions):
        probs[a] /= total
    cum = 0.0
    for a in range(n_actions):
        cum += probs[a]
        if u < cum:
            return a
    return n_actions - 1


@njit(cache=True)
def online_chunk(step_fn, feature_fn, params, state, theta, trace, baseline,
                 alpha, gamma, use_baseline, uniforms, rewards):
    """Run OLPOMDP/OLGARB for ``uniforms.shape[0]`` steps, in place.

    ``theta`` and ``trace`` have shape (n_actions, n_features) and represent
    a linear softmax policy whose action-a feature vector is the state feature
    vector placed in block a. ``baseline`` is a length-2 array holding
    (B, number of rewards seen). Column 0 of ``uniforms`` selects the action,
    the remaining columns are passed to ``step_fn``.

    Returns False as soon as theta stops being finite.
    """
    n_actions, n_features = theta.shape
    probs = np.empty(n_actions)
    for t in range(uniforms.shape[0]):
        f = feature_fn(state, params)
        action = softmax_action(theta, f, uniforms[t, 0], probs)
        state, r = step_fn(state, action, uniforms[t, 1:], params)
        rewards[t] = r

        # B first, then Z, then theta: the listed OLGARB order
        if use_baseline:
            baseline[1] += 1.0
            baseline[0] += (r - baseline[0]) / baseline[1]
        adv = r - baseline[0] if use_baseline else r
        finite = True
        for a in range(n_actions):
            ind = 1.0 if a == action else 0.0
            for i in range(n_features):
                trace[a, i] = gamma * trace[a, i] + (ind - probs[a]) * f[i]
                theta[a, i] += alpha * adv * trace[a, i]
                if not np.isfinite(theta[a, i]):
                    finite = False
        if not finite:
            return state, False
    return state, True


@njit(cache=True)
def estimate_chunk(step_fn, feature_fn, params, state, theta, trace, total, baseline,
                   gamma, use_baseline, uniforms, rewards):
    """GPOMDP/GARB under a fixed linear-softmax policy, in place.

    ``total`` accumulates ``sum_s (R_s - B_s) Z_s`` (divide by the step count
    for G). Layout of the other arguments matches :func:`online_chunk`.
    """
    n_actions, n_features = theta.shape
    probs = np.empty(n_actions)
    for t in range(uniforms.shape[0]):
        f = feature_fn(state, params)
        action = softmax_action(theta, f, uniforms[t, 0], probs)
        state, r = step_fn(state, action, uniforms[t, 1:], params)
        rewards[t] = r
        if use_baseline:
            baseline[1] += 1.0
            baseline[0] += (r - baseline[0]) / baseline[1]
        adv = r - baseline[0] if use_baseline else r
        for a in range(n_actions):
            ind = 1.0 if a == action else 0.0
            for i in range(n_features):
                trace[a, i] = gamma * trace[a, i] + (ind - probs[a]) * f[i]
                total[a, i] += adv * trace[a, i]
    return state
