"""Two-link acrobot with torque at the elbow (Sutton & Barto formulation).

Angles are measured from the downward vertical for link 1 and relative to
link 1 for link 2, so the hanging rest state is all zeros. The simulation
runs continuously; there is no terminal state.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import Environment

LINK_LENGTH_1 = 1.0
LINK_LENGTH_2 = 1.0
LINK_MASS_1 = 1.0
LINK_MASS_2 = 1.0
LINK_COM_1 = 0.5
LINK_COM_2 = 0.5
LINK_MOI = 1.0
GRAVITY = 9.8
MAX_VEL_1 = 4 * np.pi
MAX_VEL_2 = 9 * np.pi
TORQUES = np.array([-1.0, 0.0, 1.0])
ACTION_INTERVAL = 0.1
DT_SIM = 0.02

# |q1|, |q1dot|, |q2|, |q2dot| divided by their ranges, keeping features in [0, 1]
FEATURE_SCALE = np.array([1 / np.pi, 1 / MAX_VEL_1, 1 / np.pi, 1 / MAX_VEL_2])


@njit(cache=True)
def _derivs(s, torque):
    q1, q2, dq1, dq2 = s[0], s[1], s[2], s[3]
    m1, m2, l1 = LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1
    lc1, lc2, I1, I2, g = LINK_COM_1, LINK_COM_2, LINK_MOI, LINK_MOI, GRAVITY
    d1 = m1 * lc1 ** 2 + m2 * (l1 ** 2 + lc2 ** 2 + 2 * l1 * lc2 * np.cos(q2)) + I1 + I2
    d2 = m2 * (lc2 ** 2 + l1 * lc2 * np.cos(q2)) + I2
    phi2 = m2 * lc2 * g * np.sin(q1 + q2)
    phi1 = (-m2 * l1 * lc2 * dq2 ** 2 * np.sin(q2)
            - 2 * m2 * l1 * lc2 * dq2 * dq1 * np.sin(q2)
            + (m1 * lc1 + m2 * l1) * g * np.sin(q1) + phi2)
    ddq2 = ((torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dq1 ** 2 * np.sin(q2) - phi2)
            / (m2 * lc2 ** 2 + I2 - d2 ** 2 / d1))
    ddq1 = -(d2 * ddq2 + phi1) / d1
    out = np.empty(4)
    out[0] = dq1
    out[1] = dq2
    out[2] = ddq1
    out[3] = ddq2
    return out


@njit(cache=True)
def wrap_angle(x):
    """Map an angle into (-pi, pi]."""
    return np.pi - np.mod(np.pi - x, 2 * np.pi)


@njit(cache=True)
def integrate(state, torque, duration, dt_sim):
    """RK4 integration without wrapping or clamping."""
    s = state.copy()
    n = int(round(duration / dt_sim))
    for _ in range(n):
        k1 = _derivs(s, torque)
        k2 = _derivs(s + 0.5 * dt_sim * k1, torque)
        k3 = _derivs(s + 0.5 * dt_sim * k2, torque)
        k4 = _derivs(s + dt_sim * k3, torque)
        s = s + dt_sim / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return s


@njit(cache=True)
def _step(state, torque, dt_sim):
    s = integrate(state, torque, ACTION_INTERVAL, dt_sim)
    s[0] = wrap_angle(s[0])
    s[1] = wrap_angle(s[1])
    s[2] = min(max(s[2], -MAX_VEL_1), MAX_VEL_1)
    s[3] = min(max(s[3], -MAX_VEL_2), MAX_VEL_2)
    return s


def acrobot_step(state, torque, dt_sim=DT_SIM):
    """Advance one 0.1 s action interval with constant ``torque``.

    ``state`` is ``(q1, q2, q1dot, q2dot)``. Angles are wrapped to
    (-pi, pi] and velocities clamped after the interval.
    """
    s = np.asarray(state, dtype=float)
    if s.shape != (4,) or not np.all(np.isfinite(s)):
        raise ValueError(f"invalid acrobot state {state!r}")
    out = _step(s, float(torque), float(dt_sim))
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("acrobot integration produced a non-finite state")
    return out


@njit(cache=True)
def acrobot_reward(state):
    """Height of the tip above its lowest position, in [0, 4]."""
    return 2.0 - np.cos(state[0]) - np.cos(state[0] + state[1])


@njit(cache=True)
def acrobot_features(state):
    """``(|q1|, |q1dot|, |q2|, |q2dot|)``."""
    out = np.empty(4)
    out[0] = abs(state[0])
    out[1] = abs(state[2])
    out[2] = abs(state[1])
    out[3] = abs(state[3])
    return out


def acrobot_energy(state):
    """Total mechanical energy, zero at the hanging rest state."""
    q1, q2, dq1, dq2 = np.asarray(state, dtype=float)
    m1, m2, l1, lc1, lc2 = LINK_MASS_1, LINK_MASS_2, LINK_LENGTH_1, LINK_COM_1, LINK_COM_2
    d11 = m1 * lc1 ** 2 + m2 * (l1 ** 2 + lc2 ** 2 + 2 * l1 * lc2 * np.cos(q2)) + 2 * LINK_MOI
    d12 = m2 * (lc2 ** 2 + l1 * lc2 * np.cos(q2)) + LINK_MOI
    d22 = m2 * lc2 ** 2 + LINK_MOI
    kinetic = 0.5 * d11 * dq1 ** 2 + d12 * dq1 * dq2 + 0.5 * d22 * dq2 ** 2
    potential = GRAVITY * ((m1 * lc1 + m2 * l1) * (1 - np.cos(q1)) + m2 * lc2 * (1 - np.cos(q1 + q2)))
    return kinetic + potential


# params: [torque scale, dt_sim, 4 feature scales]
@njit(cache=True)
def _kernel_step(state, action, u, params):
    s = _step(state, (action - 1) * params[0], params[1])
    return s, acrobot_reward(s)


@njit(cache=True)
def _kernel_features(state, params):
    return acrobot_features(state) * params[2:6]


class Acrobot(Environment):
    """Acrobot swing-up as a continuing task with three torque levels.

    Actions 0, 1, 2 apply torques ``-torque, 0, +torque``. The policy
    features are the absolute joint angles and velocities multiplied by
    ``feature_scale`` (by default, divided by their ranges).
    """

    name = "acrobot"
    n_actions = 3
    n_features = 4
    n_uniforms = 0
    step_fn = staticmethod(_kernel_step)
    feature_fn = staticmethod(_kernel_features)

    def __init__(self, torque=1.0, dt_sim=DT_SIM, feature_scale=None):
        scale = FEATURE_SCALE if feature_scale is None else np.asarray(feature_scale, dtype=float)
        if scale.shape != (4,):
            raise ValueError("feature_scale needs 4 entries")
        if dt_sim <= 0 or abs(ACTION_INTERVAL / dt_sim - round(ACTION_INTERVAL / dt_sim)) > 1e-9:
            raise ValueError("dt_sim must divide the 0.1 s action interval")
        self.torque = float(torque)
        self.dt_sim = float(dt_sim)
        self.params = np.concatenate([[self.torque, self.dt_sim], scale])

    def initial_state(self, rng=None):
        return np.zeros(4)
