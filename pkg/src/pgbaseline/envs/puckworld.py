"""Puckworld: push a damped puck towards a target on a bounded plane.

State vector layout: ``(px, py, vx, vy, tx, ty, timer)``. Every decision
applies a force of ``±FORCE`` along each axis for ``DT`` seconds. The
reward is minus the puck-target distance after the move. When the timer
reaches ``TELEPORT_PERIOD`` seconds the puck (at rest) and the target are
moved to fresh uniform positions.

Arena size, damping and teleport period are conventions of this package.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .base import Environment

ARENA = 50.0
DAMPING = 0.5
FORCE = 5.0
MASS = 1.0
DT = 0.1
TELEPORT_PERIOD = 30.0
# (fx sign, fy sign) for actions 0..3
FORCE_SIGNS = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
VELOCITY_SCALE = FORCE / (MASS * DAMPING)


@njit(cache=True)
def _axis(p, v, f, c, dt, arena):
    # closed-form solution of p'' = f - c p' over dt
    terminal = f / c
    decay = np.exp(-c * dt)
    p_new = p + terminal * dt + (v - terminal) * (1.0 - decay) / c
    v_new = terminal + (v - terminal) * decay
    if p_new < 0.0:
        p_new, v_new = 0.0, max(v_new, 0.0)
    elif p_new > arena:
        p_new, v_new = arena, min(v_new, 0.0)
    return p_new, v_new


@njit(cache=True)
def _step(state, action, u, params):
    arena, damping, force, mass, dt, period = (params[0], params[1], params[2],
                                               params[3], params[4], params[5])
    fx = FORCE_SIGNS[action, 0] * force / mass
    fy = FORCE_SIGNS[action, 1] * force / mass
    s = state.copy()
    s[0], s[2] = _axis(state[0], state[2], fx, damping, dt, arena)
    s[1], s[3] = _axis(state[1], state[3], fy, damping, dt, arena)
    reward = -np.hypot(s[0] - s[4], s[1] - s[5])
    s[6] = state[6] + dt
    if s[6] >= period - 1e-9:
        s[0], s[1] = u[0] * arena, u[1] * arena
        s[2], s[3] = 0.0, 0.0
        s[4], s[5] = u[2] * arena, u[3] * arena
        s[6] = 0.0
    return s, reward


@njit(cache=True)
def _features(state, params):
    arena, vscale = params[0], params[6]
    out = np.empty(5)
    out[0] = (state[4] - state[0]) / arena
    out[1] = (state[5] - state[1]) / arena
    out[2] = state[2] / vscale
    out[3] = state[3] / vscale
    out[4] = 1.0
    return out


def puck_step(state, action, u=(0.5, 0.5, 0.5, 0.5), *, params=None):
    """One decision step. Returns ``(new_state, reward)``.

    ``u`` holds the four uniforms used if the teleport timer expires.
    """
    params = Puckworld().params if params is None else params
    s = np.asarray(state, dtype=float)
    if s.shape != (7,) or not np.all(np.isfinite(s)):
        raise ValueError(f"invalid puck state {state!r}")
    return _step(s, int(action), np.asarray(u, dtype=float), params)


class Puckworld(Environment):
    """Four-action puck navigation task with linear-softmax features.

    Features are the target offset (scaled by the arena size), the puck
    velocity (scaled by the terminal speed under full force) and a bias.
    """

    name = "puckworld"
    n_actions = 4
    n_features = 5
    n_uniforms = 4
    step_fn = staticmethod(_step)
    feature_fn = staticmethod(_features)

    def __init__(self, arena=ARENA, damping=DAMPING, force=FORCE, mass=MASS, dt=DT,
                 teleport_period=TELEPORT_PERIOD):
        if min(arena, damping, force, mass, dt, teleport_period) <= 0:
            raise ValueError("puckworld constants must be positive")
        self.params = np.array([arena, damping, force, mass, dt, teleport_period,
                                force / (mass * damping)], dtype=float)

    def initial_state(self, rng):
        a = self.params[0]
        px, py, tx, ty = rng.random(4) * a
        return np.array([px, py, 0.0, 0.0, tx, ty, 0.0])
