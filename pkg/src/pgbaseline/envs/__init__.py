"""Environments selectable by name: ``three-state``, ``bandit``, ``acrobot``, ``puckworld``."""

from .acrobot import (Acrobot, acrobot_energy, acrobot_features, acrobot_reward,
                      acrobot_step)
from .bandit import TwoArmedBandit
from .base import Environment
from .puckworld import Puckworld, puck_step
from .tabular import TabularEnv, default_three_state, line_mdp, three_state_env

ENVIRONMENTS = {
    "three-state": three_state_env,
    "bandit": TwoArmedBandit,
    "acrobot": Acrobot,
    "puckworld": Puckworld,
}


def make_env(name, **overrides):
    """Build an environment by name, passing ``overrides`` to its constructor."""
    try:
        factory = ENVIRONMENTS[name]
    except KeyError:
        raise ValueError(
            f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
    return factory(**overrides)


def bandit(mu0, r0_dist, r1_dist):
    return TwoArmedBandit(mu0, r0_dist, r1_dist)


__all__ = [
    "Acrobot", "ENVIRONMENTS", "Environment", "Puckworld", "TabularEnv", "TwoArmedBandit",
    "acrobot_energy", "acrobot_features", "acrobot_reward", "acrobot_step", "bandit",
    "default_three_state", "line_mdp", "make_env", "puck_step", "three_state_env",
]
