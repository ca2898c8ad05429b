"""Command-line interface: ``pgbaseline <command> [--config FILE] [flags]``.

Each command reads an optional JSON config and lets flags override its
scalar fields. Exit status is 0 on success, 1 on a runtime failure and 2 on
an invalid configuration or input file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from ._validation import replica_rng
from .csvio import SchemaError
from .envs import ENVIRONMENTS, TabularEnv, TwoArmedBandit, default_three_state, make_env
from .estimators import GARB, GPOMDP
from .mdp import TabularMdp, TabularSoftmaxPolicy, sample_trajectory
from .oracle import OracleError, evaluate, oracle_report, relative_error
from .svg import plot_csv

log = logging.getLogger("pgbaseline")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

DEFAULTS = {
    "estimate": {"env": "three-state", "algo": ["gpomdp"], "gamma": [0.99], "steps": 100_000,
                 "seed": 1, "out": "estimate.json"},
    "sweep": {"env": "three-state", "gamma": list(ex.DEFAULT_SWEEP_GAMMAS),
              "b_grid": list(ex.DEFAULT_B_GRID), "steps": 100, "replicas": 300, "seed": 0,
              "out": "sweep.csv"},
    "bias-variance": {"env": "three-state", "algo": ["gpomdp", "garb"], "gamma": [0.4, 0.99],
                      "checkpoints": list(ex.DEFAULT_CHECKPOINTS), "replicas": 300, "seed": 0,
                      "out": "bias_variance.csv"},
    "train": {"env": "acrobot", "algo": ["olgarb"], "gamma": [0.99], "alpha": 0.01,
              "steps": 2_000_000, "replicas": 20, "seed": 0, "window": 10_000,
              "theta_init": 0.5, "steps_per_estimate": 1000, "out": "train.csv"},
    "oracle": {"env": "three-state", "gamma": [], "out": "oracle.json"},
}
COMMON = {"env_params": {}, "jobs": 1, "theta": None, "horizon": None, "mdp": None}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field."""


def _list(value, cast):
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    elif not isinstance(value, (list, tuple)):
        value = [value]
    return [cast(v) for v in value]


def load_config(command, args):
    cfg = dict(COMMON)
    cfg.update(DEFAULTS.get(command, {}))
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"config: cannot read {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config: top level must be a JSON object")
        unknown = sorted(set(doc) - set(cfg) - {"kind"})
        if unknown:
            raise ConfigError(f"{unknown[0]}: unknown config field")
        cfg.update(doc)
    for name in ("env", "gamma", "steps", "replicas", "seed", "algo", "out", "jobs", "alpha"):
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    return _validated(cfg)


def _validated(cfg):
    def field(name, cast):
        try:
            return cast(cfg[name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name}: invalid value {cfg[name]!r} ({exc})") from None

    if cfg.get("mdp") is None and cfg["env"] not in ENVIRONMENTS:
        raise ConfigError(f"env: unknown environment {cfg['env']!r}; "
                          f"choose from {', '.join(sorted(ENVIRONMENTS))}")
    if not isinstance(cfg["env_params"], dict):
        raise ConfigError("env_params: must be a JSON object")
    cfg["gamma"] = field("gamma", lambda v: _list(v, float))
    for g in cfg["gamma"]:
        if not 0.0 <= g < 1.0:
            raise ConfigError(f"gamma: {g} is outside [0, 1)")
    if "algo" in cfg:
        cfg["algo"] = field("algo", lambda v: _list(v, str))
    for name in ("steps", "replicas", "jobs", "window", "steps_per_estimate"):
        if name in cfg:
            cfg[name] = field(name, int)
            if cfg[name] < 1:
                raise ConfigError(f"{name}: must be >= 1, got {cfg[name]}")
    if "seed" in cfg:
        cfg["seed"] = field("seed", int)
        if cfg["seed"] < 0:
            raise ConfigError("seed: must be non-negative")
    for name in ("alpha", "theta_init"):
        if name in cfg:
            cfg[name] = field(name, float)
            if cfg[name] < 0:
                raise ConfigError(f"{name}: must be >= 0")
    if "b_grid" in cfg:
        cfg["b_grid"] = field("b_grid", lambda v: _list(v, float))
        if not cfg["b_grid"]:
            raise ConfigError("b_grid: must not be empty")
    if "checkpoints" in cfg:
        cfg["checkpoints"] = field("checkpoints", lambda v: _list(v, int))
    if cfg["horizon"] is not None:
        cfg["horizon"] = field("horizon", int)
    return cfg


def _environment(cfg):
    try:
        if cfg.get("mdp"):
            return TabularEnv(TabularMdp.from_json(cfg["mdp"]), name="mdp")
        return make_env(cfg["env"], **cfg["env_params"])
    except TypeError as exc:
        raise ConfigError(f"env_params: {exc}") from None
    except (OSError, KeyError, ValueError) as exc:
        field = "mdp" if cfg.get("mdp") else "env_params"
        raise ConfigError(f"{field}: {exc}") from None


def _tabular(cfg):
    """``(mdp, policy)`` for commands that need the exact oracle."""
    env = _environment(cfg)
    if not isinstance(env, TabularEnv):
        raise ConfigError(f"env: {cfg['env']!r} has no exact oracle; use a tabular environment")
    if env.name == "three-state" and not cfg["env_params"]:
        mdp, policy = default_three_state()
    else:
        mdp, policy = env.mdp, TabularSoftmaxPolicy(env.mdp.n_states, env.mdp.n_actions)
    if cfg["theta"] is not None:
        try:
            policy = policy.with_theta(cfg["theta"])
        except ValueError as exc:
            raise ConfigError(f"theta: {exc}") from None
    return mdp, policy


def _write_json(path, doc):
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text)


def _one(cfg, name, allowed):
    values = cfg[name]
    if len(values) != 1:
        raise ConfigError(f"{name}: this command takes exactly one value, got {values}")
    if allowed is not None and values[0] not in allowed:
        raise ConfigError(f"{name}: unknown value {values[0]!r}; choose from {sorted(allowed)}")
    return values[0]


def cmd_estimate(cfg):
    algo = _one(cfg, "algo", ex.ESTIMATOR_BASELINES)
    gamma = _one(cfg, "gamma", None)
    steps, seed = cfg["steps"], cfg["seed"]
    env = _environment(cfg)
    settings = {"env": cfg["env"], "algo": algo, "gamma": gamma, "steps": steps, "seed": seed}
    if isinstance(env, TabularEnv):
        mdp, policy = _tabular(cfg)
        truth = evaluate(mdp, policy)
        rng = replica_rng(seed, 0)
        start = rng.choice(mdp.n_states, p=truth.stationary)
        traj = sample_trajectory(mdp, policy, start, steps, rng)
        est = (GARB(gamma) if algo == "garb" else GPOMDP(gamma)).fit(traj)
        gradient, true_gradient = est.gradient_, truth.gradient
        mean_reward = float(traj.rewards.mean())
    else:
        if isinstance(env, TwoArmedBandit):
            theta = env.initial_theta() if cfg["theta"] is None else np.asarray(cfg["theta"], float)
            true_gradient = env.gradient(theta)
        else:
            theta = np.zeros(env.n_actions * env.n_features) if cfg["theta"] is None \
                else np.asarray(cfg["theta"], float)
            true_gradient = None
        if theta.shape != (env.n_actions * env.n_features,):
            raise ConfigError(f"theta: expected {env.n_actions * env.n_features} entries")
        gradient, mean_reward, _ = ex.kernel_estimate(env, theta, gamma, steps,
                                                      replica_rng(seed, 0), algo)
    doc = {"gradient": np.asarray(gradient).tolist(), "mean_reward": mean_reward,
           "true_gradient": None, "relative_error": None, "settings": settings}
    if true_gradient is not None and np.linalg.norm(true_gradient) > 0:
        doc["true_gradient"] = np.asarray(true_gradient).tolist()
        doc["relative_error"] = relative_error(gradient, true_gradient)
    _write_json(cfg["out"], doc)
    return EXIT_OK


def _need_replicas(cfg):
    if cfg["replicas"] < 2:
        raise ConfigError(f"replicas: statistics need at least 2, got {cfg['replicas']}")


def cmd_sweep(cfg):
    _need_replicas(cfg)
    mdp, policy = _tabular(cfg)
    records = ex.baseline_sweep(mdp, policy, cfg["gamma"], cfg["b_grid"], cfg["steps"],
                                cfg["replicas"], cfg["seed"], cfg["jobs"])
    ex.write_sweep_csv(cfg["out"], records, "constant-baseline sweep of GPOMDP relative error")
    for gamma, ratio in ex.sweep_minimizers(records).items():
        log.info("gamma=%g: lowest-variance b/r_bar = %g", gamma, ratio)
    return EXIT_OK


def cmd_bias_variance(cfg):
    _need_replicas(cfg)
    mdp, policy = _tabular(cfg)
    for a in cfg["algo"]:
        if a not in ex.ESTIMATOR_BASELINES:
            raise ConfigError(f"algo: unknown estimator {a!r}")
    records = ex.bias_variance_experiment(mdp, policy, cfg["algo"], cfg["gamma"],
                                          cfg["checkpoints"], cfg["replicas"], cfg["seed"],
                                          cfg["jobs"])
    ex.write_sweep_csv(cfg["out"], records, "relative error against t")
    return EXIT_OK


def cmd_train(cfg):
    gamma = _one(cfg, "gamma", None)
    allowed = set(ex.ONLINE_LEARNERS) | set(ex.ESTIMATOR_BASELINES)
    for a in cfg["algo"]:
        if a not in allowed:
            raise ConfigError(f"algo: unknown learner {a!r}; choose from {sorted(allowed)}")
    env = _environment(cfg)
    seeds = range(cfg["seed"], cfg["seed"] + cfg["replicas"])
    curves = []
    for algo in cfg["algo"]:
        if algo in ex.ONLINE_LEARNERS:
            curves += ex.train_online(env, algo, cfg["alpha"], gamma, cfg["steps"], seeds,
                                      cfg["theta_init"], cfg["window"], cfg["jobs"])
        else:
            iterations = max(cfg["steps"] // cfg["steps_per_estimate"], 0)
            curves += ex.train_batch_ascent(env, algo, cfg["alpha"], gamma,
                                            cfg["steps_per_estimate"], iterations, seeds,
                                            cfg["theta_init"], cfg["jobs"])
    ex.write_curves_csv(cfg["out"], curves, f"training on {cfg['env']}")
    diverged = sum(c.diverged for c in curves)
    if diverged:
        print(f"warning: {diverged} run(s) diverged and are flagged in {cfg['out']}",
              file=sys.stderr)
    return EXIT_OK


def cmd_oracle(cfg):
    mdp, policy = _tabular(cfg)
    gamma = cfg["gamma"][0] if cfg["gamma"] else None
    report = oracle_report(mdp, policy, gamma, cfg["horizon"])
    report["settings"]["env"] = cfg["env"] if not cfg.get("mdp") else cfg["mdp"]
    _write_json(cfg["out"], report)
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "sweep": cmd_sweep, "bias-variance": cmd_bias_variance,
            "train": cmd_train, "oracle": cmd_oracle}


def build_parser():
    parser = argparse.ArgumentParser(prog="pgbaseline",
                                     description="Policy-gradient estimators with reward baselines.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--env", help=f"one of {', '.join(sorted(ENVIRONMENTS))}")
        p.add_argument("--gamma", help="discount factor(s), comma separated")
        p.add_argument("--steps", help="trajectory or training length")
        p.add_argument("--replicas", help="independent runs (seeds for train)")
        p.add_argument("--seed", help="base seed")
        p.add_argument("--algo", help="algorithm(s), comma separated")
        p.add_argument("--alpha", help="step size")
        p.add_argument("--out", help="output path")
        p.add_argument("--jobs", help="worker processes (output does not depend on it)")
    p = sub.add_parser("plot")
    p.add_argument("csv", help="CSV written by sweep, bias-variance or train")
    p.add_argument("--out", help="SVG path (default: CSV path with .svg)")
    p.add_argument("--title")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            out = args.out or str(Path(args.csv).with_suffix(".svg"))
            plot_csv(args.csv, out, args.title)
            return EXIT_OK
        cfg = load_config(args.command, args)
        cfg["kind"] = args.command
        return COMMANDS[args.command](cfg)
    except (ConfigError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OracleError, ValueError, FloatingPointError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
