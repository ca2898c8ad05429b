"""Input validation helpers shared by the estimators, oracles and experiments."""

from __future__ import annotations

import numbers

import numpy as np


def check_gamma(gamma):
    """Return ``gamma`` as a float, raising if it is outside [0, 1)."""
    if not isinstance(gamma, numbers.Real) or not np.isfinite(gamma):
        raise ValueError(f"gamma must be a finite real number, got {gamma!r}")
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
    return float(gamma)


def check_step_size(alpha, *, allow_zero=False):
    if not isinstance(alpha, numbers.Real) or not np.isfinite(alpha):
        raise ValueError(f"step size must be a finite real number, got {alpha!r}")
    if alpha < 0 or (alpha == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"step size must be {bound}, got {alpha}")
    return float(alpha)


def check_vector(x, name, dim=None):
    """Coerce ``x`` to a finite 1-d float array, optionally of length ``dim``."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ValueError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_probability_vector(p, name="probabilities", atol=1e-12):
    p = check_vector(p, name)
    if np.any(p < -atol) or np.any(p > 1 + atol):
        raise ValueError(f"{name} has entries outside [0, 1]")
    if abs(p.sum() - 1.0) > atol * max(1, p.size):
        raise ValueError(f"{name} sums to {p.sum()!r}, not 1")
    return p


def check_positive_int(n, name, minimum=1):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise ValueError(f"{name} must be an integer, got {n!r}")
    if n < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {n}")
    return int(n)


def check_random_state(seed):
    """Turn ``seed`` into a :class:`numpy.random.Generator`.

    Accepts ``None``, an integer, a :class:`numpy.random.SeedSequence` or an
    existing generator (returned unchanged).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ValueError(f"cannot build a random generator from {seed!r}")


def replica_rng(base_seed, k):
    """Generator for replica ``k``; depends only on ``(base_seed, k)``."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(k)]))
