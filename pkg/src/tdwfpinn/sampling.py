"""Collocation sampling and the relative L2 error metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from tdwfpinn.problems import ProblemSpec

__all__ = [
    "T_FLOOR",
    "CollocationSet",
    "RadConfig",
    "l2_relative_error",
    "rad_probabilities",
    "rad_resample",
    "uniform_collocation",
]

# interior times are drawn from (T_FLOOR * T, T]
T_FLOOR = 1.0e-6


@dataclass(frozen=True)
class CollocationSet:
    """Interior ``(t, x)`` rows, boundary ``(t, x)`` rows and initial ``x`` values."""

    interior: np.ndarray
    boundary: np.ndarray
    initial: np.ndarray

    @property
    def counts(self) -> tuple[int, int, int]:
        return len(self.interior), len(self.boundary), len(self.initial)


@dataclass(frozen=True)
class RadConfig:
    power_k: float = 1.0
    offset_c: float = 1.0
    pool_factor: int = 10
    replace_fraction: float = 0.3

    def __post_init__(self) -> None:
        if self.power_k < 0 or self.offset_c < 0:
            raise ValueError("RAD exponent and offset must be non-negative")
        if self.pool_factor < 1:
            raise ValueError(f"pool factor must be at least 1, got {self.pool_factor}")
        if not 0.0 <= self.replace_fraction <= 1.0:
            raise ValueError(f"replace fraction must lie in [0, 1], got {self.replace_fraction}")


def _interior(problem: ProblemSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    t_lo = T_FLOOR * problem.T
    # 1 - U lies in (0, 1], so t lies in (t_lo, T]
    t = t_lo + (problem.T - t_lo) * (1.0 - rng.random(n))
    x = rng.uniform(problem.x_lo, problem.x_hi, n)
    return np.column_stack([t, x])


def uniform_collocation(
    problem: ProblemSpec, counts: tuple[int, int, int], seed: int | Sequence[int]
) -> CollocationSet:
    """Uniform interior, boundary and initial points, deterministic in *seed*."""
    n_in, n_bd, n_init = counts
    if min(counts) < 1:
        raise ValueError(f"collocation counts must be positive, got {counts}")
    rng = np.random.default_rng(seed)

    interior = _interior(problem, n_in, rng)
    t_bd = problem.T * (1.0 - rng.random(n_bd))
    x_bd = np.where(rng.random(n_bd) < 0.5, problem.x_lo, problem.x_hi)
    initial = rng.uniform(problem.x_lo, problem.x_hi, n_init)
    return CollocationSet(interior, np.column_stack([t_bd, x_bd]), initial)


def rad_probabilities(residual: np.ndarray, k: float, c: float) -> np.ndarray:
    """Selection probabilities ``eps**k / mean(eps**k) + c``, normalised.

    Falls back to uniform weights when every residual vanishes.
    """
    eps_k = np.abs(np.asarray(residual, dtype=np.float64)) ** k
    mean = eps_k.mean()
    if not np.isfinite(mean):
        raise FloatingPointError("non-finite residuals in RAD sampling")
    if mean == 0.0:
        return np.full(eps_k.size, 1.0 / eps_k.size)
    w = eps_k / mean + c
    return w / w.sum()


def rad_resample(
    residual_fn: Callable[[np.ndarray], np.ndarray],
    problem: ProblemSpec,
    cfg: RadConfig,
    current: CollocationSet,
    seed: int | Sequence[int],
) -> tuple[CollocationSet, np.ndarray]:
    """Replace a fraction of the interior points by residual-weighted draws.

    :arg residual_fn: maps ``(P, 2)`` candidate points to residual values.
    :returns: the new set and the points that were inserted.
    """
    n_in = len(current.interior)
    n_new = math.ceil(cfg.replace_fraction * n_in)
    if n_new == 0:
        return current, np.empty((0, 2))

    rng = np.random.default_rng(seed)
    pool = _interior(problem, cfg.pool_factor * n_in, rng)
    p = rad_probabilities(residual_fn(pool), cfg.power_k, cfg.offset_c)
    picked = pool[rng.choice(len(pool), size=n_new, replace=False, p=p)]

    slots = rng.choice(n_in, size=n_new, replace=False)
    interior = current.interior.copy()
    interior[slots] = picked
    return replace(current, interior=interior), picked


def l2_relative_error(pred, exact) -> float:
    """``||pred - exact|| / ||exact||`` over flattened arrays."""
    pred = np.ravel(np.asarray(pred, dtype=np.float64))
    exact = np.ravel(np.asarray(exact, dtype=np.float64))
    if pred.shape != exact.shape or pred.size == 0:
        raise ValueError("prediction and reference must be non-empty and of equal size")
    denom = np.linalg.norm(exact)
    if denom == 0.0:
        raise ZeroDivisionError("reference values are identically zero")
    return float(np.linalg.norm(pred - exact) / denom)
