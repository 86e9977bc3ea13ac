"""Binary particle swarm optimisation over feature masks.

Sigmoid-transfer BPSO: velocities evolve in a clamped real box and each
position bit is resampled against the sigmoid of its velocity. Evaluations
within a generation are independent; personal and global bests update at
generation boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .fitness import FitnessEvaluator
from .rng import as_generator
from .trace import SearchTrace

__all__ = [
    "PsoParams",
    "sigmoid",
    "velocity_update",
    "position_update",
    "pso_search",
]


@dataclass(frozen=True)
class PsoParams:
    pop_size: int = 20
    w: float = 1.0
    c1: float = 2.0
    c2: float = 1.5
    v_clamp: float = 6.0

    def __post_init__(self):
        if self.pop_size < 1:
            raise ValueError("pop_size must be at least 1")
        if self.w < 0 or self.c1 < 0 or self.c2 < 0:
            raise ValueError("w, c1 and c2 must be non-negative")
        if self.v_clamp <= 0:
            raise ValueError("v_clamp must be positive")


def sigmoid(v):
    return 1.0 / (1.0 + np.exp(-np.asarray(v, dtype=np.float64)))


def velocity_update(v, x, pbest, gbest, params: PsoParams, rng):
    """One velocity step with fresh uniform r1, r2 per component.

    Accepts scalars or arrays of matching shape; the result is clamped to
    [-v_clamp, +v_clamp] componentwise.
    """
    rng = as_generator(rng)
    v = np.asarray(v, dtype=np.float64)
    r1 = rng.random(v.shape)
    r2 = rng.random(v.shape)
    out = (
        params.w * v
        + params.c1 * r1 * (np.asarray(pbest) - np.asarray(x))
        + params.c2 * r2 * (np.asarray(gbest) - np.asarray(x))
    )
    return np.clip(out, -params.v_clamp, params.v_clamp)


def position_update(v, rng):
    """Resample position bits: 1 where a fresh uniform draw <= sigmoid(v)."""
    rng = as_generator(rng)
    v = np.asarray(v, dtype=np.float64)
    return (rng.random(v.shape) <= sigmoid(v)).astype(np.int8)


def _repair_zero_rows(positions: np.ndarray, rng) -> None:
    # An all-zero mask cannot be evaluated; switch one random bit on.
    for i in np.flatnonzero(~positions.any(axis=1)):
        positions[i, rng.integers(0, positions.shape[1])] = 1


def pso_search(
    ds: Dataset,
    ev: FitnessEvaluator,
    params: PsoParams = PsoParams(),
    init=None,
    seed=None,
) -> SearchTrace:
    """Run BPSO until fewer than pop_size evaluations remain.

    Positions start Bernoulli(0.5) and velocities uniform in [-1, 1]; when
    ``init`` is given it overwrites particle 0, which seeds the swarm with
    a known-good mask. Each generation charges pop_size evaluations, so
    the remaining budget must cover at least the initial wave. Personal
    bests move only on strict improvement; the global best prefers the
    lowest particle index on ties. Returns a trace with one entry per
    evaluation whose best-fitness series is the running maximum.
    """
    rng = as_generator(seed)
    n = params.pop_size
    d = ds.n_features
    if ev.remaining_budget < n:
        raise ValueError(
            f"budget remainder {ev.remaining_budget} cannot cover one wave of {n} particles"
        )

    positions = (rng.random((n, d)) < 0.5).astype(np.int8)
    velocities = rng.uniform(-1.0, 1.0, size=(n, d))
    if init is not None:
        init = np.asarray(init, dtype=np.int8)
        if init.shape != (d,):
            raise ValueError("init mask length does not match the feature count")
        if not init.any():
            raise ValueError("init mask selects no features")
        positions[0] = init
    _repair_zero_rows(positions, rng)

    trace = SearchTrace()
    fits = np.empty(n, dtype=np.float64)

    def evaluate_wave():
        for i in range(n):
            fits[i] = ev.evaluate(positions[i])

    def record_wave(gbest_fit, gbest_count):
        # Entries are per evaluation; the best column is the running max.
        base = ev.used - n
        running, count = gbest_fit, gbest_count
        for i in range(n):
            if fits[i] > running or np.isnan(running):
                running = fits[i]
                count = int(positions[i].sum())
            trace.record(base + i + 1, running, count)
        return running, count

    evaluate_wave()
    best_fit, best_count = float("nan"), 0
    best_fit, best_count = record_wave(best_fit, best_count)

    pbest = positions.copy()
    pbest_fits = fits.copy()
    g = int(np.argmax(pbest_fits))
    gbest = pbest[g].copy()
    gbest_fit = float(pbest_fits[g])

    while ev.remaining_budget >= n:
        velocities = velocity_update(velocities, positions, pbest, gbest, params, rng)
        positions = position_update(velocities, rng)
        _repair_zero_rows(positions, rng)
        evaluate_wave()
        best_fit, best_count = record_wave(best_fit, best_count)

        improved = fits > pbest_fits
        pbest[improved] = positions[improved]
        pbest_fits[improved] = fits[improved]
        g = int(np.argmax(pbest_fits))  # first index wins ties
        gbest = pbest[g].copy()
        gbest_fit = float(pbest_fits[g])

    trace.final_mask = gbest.copy()
    trace.final_fitness = gbest_fit
    return trace
