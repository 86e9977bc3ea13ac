"""Single-agent stochastic mask search over feature subsets.

The search walks a single binary incumbent. Early on it clears many
selected bits per step (exploration); as the evaluation budget drains, the
clearing rate anneals toward zero so steps become small (exploitation).
A candidate that would clear the last remaining bit is replaced by the
opposite move, switching one unselected bit of the incumbent on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .fitness import FitnessEvaluator
from .rng import as_generator
from .trace import SearchTrace

__all__ = [
    "SfeParams",
    "ur_schedule",
    "compute_un",
    "non_selection",
    "selection",
    "random_mask",
    "sfe_search",
]


@dataclass(frozen=True)
class SfeParams:
    """Knobs of the single-agent search.

    ur_max, ur_min : float
        Endpoints of the annealed clearing rate.
    sn : int
        Bits switched on by one selection move.
    un_policy : str
        "linear_schedule" draws the clear count from the annealed rate;
        "random_fraction" draws it as a random fraction of the dimension.
    rf_n : int
        Divisor cap for the random_fraction policy.
    ur_denominator : str
        "max_fes" anneals over the whole budget (the default). "fes"
        divides by the evaluations spent so far instead, clamped to
        [ur_min, ur_max]; provided for compatibility with runs tuned
        against that variant.
    """

    ur_max: float = 0.3
    ur_min: float = 0.001
    sn: int = 1
    un_policy: str = "linear_schedule"
    rf_n: int = 20
    ur_denominator: str = "max_fes"

    def __post_init__(self):
        if not 0.0 <= self.ur_min <= self.ur_max <= 1.0:
            raise ValueError("need 0 <= ur_min <= ur_max <= 1")
        if self.sn < 1:
            raise ValueError("sn must be at least 1")
        if self.un_policy not in ("linear_schedule", "random_fraction"):
            raise ValueError(f"unknown un_policy {self.un_policy!r}")
        if self.rf_n < 1:
            raise ValueError("rf_n must be at least 1")
        if self.ur_denominator not in ("max_fes", "fes"):
            raise ValueError(f"unknown ur_denominator {self.ur_denominator!r}")


def ur_schedule(params: SfeParams, fes: int, max_fes: int) -> float:
    """Clearing rate after ``fes`` of ``max_fes`` evaluations.

    Decreases linearly from ur_max at fes=0 to ur_min at fes=max_fes.
    """
    if max_fes <= 0:
        raise ValueError("max_fes must be positive")
    if fes < 0:
        raise ValueError("fes must be non-negative")
    span = params.ur_max - params.ur_min
    if params.ur_denominator == "fes":
        if fes == 0:
            return params.ur_max
        ur = span * ((max_fes - fes) / fes) + params.ur_min
        return min(params.ur_max, max(params.ur_min, ur))
    return span * ((max_fes - fes) / max_fes) + params.ur_min


def compute_un(params: SfeParams, ur: float, nvar: int, rng=None) -> int:
    """Number of selected bits the next non-selection move will clear.

    The linear_schedule policy takes ceil(ur * nvar); random_fraction draws
    floor(u * nvar / k) with u uniform in [0,1) and k a uniform integer in
    [1, rf_n]. Either way the result is at least 1.
    """
    if nvar < 1:
        raise ValueError("nvar must be positive")
    if params.un_policy == "linear_schedule":
        un = math.ceil(ur * nvar)
    else:
        rng = as_generator(rng)
        k = int(rng.integers(1, params.rf_n + 1))
        un = int(rng.random() * nvar / k)
    return max(1, un)


def non_selection(x: np.ndarray, un: int, rng) -> np.ndarray:
    """Clear up to ``un`` selected bits of ``x``, chosen uniformly.

    Draws ``un`` positions from the selected set with replacement, so
    duplicate draws collapse and fewer than ``un`` distinct bits may clear.
    """
    if un < 1:
        raise ValueError("un must be at least 1")
    index = np.flatnonzero(x)
    if index.size == 0:
        raise ValueError("x has no selected features")
    rng = as_generator(rng)
    draws = rng.integers(0, index.size, size=un)
    out = x.copy()
    out[index[draws]] = 0
    return out


def selection(x: np.ndarray, sn: int, rng) -> np.ndarray:
    """Set up to ``sn`` unselected bits of ``x``, chosen uniformly.

    Mirror image of `non_selection`: draws from the unselected set with
    replacement.
    """
    if sn < 1:
        raise ValueError("sn must be at least 1")
    uindex = np.flatnonzero(np.asarray(x) == 0)
    if uindex.size == 0:
        raise ValueError("x has no unselected features")
    rng = as_generator(rng)
    draws = rng.integers(0, uindex.size, size=sn)
    out = x.copy()
    out[uindex[draws]] = 1
    return out


def random_mask(nvar: int, rng) -> np.ndarray:
    """Bernoulli(0.5) mask, redrawn until at least one bit is set."""
    if nvar < 1:
        raise ValueError("nvar must be positive")
    rng = as_generator(rng)
    while True:
        mask = (rng.random(nvar) < 0.5).astype(np.int8)
        if mask.any():
            return mask


def sfe_search(
    ds: Dataset,
    ev: FitnessEvaluator,
    params: SfeParams = SfeParams(),
    seed=None,
    stop=None,
) -> SearchTrace:
    """Run the single-agent search until the budget is spent.

    The incumbent is replaced whenever a candidate scores at least as well
    (ties move, which lets the walk drift across plateaus). One entry is
    recorded per evaluation; with a greedy acceptance rule the incumbent's
    fitness is the best seen so far.

    ``stop``, if given, is called after every recorded evaluation with the
    trace and may return True to end the run early; staged searches use it
    to take over at a stagnation point. Returns the trace with the final
    mask and fitness filled in.
    """
    rng = as_generator(seed)
    nvar = ds.n_features
    max_fes = ev.budget
    trace = SearchTrace()

    x = random_mask(nvar, rng)
    fit_x = ev.evaluate(x)
    trace.record(ev.used, fit_x, int(x.sum()))

    ur = ur_schedule(params, 0, max_fes)
    while ev.remaining_budget > 0 and not (stop is not None and stop(trace)):
        un = compute_un(params, ur, nvar, rng)
        cand = non_selection(x, un, rng)
        if not cand.any():
            if np.all(x == 1):
                # Nothing left to switch on; re-evaluate the incumbent.
                cand = x.copy()
            else:
                cand = selection(x, params.sn, rng)
        fit_cand = ev.evaluate(cand)
        if fit_cand >= fit_x:
            x, fit_x = cand, fit_cand
        trace.record(ev.used, fit_x, int(x.sum()))
        ur = ur_schedule(params, ev.used, max_fes)

    trace.final_mask = x
    trace.final_fitness = fit_x
    return trace
