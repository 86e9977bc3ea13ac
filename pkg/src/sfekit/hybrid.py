"""Stagnation-triggered two-stage search.

Stage one is the single-agent mask search. When its best fitness has not
moved for a whole window of evaluations (after a warm-up period), the
incumbent mask freezes, the dataset is cut down to the incumbent's columns
and the remaining evaluation budget goes to a continuation engine that
refines within that subspace. The stock engine is BPSO seeded with the
full reduced mask; any engine honouring the same contract can be swapped
in. If the trigger never fires the result is exactly the stage-one run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bpso import PsoParams, pso_search
from .dataset import Dataset, subset_columns
from .fitness import FitnessEvaluator
from .rng import as_generator
from .sfe import SfeParams, random_mask, sfe_search
from .trace import SearchTrace

__all__ = [
    "HybridParams",
    "EngineContractError",
    "stagnation_check",
    "sfe_ec_search",
    "sfe_pso_search",
    "identity_engine",
    "hillclimb_engine",
    "make_pso_engine",
    "resolve_engine",
]


class EngineContractError(RuntimeError):
    """A continuation engine broke its interface contract."""


@dataclass(frozen=True)
class HybridParams:
    """Stagnation trigger plus the per-stage parameter blocks.

    The check may only fire after ``warmup_fes`` evaluations, and compares
    best fitness against its value ``stagnation_window`` evaluations
    earlier under exact equality.
    """

    warmup_fes: int = 2000
    stagnation_window: int = 1000
    sfe: SfeParams = field(default_factory=SfeParams)
    pso: PsoParams = field(default_factory=PsoParams)

    def __post_init__(self):
        if self.stagnation_window < 1:
            raise ValueError("stagnation_window must be at least 1")
        if self.warmup_fes <= self.stagnation_window:
            raise ValueError("warmup_fes must exceed stagnation_window")


def stagnation_check(trace: SearchTrace, fes: int, params: HybridParams) -> bool:
    """True when the best fitness at ``fes`` equals its value one window ago.

    Never fires during the warm-up (fes <= warmup_fes). Exact float
    equality: the greedy stage cannot regress, so equality over a whole
    window means zero improvement.
    """
    if fes <= params.warmup_fes:
        return False
    return trace.best_at(fes) == trace.best_at(fes - params.stagnation_window)


def _map_to_parent(parent_positions: np.ndarray, reduced_mask, nvar: int) -> np.ndarray:
    out = np.zeros(nvar, dtype=np.int8)
    out[parent_positions[np.flatnonzero(reduced_mask)]] = 1
    return out


def sfe_ec_search(
    ds: Dataset,
    ev: FitnessEvaluator,
    engine,
    params: HybridParams = HybridParams(),
    seed=None,
    *,
    min_continuation_budget: int = 0,
) -> SearchTrace:
    """Stage-one search with a pluggable continuation engine.

    ``engine`` is called as ``engine(reduced_ds, ev, seed_mask, rng)`` with
    a column-reduced dataset, an evaluator continuing the unspent budget, a
    seed mask of all ones in the reduced space and the live random stream.
    It must return a `SearchTrace` whose final mask lives in the reduced
    space; overspending the budget or returning a malformed mask raises
    `EngineContractError`. The handoff is skipped (stage one keeps
    running) while fewer than ``min_continuation_budget`` evaluations
    remain.

    The returned trace is continuous across the handoff and its final mask
    is expressed in ``ds``'s own index space; ``handoff_fes`` records where
    control changed hands, or None when the trigger never fired.
    """
    rng = as_generator(seed)
    fired = []

    def stop(trace):
        if min_continuation_budget and ev.remaining_budget < min_continuation_budget:
            return False
        if stagnation_check(trace, trace.fes[-1], params):
            fired.append(trace.fes[-1])
            return True
        return False

    stage1 = sfe_search(ds, ev, params.sfe, rng, stop=stop)
    if not fired:
        return stage1

    handoff_fes = fired[0]
    frozen = stage1.final_mask
    reduced = subset_columns(ds, frozen)
    ev2 = ev.spawn(reduced)
    seed_mask = np.ones(reduced.n_features, dtype=np.int8)

    stage2 = engine(reduced, ev2, seed_mask, rng)

    if not isinstance(stage2, SearchTrace):
        raise EngineContractError("engine must return a SearchTrace")
    if ev2.used > ev2.budget:
        raise EngineContractError(
            f"engine spent {ev2.used} evaluations against a budget of {ev2.budget}"
        )
    ev.used = ev2.used  # keep the caller's budget view exact across the handoff
    final_reduced = np.asarray(stage2.final_mask)
    if final_reduced.shape != (reduced.n_features,):
        raise EngineContractError("engine's final mask is not in the reduced space")
    if not final_reduced.any():
        raise EngineContractError("engine's final mask selects no features")

    combined = SearchTrace(
        fes=list(stage1.fes),
        best_fitness=list(stage1.best_fitness),
        n_selected=list(stage1.n_selected),
    )
    combined.extend(stage2)
    combined.handoff_fes = handoff_fes
    combined.handoff_mask = frozen.copy()
    combined.final_mask = _map_to_parent(
        np.flatnonzero(frozen), final_reduced, ds.n_features
    )
    if len(stage2) > 0:
        combined.final_fitness = stage2.final_fitness
    else:
        combined.final_fitness = stage1.final_fitness
    return combined


def make_pso_engine(params: PsoParams):
    """Continuation engine running BPSO seeded with the handoff mask."""

    def engine(reduced_ds, ev, seed_mask, rng):
        return pso_search(reduced_ds, ev, params, init=seed_mask, seed=rng)

    engine.min_budget = params.pop_size
    return engine


def sfe_pso_search(
    ds: Dataset,
    ev: FitnessEvaluator,
    params: HybridParams = HybridParams(),
    seed=None,
) -> SearchTrace:
    """Two-stage search whose continuation is BPSO on the reduced columns.

    The swarm's first particle starts as the full reduced mask, so its
    first evaluation reproduces the handoff fitness and the combined
    best-fitness series never dips. A handoff needs at least one whole
    particle wave of budget; with less remaining, stage one simply runs
    the budget out.
    """
    return sfe_ec_search(
        ds,
        ev,
        make_pso_engine(params.pso),
        params,
        seed,
        min_continuation_budget=params.pso.pop_size,
    )


def identity_engine(reduced_ds, ev, seed_mask, rng) -> SearchTrace:
    """Continuation that returns the seed mask untouched, spending nothing."""
    trace = SearchTrace()
    trace.final_mask = np.asarray(seed_mask, dtype=np.int8).copy()
    trace.final_fitness = float("nan")
    return trace


def hillclimb_engine(reduced_ds, ev, seed_mask, rng, restart_after: int = 50) -> SearchTrace:
    """Single-bit-flip hill climber with random restarts.

    Accepts moves that do not lose fitness; after ``restart_after``
    consecutive rejections it restarts from a random mask. The returned
    mask is the best one seen anywhere, so the final fitness never falls
    below the seed's.
    """
    rng = as_generator(rng)
    d = reduced_ds.n_features
    trace = SearchTrace()

    def measure(mask):
        value = ev.evaluate(mask)
        if trace.best_fitness and value <= trace.best_fitness[-1]:
            trace.record(ev.used, trace.best_fitness[-1], trace.n_selected[-1])
        else:
            trace.record(ev.used, value, int(mask.sum()))
        return value

    current = np.asarray(seed_mask, dtype=np.int8).copy()
    if ev.remaining_budget <= 0:
        raise ValueError("hill climber needs at least one evaluation of budget")
    fit_cur = measure(current)
    best, best_fit = current.copy(), fit_cur
    rejected = 0
    while ev.remaining_budget > 0:
        cand = current.copy()
        j = int(rng.integers(0, d))
        cand[j] = 1 - cand[j]
        if not cand.any():
            cand[int(rng.integers(0, d))] = 1
        fit_cand = measure(cand)
        if fit_cand >= fit_cur:
            current, fit_cur = cand, fit_cand
            rejected = 0
            if fit_cur > best_fit:
                best, best_fit = current.copy(), fit_cur
        else:
            rejected += 1
        if rejected >= restart_after and ev.remaining_budget > 0:
            current = random_mask(d, rng)
            fit_cur = measure(current)
            rejected = 0
            if fit_cur > best_fit:
                best, best_fit = current.copy(), fit_cur

    trace.final_mask = best
    trace.final_fitness = best_fit
    return trace


def resolve_engine(name: str, params: HybridParams):
    """Look up a continuation engine by name.

    Returns (engine, min_continuation_budget). Names: "pso", "identity",
    "hillclimb".
    """
    if name == "pso":
        return make_pso_engine(params.pso), params.pso.pop_size
    if name == "identity":
        return identity_engine, 0
    if name == "hillclimb":
        return hillclimb_engine, 1
    raise ValueError(f"unknown continuation engine {name!r}; known: pso, identity, hillclimb")
