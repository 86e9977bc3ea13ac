"""Per-evaluation search traces.

Every search records one entry per charged fitness evaluation: the
evaluation counter, the best fitness seen so far, and the selected-feature
count of the current best mask. Convergence curves and stagnation checks
are both defined over this series.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

__all__ = ["SearchTrace"]


@dataclass
class SearchTrace:
    """Trace of one search run.

    ``fes``, ``best_fitness`` and ``n_selected`` are parallel lists indexed
    by evaluation. ``final_mask`` is the best mask at termination, in the
    index space of the dataset the search was handed. Staged searches set
    ``handoff_fes`` to the evaluation at which control changed hands and
    ``handoff_mask`` to the mask frozen there (both None when no handoff
    happened).
    """

    fes: list = field(default_factory=list)
    best_fitness: list = field(default_factory=list)
    n_selected: list = field(default_factory=list)
    final_mask: np.ndarray = None
    final_fitness: float = float("nan")
    handoff_fes: int = None
    handoff_mask: np.ndarray = None

    def record(self, fes: int, best: float, n_selected: int) -> None:
        if self.fes and fes <= self.fes[-1]:
            raise ValueError("trace entries must have strictly increasing FEs")
        self.fes.append(int(fes))
        self.best_fitness.append(float(best))
        self.n_selected.append(int(n_selected))

    def __len__(self) -> int:
        return len(self.fes)

    def best_at(self, fes: int) -> float:
        """Best fitness recorded at evaluation ``fes``."""
        i = bisect_left(self.fes, fes)
        if i == len(self.fes) or self.fes[i] != fes:
            raise KeyError(f"no trace entry at FEs={fes}")
        return self.best_fitness[i]

    def extend(self, other: "SearchTrace") -> None:
        """Append another phase's entries; FEs must keep increasing."""
        for f, b, n in zip(other.fes, other.best_fitness, other.n_selected):
            self.record(f, b, n)
