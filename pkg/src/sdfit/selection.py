"""Fit-and-remove model selection over a fixed hypothesis set.

Instead of deleting the inliers of each chosen model from the data, the
hypotheses whose sampled subset touches those inliers are discarded.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ModelDeficit, NoHypotheses
from .geometry import CorrespondenceSet, Hypothesis, residuals

DEFAULT_INLIER_T = 2.5


def inlier_set(h: Hypothesis, data: CorrespondenceSet, T: float = DEFAULT_INLIER_T) -> np.ndarray:
    """Indices whose residual is within ``T`` times the hypothesis scale."""
    if h.scale is None:
        raise ValueError("hypothesis has no scale; weigh it first")
    return np.flatnonzero(residuals(h, data) <= T * h.scale)


def is_redundant(inliers, candidate: Hypothesis) -> bool:
    """A candidate is redundant once any of its sampled indices is an inlier."""
    return not set(int(i) for i in inliers).isdisjoint(candidate.sample)


@dataclass
class SelectionState:
    remaining: list
    selected: list = field(default_factory=list)
    inlier_sets: list = field(default_factory=list)
    deficit: bool = False


def select_models(hyps: list[Hypothesis], data: CorrespondenceSet, l: int,
                  T: float = DEFAULT_INLIER_T) -> SelectionState:
    """Pick up to ``l`` models by descending weight, pruning redundant hypotheses.

    Ties in weight go to the hypothesis listed first. If the set runs dry
    before ``l`` models are found, the partial selection is returned with
    ``deficit`` set and a ``ModelDeficit`` warning is issued.
    """
    if not hyps:
        raise NoHypotheses("nothing to select from")
    if l < 1:
        raise ValueError("structure count must be >= 1")
    state = SelectionState(remaining=list(hyps))
    for _ in range(l):
        if not state.remaining:
            state.deficit = True
            warnings.warn(f"only {len(state.selected)} of {l} models selected", ModelDeficit,
                          stacklevel=2)
            break
        weights = [h.weight for h in state.remaining]
        best = state.remaining[int(np.argmax(weights))]
        ins = inlier_set(best, data, T)
        state.selected.append(best)
        state.inlier_sets.append(ins)
        state.remaining = [h for h in state.remaining
                           if h is not best and not is_redundant(ins, h)]
    return state
