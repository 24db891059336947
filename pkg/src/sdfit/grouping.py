"""Superpixel groups of correspondences and deterministic hypothesis sampling."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput, NoHypotheses
from .geometry import CorrespondenceSet, Hypothesis, ModelKind, fit_model
from .superpixel import SuperpixelMap, locate_many

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Group:
    """Correspondences sharing the support of one or two superpixels.

    ``bbox`` is the inclusive (x0, y0, x1, y1) union box of the superpixels.
    """

    members: tuple
    superpixel_ids: tuple
    bbox: tuple

    @property
    def key(self) -> tuple:
        ids = self.superpixel_ids
        return (min(ids), max(ids))


def assign_groups(data: CorrespondenceSet, smap: SuperpixelMap) -> list[Group]:
    """Partition correspondences by the superpixel containing their view-1 point."""
    if len(data) == 0:
        return []
    lab = locate_many(smap, data.x1)
    order = np.lexsort((np.arange(len(lab)), lab))
    groups = []
    bounds = np.flatnonzero(np.diff(lab[order])) + 1
    for chunk in np.split(order, bounds):
        sp = int(lab[chunk[0]])
        groups.append(Group(tuple(int(i) for i in chunk), (sp,), tuple(int(v) for v in smap.bboxes[sp])))
    return groups


def union_box(a, b) -> tuple:
    return (min(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), max(a[3], b[3]))


def fits_region(box, S: float) -> bool:
    """True when an inclusive pixel box fits inside a 2S x 2S square."""
    return (box[2] - box[0] + 1) <= 2 * S and (box[3] - box[1] + 1) <= 2 * S


def combine_groups(groups: list[Group], smap: SuperpixelMap, S: float) -> list[Group]:
    """Merge each group with every adjacent group whose union box fits 2S x 2S.

    A group with no qualifying neighbour is passed through unchanged.
    Unordered pairs are emitted once; output is sorted by (min id, max id).
    """
    by_label = {g.superpixel_ids[0]: g for g in groups}
    out = {}
    for g in groups:
        li = g.superpixel_ids[0]
        paired = False
        for lj in sorted(smap.adjacency[li]):
            other = by_label.get(lj)
            if other is None:
                continue
            box = union_box(smap.bboxes[li], smap.bboxes[lj])
            if not fits_region(box, S):
                continue
            paired = True
            key = (min(li, lj), max(li, lj))
            if key not in out:
                members = tuple(sorted(set(g.members) | set(other.members)))
                out[key] = Group(members, key, tuple(int(v) for v in box))
        if not paired:
            out[(li, li)] = g
    return [out[k] for k in sorted(out)]


def rank_by_score(group: Group, scores: np.ndarray) -> list[int]:
    """Members sorted by descending matching score, ties by index."""
    members = np.asarray(group.members, dtype=np.int64)
    order = np.lexsort((members, -scores[members]))
    return [int(i) for i in members[order]]


def generate_initial_hypotheses(data: CorrespondenceSet, smap: SuperpixelMap,
                                kind: ModelKind) -> list[Hypothesis]:
    """Fit one hypothesis per combined group from its top p+2 matches.

    Raises
    ------
    NoHypotheses
        If no group is large enough or every fit is degenerate.
    """
    groups = combine_groups(assign_groups(data, smap), smap, smap.S)
    k = kind.sample_size
    hyps = []
    for g in groups:
        if len(g.members) < k:
            continue
        subset = rank_by_score(g, data.scores)[:k]
        try:
            h = fit_model(kind, data, subset)
        except DegenerateInput as exc:
            log.debug("skipping group %s: %s", g.superpixel_ids, exc)
            continue
        h.meta["group"] = g.superpixel_ids
        hyps.append(h)
    log.info("%d groups, %d initial hypotheses", len(groups), len(hyps))
    if not hyps:
        raise NoHypotheses(f"none of {len(groups)} groups yielded a {kind.value} hypothesis")
    return hyps
