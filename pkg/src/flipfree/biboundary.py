"""Communication-range bounds from 1-hop and 2-hop measured distances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .netmodel import NetworkInstance


class UnboundedRangeError(ValueError):
    """The node has no neighbors, so its range has no lower bound."""


@dataclass(frozen=True)
class HopDistanceSets:
    d1: tuple
    d2: tuple

    @property
    def isolated(self) -> bool:
        return not self.d1


@dataclass(frozen=True)
class RangeBounds:
    """Half-open interval ``[lower, upper)``; ``upper`` may be ``inf``."""

    lower: float
    upper: float = math.inf

    def __contains__(self, r: float) -> bool:
        return self.lower <= r < self.upper


def hop_sets(inst: NetworkInstance, i: int) -> HopDistanceSets:
    """Measured 1-hop distances of ``i`` and 2-hop sums ``d_il + d_lj`` to non-neighbors ``j``."""
    if not 0 <= i < inst.n:
        raise IndexError(f"node {i} out of range")
    nbrs = inst.neighbors[i]
    d1 = tuple(float(inst.measured[i, j]) for j in sorted(nbrs))
    d2 = []
    for l in sorted(nbrs):
        d_il = inst.measured[i, l]
        for j in sorted(inst.neighbors[l]):
            if j != i and j not in nbrs:
                d2.append(float(d_il + inst.measured[l, j]))
    return HopDistanceSets(d1, tuple(d2))


def range_bounds(sets: HopDistanceSets, epsilon: float) -> RangeBounds:
    if sets.isolated:
        raise UnboundedRangeError("range unbounded below: node has no 1-hop distances")
    lower = max(sets.d1) - epsilon
    upper = min(sets.d2) + 2 * epsilon if sets.d2 else math.inf
    return RangeBounds(lower, upper)


def guaranteed_comm_distance(sets_q: HopDistanceSets, sets_i: HopDistanceSets, epsilon: float) -> float:
    """Distance below which the two nodes are certainly within each other's range.

    May be non-positive; callers treat that as "criterion not applicable".
    """
    if sets_q.isolated or sets_i.isolated:
        raise UnboundedRangeError("both nodes need at least one neighbor")
    return min(max(sets_q.d1) - epsilon, max(sets_i.d1) - epsilon)


def max_one_hop(inst: NetworkInstance) -> np.ndarray:
    """``max(D^1)`` per node, NaN for isolated nodes."""
    with np.errstate(all="ignore"):
        out = np.nanmax(np.where(np.isnan(inst.measured), -np.inf, inst.measured), axis=1)
    out[np.isinf(out)] = np.nan
    return out
