"""Unique-localization tests for bilateration and trilateration.

Both tests pick which of the two mirror candidate regions of the unknown node
(``ri1`` on the side of ``q``, ``ri2`` on the far side of the edge o-p) can be
ruled out.  The universally quantified condition is the one that eliminates a
region, so it is evaluated conservatively: over the region covers, with the
threshold moved by the cover radii.  The existential condition only has to
show that the surviving region is consistent, so it uses exact lattice points.
Regions built without a cover fall back to plain lattice semantics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .geom import ConstraintRegion, EmptyRegionError, any_pair_within, max_pair_distance

# absorbs float round-off in distance comparisons
_TOL = 1e-9


class Outcome(enum.Enum):
    UNIQUE_UPPER = "UniqueUpper"
    UNIQUE_LOWER = "UniqueLower"
    INCONCLUSIVE = "Inconclusive"

    @property
    def is_unique(self) -> bool:
        return self is not Outcome.INCONCLUSIVE


@dataclass(frozen=True)
class CriterionVerdict:
    outcome: Outcome
    witness: dict = field(default_factory=dict)

    @property
    def is_unique(self) -> bool:
        return self.outcome.is_unique


def effective_epsilon(e_max: float, d_max: float) -> float:
    if e_max < 0 or d_max < 0:
        raise ValueError("e_max and d_max must be non-negative")
    return e_max + d_max


def _test_set(region: ConstraintRegion):
    if region.cover is not None:
        return region.cover, region.cover_radius
    return region.points, 0.0


def _check_q(rq1: ConstraintRegion):
    if rq1.is_empty:
        raise EmptyRegionError("localizer region empty")


def _decide(lower: bool, upper: bool, witness: dict) -> CriterionVerdict:
    if lower and not upper:
        return CriterionVerdict(Outcome.UNIQUE_LOWER, witness)
    if upper and not lower:
        return CriterionVerdict(Outcome.UNIQUE_UPPER, witness)
    return CriterionVerdict(Outcome.INCONCLUSIVE, witness)


def bilateration_criterion(rq1: ConstraintRegion, ri1: ConstraintRegion, ri2: ConstraintRegion, dqi: float) -> CriterionVerdict:
    """Rule out the candidate region lying entirely within ``dqi`` of ``rq1``.

    ``q`` and ``i`` are not adjacent, so a region whose every point is closer
    than the guaranteed communication distance cannot hold ``i``.
    """
    _check_q(rq1)
    witness = {"dqi": dqi, "n_q": len(rq1), "n_i1": len(ri1), "n_i2": len(ri2)}
    if dqi <= 0 or (ri1.is_empty and ri2.is_empty):
        return CriterionVerdict(Outcome.INCONCLUSIVE, witness)
    q_test, q_rad = _test_set(rq1)

    def all_close(region, key):
        pts, rad = _test_set(region)
        if len(pts) == 0:
            witness[key] = None
            return True
        dmax = max_pair_distance(q_test, pts)
        witness[key] = dmax
        return dmax < dqi - (q_rad + rad) - _TOL

    def some_far(region, key):
        if region.is_empty:
            witness[key] = None
            return False
        dmax = max_pair_distance(rq1.points, region.points)
        witness[key] = dmax
        return dmax > dqi + _TOL

    lower = all_close(ri1, "forall_dmax_i1") and some_far(ri2, "exists_dmax_i2")
    upper = all_close(ri2, "forall_dmax_i2") and some_far(ri1, "exists_dmax_i1")
    return _decide(lower, upper, witness)


def trilateration_criterion(
    rq1: ConstraintRegion, ri1: ConstraintRegion, ri2: ConstraintRegion, dqi: float, epsilon: float
) -> CriterionVerdict:
    """Rule out the candidate region with no pair distance to ``rq1`` in ``[dqi - eps, dqi + eps]``."""
    _check_q(rq1)
    if dqi <= 0 or epsilon < 0:
        raise ValueError("need dqi > 0 and epsilon >= 0")
    lo, hi = dqi - epsilon, dqi + epsilon
    witness = {"interval": (lo, hi), "n_q": len(rq1), "n_i1": len(ri1), "n_i2": len(ri2)}
    q_test, q_rad = _test_set(rq1)

    def none_within(region, key):
        pts, rad = _test_set(region)
        slack = q_rad + rad + _TOL
        hit = any_pair_within(q_test, pts, lo - slack, hi + slack)
        witness[key] = hit
        return not hit

    def some_within(region, key):
        hit = any_pair_within(rq1.points, region.points, lo, hi)
        witness[key] = hit
        return hit

    lower = none_within(ri1, "forall_hits_i1") and some_within(ri2, "exists_hits_i2")
    upper = none_within(ri2, "forall_hits_i2") and some_within(ri1, "exists_hits_i1")
    return _decide(lower, upper, witness)
