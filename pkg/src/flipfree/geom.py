"""Lattice-discretized constraint regions built from annuli and a half-plane.

A region is the set of lattice points ``(m*h, k*h)`` that satisfy every
annulus-union constraint and the half-plane.  Membership is closed on annulus
boundaries.  Regions can optionally carry a *cover*: the lattice points of the
same constraints inflated by half a cell diagonal.  Every point of the
continuous region lies within ``cover_radius`` of some cover point, which is
what lets universally quantified pair tests be evaluated soundly on a grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

DEFAULT_GRID_RES = 0.25
MIN_GRID_RES = 0.05

# slack for float round-off in span arithmetic; exact tests do the filtering
_SPAN_TOL = 1e-9


class EmptyRegionError(ValueError):
    """Raised when an operation needs a nonempty region."""


class Point(NamedTuple):
    x: float
    y: float


def default_grid_res(epsilon: float) -> float:
    """min(0.25, eps/2), floored at 0.05."""
    return max(MIN_GRID_RES, min(DEFAULT_GRID_RES, epsilon / 2.0))


def geometric_epsilon(epsilon: float, h: float) -> float:
    """Distance tolerance used to build regions; never thinner than one cell."""
    return max(epsilon, h)


@dataclass(frozen=True)
class Annulus:
    center: Point
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not (0.0 <= self.r_inner <= self.r_outer):
            raise ValueError(f"need 0 <= r_inner <= r_outer, got {self.r_inner}, {self.r_outer}")
        object.__setattr__(self, "center", Point(*map(float, self.center)))

    def contains(self, x, y):
        cx, cy = self.center
        d2 = (np.asarray(x) - cx) ** 2 + (np.asarray(y) - cy) ** 2
        return (d2 >= self.r_inner**2) & (d2 <= self.r_outer**2)

    def inflated(self, pad: float) -> "Annulus":
        return Annulus(self.center, max(self.r_inner - pad, 0.0), self.r_outer + pad)

    def bbox(self):
        cx, cy = self.center
        r = self.r_outer
        return (cx - r, cx + r, cy - r, cy + r)


@dataclass(frozen=True)
class SweptAnnulus:
    """Annulus whose center may be anywhere on the segment ``start``-``end``.

    A point belongs iff some center on the segment puts it at a distance in
    ``[r_inner, r_outer]``.  Distance to a moving center along a segment sweeps
    the whole interval ``[d_min, d_max]``, so the test is
    ``d_min <= r_outer and d_max >= r_inner``.
    """

    start: Point
    end: Point
    r_inner: float
    r_outer: float

    def __post_init__(self):
        if not (0.0 <= self.r_inner <= self.r_outer):
            raise ValueError(f"need 0 <= r_inner <= r_outer, got {self.r_inner}, {self.r_outer}")
        object.__setattr__(self, "start", Point(*map(float, self.start)))
        object.__setattr__(self, "end", Point(*map(float, self.end)))

    def contains(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ax, ay = self.start
        bx, by = self.end
        dx, dy = bx - ax, by - ay
        seg2 = dx * dx + dy * dy
        if seg2 == 0.0:
            t = np.zeros_like(x)
        else:
            t = np.clip(((x - ax) * dx + (y - ay) * dy) / seg2, 0.0, 1.0)
        near2 = (x - ax - t * dx) ** 2 + (y - ay - t * dy) ** 2
        far2 = np.maximum((x - ax) ** 2 + (y - ay) ** 2, (x - bx) ** 2 + (y - by) ** 2)
        return (near2 <= self.r_outer**2) & (far2 >= self.r_inner**2)

    def inflated(self, pad: float) -> "SweptAnnulus":
        return SweptAnnulus(self.start, self.end, max(self.r_inner - pad, 0.0), self.r_outer + pad)

    def bbox(self):
        r = self.r_outer
        xs = (self.start.x, self.end.x)
        ys = (self.start.y, self.end.y)
        return (min(xs) - r, max(xs) + r, min(ys) - r, max(ys) + r)


Member = Union[Annulus, SweptAnnulus]


@dataclass(frozen=True)
class AnnulusUnion:
    """Disjunction of annuli: a point satisfies it if any member contains it."""

    members: tuple

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("AnnulusUnion needs at least one member")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, *members: Member) -> "AnnulusUnion":
        return cls(tuple(members))

    def contains(self, x, y):
        out = self.members[0].contains(x, y)
        for m in self.members[1:]:
            out = out | m.contains(x, y)
        return out

    def inflated(self, pad: float) -> "AnnulusUnion":
        return AnnulusUnion(tuple(m.inflated(pad) for m in self.members))

    def bbox(self):
        boxes = np.array([m.bbox() for m in self.members])
        return (boxes[:, 0].min(), boxes[:, 1].max(), boxes[:, 2].min(), boxes[:, 3].max())


@dataclass(frozen=True)
class HalfPlane:
    """``a*x + b*y + c > 0`` when strict, ``>= 0`` otherwise."""

    a: float
    b: float
    c: float
    strict: bool = True

    def __post_init__(self):
        if self.a == 0 and self.b == 0:
            raise ValueError("half-plane needs (a, b) != (0, 0)")

    @classmethod
    def upper(cls) -> "HalfPlane":
        """y > 0 (the side holding the third triangle vertex)."""
        return cls(0.0, 1.0, 0.0, True)

    @classmethod
    def lower(cls) -> "HalfPlane":
        """y <= 0; owns the boundary line."""
        return cls(0.0, -1.0, 0.0, False)

    def complement(self) -> "HalfPlane":
        return HalfPlane(-self.a, -self.b, -self.c, not self.strict)

    def contains(self, x, y):
        v = self.a * np.asarray(x) + self.b * np.asarray(y) + self.c
        return v > 0 if self.strict else v >= 0

    def inflated(self, pad: float) -> "HalfPlane":
        return HalfPlane(self.a, self.b, self.c + pad * math.hypot(self.a, self.b), self.strict)


@dataclass(frozen=True)
class ConstraintRegion:
    h: float
    points: np.ndarray
    constraints: tuple
    halfplane: HalfPlane
    cover: np.ndarray | None = field(default=None, repr=False)
    cover_radius: float = 0.0

    def __len__(self):
        return len(self.points)

    @property
    def is_empty(self) -> bool:
        return len(self.points) == 0

    def contains(self, x, y, tol: float = 0.0):
        """Continuous membership test against the retained constraints.

        ``tol`` inflates every constraint, to absorb round-off in callers.
        """
        if tol:
            return _satisfies(tuple(c.inflated(tol) for c in self.constraints), self.halfplane.inflated(tol), x, y)
        return _satisfies(self.constraints, self.halfplane, x, y)

    def ys(self) -> np.ndarray:
        return self.points[:, 1]


def _satisfies(constraints, hp, x, y):
    out = hp.contains(x, y)
    for c in constraints:
        out = out & c.contains(x, y)
    return out


def _common_bbox(constraints):
    boxes = np.array([c.bbox() for c in constraints])
    return (boxes[:, 0].max(), boxes[:, 1].min(), boxes[:, 2].max(), boxes[:, 3].min())


def _clip_bbox_to_halfplane(bbox, hp):
    x0, x1, y0, y1 = bbox
    if hp.a == 0:
        bound = -hp.c / hp.b
        if hp.b > 0:
            y0 = max(y0, bound)
        else:
            y1 = min(y1, bound)
    elif hp.b == 0:
        bound = -hp.c / hp.a
        if hp.a > 0:
            x0 = max(x0, bound)
        else:
            x1 = min(x1, bound)
    return (x0, x1, y0, y1)


def _lattice_candidates(constraints, bbox, h):
    """Lattice points in ``bbox`` that may satisfy ``constraints`` (a superset)."""
    x0, x1, y0, y1 = bbox
    if x0 > x1 or y0 > y1:
        return np.empty((0, 2))
    kmin = math.ceil((y0 - _SPAN_TOL) / h)
    kmax = math.floor((y1 + _SPAN_TOL) / h)
    if kmin > kmax:
        return np.empty((0, 2))
    ks = np.arange(kmin, kmax + 1)
    ys = ks * h

    driver = next(
        (c.members[0] for c in constraints if len(c.members) == 1 and isinstance(c.members[0], Annulus)),
        None,
    )
    if driver is None:
        lo = np.full(len(ys), x0)
        hi = np.full(len(ys), x1)
        starts, ends, rows = lo, hi, ys
    else:
        cx, cy = driver.center
        dy2 = (ys - cy) ** 2
        ok = dy2 <= driver.r_outer**2
        ys, dy2 = ys[ok], dy2[ok]
        wo = np.sqrt(driver.r_outer**2 - dy2)
        wi = np.sqrt(np.maximum(driver.r_inner**2 - dy2, 0.0))
        solid = wi == 0.0
        # rows crossing the hole yield two spans, the rest a single span
        starts = np.concatenate([cx - wo, (cx + wi)[~solid]])
        ends = np.concatenate([np.where(solid, cx + wo, cx - wi), (cx + wo)[~solid]])
        rows = np.concatenate([ys, ys[~solid]])
        starts = np.maximum(starts, x0)
        ends = np.minimum(ends, x1)

    mlo = np.ceil((starts - _SPAN_TOL) / h).astype(np.int64)
    mhi = np.floor((ends + _SPAN_TOL) / h).astype(np.int64)
    counts = np.maximum(mhi - mlo + 1, 0)
    total = int(counts.sum())
    if total == 0:
        return np.empty((0, 2))
    offsets = np.repeat(np.cumsum(counts) - counts, counts)
    ms = np.repeat(mlo, counts) + (np.arange(total) - offsets)
    return np.column_stack([ms * h, np.repeat(rows, counts)])


def _build(constraints, halfplanes, h, cover):
    """Build one region per half-plane from a shared candidate set."""
    if h <= 0:
        raise ValueError(f"grid resolution must be positive, got {h}")
    constraints = tuple(constraints)
    if not constraints:
        raise ValueError("need at least one constraint")
    pad = h * math.sqrt(0.5) if cover else 0.0
    grown = tuple(c.inflated(pad) for c in constraints) if cover else constraints
    bbox = _common_bbox(grown)
    if len(halfplanes) == 1:
        hp_grown = halfplanes[0].inflated(pad) if cover else halfplanes[0]
        bbox = _clip_bbox_to_halfplane(bbox, hp_grown)
    cand = _lattice_candidates(grown, bbox, h)
    x, y = cand[:, 0], cand[:, 1]
    exact = np.ones(len(cand), dtype=bool)
    for c in constraints:
        exact &= c.contains(x, y)
    grown_mask = None
    if cover:
        grown_mask = np.ones(len(cand), dtype=bool)
        for c in grown:
            grown_mask &= c.contains(x, y)
    regions = []
    for hp in halfplanes:
        pts = cand[exact & hp.contains(x, y)]
        cov = None
        if cover:
            cov = cand[grown_mask & hp.inflated(pad).contains(x, y)]
        regions.append(ConstraintRegion(h, pts, constraints, hp, cov, pad))
    return regions


def build_region(constraints: Sequence[AnnulusUnion], hp: HalfPlane, h: float, *, cover: bool = False) -> ConstraintRegion:
    """Lattice points satisfying every constraint and the half-plane.

    With ``cover=True`` the region also stores the lattice points of the
    constraints inflated by ``h/sqrt(2)``.
    """
    return _build(constraints, (hp,), h, cover)[0]


def build_region_pair(constraints: Sequence[AnnulusUnion], hp: HalfPlane, h: float, *, cover: bool = False):
    """The regions on ``hp`` and on its complement, sharing one lattice scan."""
    a, b = _build(constraints, (hp, hp.complement()), h, cover)
    return a, b


def _as_points(region) -> np.ndarray:
    if isinstance(region, ConstraintRegion):
        return region.points
    return np.asarray(region, dtype=float).reshape(-1, 2)


def _hull_vertices(pts: np.ndarray) -> np.ndarray:
    if len(pts) < 16:
        return pts
    try:
        return pts[ConvexHull(pts).vertices]
    except QhullError:
        # collinear sets: extremes along the principal axis suffice
        d = pts - pts.mean(axis=0)
        axis = np.linalg.svd(d, full_matrices=False)[2][0]
        proj = d @ axis
        return pts[[proj.argmin(), proj.argmax()]]


def max_pair_distance(a, b) -> float:
    """Largest distance between a point of ``a`` and a point of ``b``."""
    pa, pb = _hull_vertices(_as_points(a)), _hull_vertices(_as_points(b))
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyRegionError("max_pair_distance on empty set")
    d2 = ((pa[:, None, :] - pb[None, :, :]) ** 2).sum(-1)
    return float(np.sqrt(d2.max()))


def min_pair_distance(a, b) -> float:
    pa, pb = _as_points(a), _as_points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyRegionError("min_pair_distance on empty set")
    if len(pa) < len(pb):
        pa, pb = pb, pa
    d, _ = cKDTree(pa).query(pb, k=1)
    return float(d.min())


def _bounding_circle(pts):
    c = pts.mean(axis=0)
    return c, float(np.sqrt(((pts - c) ** 2).sum(1).max()))


def _count_le(ta, tb, r) -> int:
    if r < 0:
        return 0
    return int(ta.count_neighbors(tb, r))


def count_pairs_within(a, b, lo: float, hi: float) -> int:
    """Number of pairs with ``lo <= |a - b| <= hi``."""
    pa, pb = _as_points(a), _as_points(b)
    if len(pa) == 0 or len(pb) == 0 or lo > hi:
        return 0
    ca, ra = _bounding_circle(pa)
    cb, rb = _bounding_circle(pb)
    cd = float(np.hypot(*(ca - cb)))
    if cd + ra + rb < lo or max(cd - ra - rb, 0.0) > hi:
        return 0
    if max(cd - ra - rb, 0.0) >= lo and cd + ra + rb <= hi:
        return len(pa) * len(pb)
    ta, tb = cKDTree(pa), cKDTree(pb)
    return _count_le(ta, tb, hi) - _count_le(ta, tb, np.nextafter(lo, -np.inf))


def any_pair_within(a, b, lo: float, hi: float, probes: int = 8) -> bool:
    """Whether some pair has ``lo <= |a - b| <= hi``.

    A few rows of the distance matrix usually find a hit; the exact count
    settles the rest.
    """
    pa, pb = _as_points(a), _as_points(b)
    if len(pa) == 0 or len(pb) == 0 or lo > hi:
        return False
    if len(pa) > len(pb):
        pa, pb = pb, pa
    for k in np.unique(np.linspace(0, len(pa) - 1, min(probes, len(pa))).astype(int)):
        d = np.sqrt(((pb - pa[k]) ** 2).sum(1))
        if ((d >= lo) & (d <= hi)).any():
            return True
    return count_pairs_within(pa, pb, lo, hi) > 0


class PairStats(NamedTuple):
    n_below: int
    n_within: int
    n_above: int
    d_min: float
    d_max: float


def interval_pair_stats(a, b, lo: float, hi: float) -> PairStats:
    """Classify all pairs of ``a x b`` against the closed interval ``[lo, hi]``.

    Bounding circles decide the counts outright when they can; otherwise a
    dual-tree count gives the same numbers a full scan would.
    """
    pa, pb = _as_points(a), _as_points(b)
    if len(pa) == 0 or len(pb) == 0:
        raise EmptyRegionError("interval_pair_stats needs nonempty regions")
    if lo > hi:
        raise ValueError(f"need lo <= hi, got {lo} > {hi}")
    total = len(pa) * len(pb)
    d_min = min_pair_distance(pa, pb)
    d_max = max_pair_distance(pa, pb)
    if d_max < lo:
        return PairStats(total, 0, 0, d_min, d_max)
    if d_min > hi:
        return PairStats(0, 0, total, d_min, d_max)
    if d_min >= lo and d_max <= hi:
        return PairStats(0, total, 0, d_min, d_max)
    ta, tb = cKDTree(pa), cKDTree(pb)
    le_hi = _count_le(ta, tb, hi)
    below = _count_le(ta, tb, np.nextafter(lo, -np.inf))
    return PairStats(below, le_hi - below, total - le_hi, d_min, d_max)


def region_centroid(region) -> Point:
    pts = _as_points(region)
    if len(pts) == 0:
        raise EmptyRegionError("no estimate: region is empty")
    c = pts.mean(axis=0)
    return Point(float(c[0]), float(c[1]))
