"""Flip-ambiguity-free iterative localization over localized triangles.

Each localized triangle ``(o, p, q)`` defines a local frame with ``o`` at the
origin, ``p`` on the positive x-axis and ``q`` above it.  Candidate regions
are built in that frame from *measured* distances only, so the verdicts never
depend on earlier estimates; estimates only enter when a surviving region is
mapped back to global coordinates.
"""

from __future__ import annotations

import logging
import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .biboundary import max_one_hop
from .criteria import CriterionVerdict, Outcome, bilateration_criterion, trilateration_criterion
from .geom import (
    Annulus,
    AnnulusUnion,
    ConstraintRegion,
    HalfPlane,
    Point,
    SweptAnnulus,
    build_region,
    build_region_pair,
    geometric_epsilon,
    region_centroid,
)
from .netmodel import NetworkInstance, ScenarioConfig

log = logging.getLogger(__name__)

# clamped measurements sit on the epsilon boundary up to float round-off
_AUDIT_TOL = 1e-9


class SeedError(RuntimeError):
    """No triangle exists to anchor the localization."""


SCHEDULES = ("fifo", "trilateration_first", "most_anchored")


@dataclass(frozen=True)
class AfalaOptions:
    """Knobs separating the sound defaults from a literal lattice reading.

    swept_center: constrain distances to ``p`` with an annulus whose center
        slides over ``[d_op - eps, d_op + eps]`` instead of only its two ends.
    conservative: attach covers to regions so the eliminating condition holds
        for the continuous region, not just its lattice points.
    all_edges: let every edge of a localized triangle act as the localizing
        edge, instead of only its first two nodes.
    refine: polish the region centroid by a range least-squares fit to all
        localized neighbors, kept only if it stays on the verdict's side.
    close_triangles: after localizing ``i``, add every non-degenerate
        triangle ``i`` forms with two adjacent localized neighbors, not only
        ``(o, p, i)``.
    """

    swept_center: bool = True
    conservative: bool = True
    all_edges: bool = True
    refine: bool = True
    close_triangles: bool = True
    schedule: str = "trilateration_first"
    reach_penalty: bool = True

    def __post_init__(self):
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")


@dataclass(frozen=True)
class Frame:
    origin: np.ndarray
    ex: np.ndarray
    ey: np.ndarray

    def to_global(self, local) -> np.ndarray:
        local = np.asarray(local, dtype=float)
        return self.origin + local[..., :1] * self.ex + local[..., 1:2] * self.ey

    def to_local(self, pt) -> np.ndarray:
        d = np.asarray(pt, dtype=float) - self.origin
        return np.stack([d @ self.ex, d @ self.ey], axis=-1)


def make_frame(p_o, p_p, p_q) -> Optional[Frame]:
    """Frame at ``p_o``, x toward ``p_p``, y toward the side of ``p_q``.

    None when the three points are collinear or ``p_o == p_p``.
    """
    p_o, p_p, p_q = (np.asarray(v, dtype=float) for v in (p_o, p_p, p_q))
    span = p_p - p_o
    norm = math.hypot(*span)
    if norm == 0.0:
        return None
    ex = span / norm
    ey = np.array([-ex[1], ex[0]])
    side = (p_q - p_o) @ ey
    if side == 0.0:
        return None
    return Frame(p_o, ex, ey if side > 0 else -ey)


@dataclass(frozen=True)
class LocalizedTriangle:
    nodes: tuple

    def orientations(self, all_edges: bool = True):
        """``(o, p, q)`` triples; ``o < p`` for every edge choice."""
        return _orientations(self.nodes, all_edges)


@functools.lru_cache(maxsize=None)
def _orientations(nodes: tuple, all_edges: bool) -> tuple:
    a, b, c = nodes
    if not all_edges:
        return ((a, b, c),)
    return tuple((min(u, v), max(u, v), w) for (u, v), w in (((a, b), c), ((a, c), b), ((b, c), a)))


@dataclass
class FlipEvent:
    node: int
    triangle: tuple
    true_side: str
    estimated_side: str


@dataclass
class LocalizationState:
    n: int
    estimates: dict = field(default_factory=dict)
    unlocalized: set = field(default_factory=set)
    triangles: list = field(default_factory=list)
    flip_events: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    rounds: int = 0
    seed: Optional[tuple] = None
    attempts: int = 0
    triangle_keys: set = field(default_factory=set)

    def add_triangle(self, tri: "LocalizedTriangle") -> bool:
        key = frozenset(tri.nodes)
        if key in self.triangle_keys:
            return False
        self.triangle_keys.add(key)
        self.triangles.append(tri)
        return True

    @classmethod
    def fresh(cls, n: int) -> "LocalizationState":
        return cls(n=n, unlocalized=set(range(n)))

    @property
    def localized(self) -> dict:
        return self.estimates

    def estimate_array(self) -> np.ndarray:
        out = np.full((self.n, 2), np.nan)
        for k, v in self.estimates.items():
            out[k] = v
        return out


@dataclass(frozen=True)
class Localized:
    estimate: np.ndarray
    new_triangle: Optional[LocalizedTriangle]
    verdict: CriterionVerdict
    branch: str
    local_estimate: Point
    true_local: Optional[np.ndarray]
    contained: Optional[bool]
    flip: bool
    sizes: tuple


@dataclass(frozen=True)
class Skipped:
    reason: str
    verdict: Optional[CriterionVerdict] = None


# ---------------------------------------------------------------- seeding


def enumerate_triangles(inst: NetworkInstance) -> np.ndarray:
    """All 3-cliques ``(a, b, c)`` with ``a < b < c``, lexicographically sorted."""
    adj = ~np.isnan(inst.measured)
    out = []
    for a in range(inst.n):
        nb = np.flatnonzero(adj[a])
        nb = nb[nb > a]
        for k, b in enumerate(nb):
            rest = nb[k + 1 :]
            for c in rest[adj[b, rest]]:
                out.append((a, int(b), int(c)))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def is_special(sides, r: float) -> bool:
    """Acute, and every side longer than four fifths of ``r``."""
    a, b, c = sorted(sides)
    return a > 0.8 * r and a * a + b * b > c * c


def select_initial_triangle(inst: NetworkInstance, mode: str, rng: np.random.Generator) -> tuple:
    tris = enumerate_triangles(inst)
    if len(tris) == 0:
        raise SeedError("unlocalizable seed: the graph has no triangle")
    if mode == "special":
        m = inst.measured
        sides = np.stack([m[tris[:, 0], tris[:, 1]], m[tris[:, 0], tris[:, 2]], m[tris[:, 1], tris[:, 2]]], axis=1)
        ok = np.array([is_special(s, inst.r) for s in sides], dtype=bool)
        if ok.any():
            tris = tris[ok]
        else:
            log.warning("no special triangle in the instance; falling back to a random one")
    elif mode != "random":
        raise ValueError(f"unknown triangle mode {mode!r}")
    return tuple(int(v) for v in tris[rng.integers(len(tris))])


def seed_triangle(state: LocalizationState, inst: NetworkInstance, tri) -> LocalizationState:
    """Give the seed nodes their true coordinates; fixes the global frame."""
    if state.seed is not None:
        raise ValueError("state is already seeded")
    a, b, c = sorted(int(v) for v in tri)
    if not (inst.has_edge(a, b) and inst.has_edge(a, c) and inst.has_edge(b, c)):
        raise ValueError(f"{tri} is not a triangle of the instance")
    for v in (a, b, c):
        state.estimates[v] = inst.positions[v].copy()
        state.unlocalized.discard(v)
    state.add_triangle(LocalizedTriangle((a, b, c)))
    state.seed = (a, b, c)
    return state


# ------------------------------------------------------- region building


def _p_constraint(d_op, d, eps, swept):
    lo, hi = max(d - eps, 0.0), d + eps
    if swept:
        return AnnulusUnion.of(SweptAnnulus((max(d_op - eps, 0.0), 0.0), (d_op + eps, 0.0), lo, hi))
    return AnnulusUnion.of(Annulus((d_op - eps, 0.0), lo, hi), Annulus((d_op + eps, 0.0), lo, hi))


def local_constraints(d_op: float, d_o: float, d_p: float, eps: float, swept: bool = True) -> tuple:
    """Distance constraints to ``o`` (at the origin) and ``p`` (near ``(d_op, 0)``)."""
    o_con = AnnulusUnion.of(Annulus((0.0, 0.0), max(d_o - eps, 0.0), d_o + eps))
    return (o_con, _p_constraint(d_op, d_p, eps, swept))


def q_region(d_op, d_oq, d_pq, eps, h, *, swept=True, cover=True) -> ConstraintRegion:
    return build_region(local_constraints(d_op, d_oq, d_pq, eps, swept), HalfPlane.upper(), h, cover=cover)


def i_regions(d_op, d_oi, d_pi, eps, h, *, swept=True, cover=True):
    """``(ri1, ri2)``: candidates on the side of ``q`` and on the far side."""
    return build_region_pair(local_constraints(d_op, d_oi, d_pi, eps, swept), HalfPlane.upper(), h, cover=cover)


def configuration_verdict(d_op, d_oq, d_pq, d_oi, d_pi, eps, h, *, d_qi=None, guaranteed=None,
                          swept=True, cover=True):
    """Verdict for one (o, p, q, i) configuration from measured distances alone.

    Uses the trilateration test when ``d_qi`` is given, otherwise the
    bilateration test with threshold ``guaranteed``.  ``eps`` is the
    geometric budget (already at least ``h``).
    """
    rq1 = q_region(d_op, d_oq, d_pq, eps, h, swept=swept, cover=cover)
    ri1, ri2 = i_regions(d_op, d_oi, d_pi, eps, h, swept=swept, cover=cover)
    if rq1.is_empty or (ri1.is_empty and ri2.is_empty):
        return CriterionVerdict(Outcome.INCONCLUSIVE, {"empty": True}), (rq1, ri1, ri2)
    if d_qi is not None:
        verdict = trilateration_criterion(rq1, ri1, ri2, d_qi, eps)
    else:
        verdict = bilateration_criterion(rq1, ri1, ri2, guaranteed)
    return verdict, (rq1, ri1, ri2)


# ----------------------------------------------------------- flip checks


def true_local_coords(inst: NetworkInstance, o: int, p: int, q: int, i: int) -> Optional[np.ndarray]:
    frame = make_frame(inst.positions[o], inst.positions[p], inst.positions[q])
    if frame is None:
        return None
    return frame.to_local(inst.positions[i])


def side_of(outcome: Outcome) -> str:
    return "H" if outcome is Outcome.UNIQUE_UPPER else "H'"


def detect_flip(true_local_y: float, outcome: Outcome) -> bool:
    """True when the true location sits across the localizing edge from the kept region.

    ``y == 0`` belongs to H'.
    """
    if not outcome.is_unique:
        raise ValueError("flip detection needs a unique verdict")
    true_side = "H" if true_local_y > 0 else "H'"
    return true_side != side_of(outcome)


# ------------------------------------------------------------ main loop


def refine_estimate(start, i, inst: NetworkInstance, estimates: dict, frame: Frame, outcome: Outcome,
                    reach: Optional[np.ndarray] = None) -> np.ndarray:
    """Range least-squares from ``start`` over all localized neighbors of ``i``.

    With ``reach`` (per-node guaranteed reach, ``max(D^1) - eps``), localized
    non-neighbors closer than the pair's guaranteed communication distance
    add a one-sided penalty.  Falls back to ``start`` if the fit lands on the
    side of the localizing edge that the verdict ruled out.
    """
    anchors = sorted(j for j in inst.neighbors[i] if j in estimates)
    if len(anchors) < 3:
        return start
    pts = np.array([estimates[j] for j in anchors])
    ranges = inst.measured[i, anchors]
    if reach is not None:
        far = sorted(j for j in estimates if j != i and j not in inst.neighbors[i])
        far_pts = np.array([estimates[j] for j in far]).reshape(-1, 2)
        bound = np.minimum(reach[i], reach[far]) if far else np.empty(0)
    else:
        far_pts, bound = np.empty((0, 2)), np.empty(0)

    def resid(x):
        r = np.hypot(*(pts - x).T) - ranges
        if len(bound):
            r = np.concatenate([r, np.minimum(np.hypot(*(far_pts - x).T) - bound, 0.0)])
        return r

    fit = least_squares(resid, start, method="trf" if len(bound) else "lm").x
    y = frame.to_local(fit)[1]
    keep = y > 0 if outcome is Outcome.UNIQUE_UPPER else y <= 0
    return fit if keep else start


class _Context:
    """Per-run caches over an immutable instance."""

    def __init__(self, inst: NetworkInstance, epsilon: float, h: float, options: AfalaOptions):
        self.inst = inst
        self.epsilon = epsilon
        self.h = h
        self.eps_g = geometric_epsilon(epsilon, h)
        self.options = options
        self.max_d1 = max_one_hop(inst)
        self._q_regions = {}

    def q_region(self, o, p, q) -> ConstraintRegion:
        key = (o, p, q)
        if key not in self._q_regions:
            m = self.inst.measured
            self._q_regions[key] = q_region(
                m[o, p], m[o, q], m[p, q], self.eps_g, self.h,
                swept=self.options.swept_center, cover=self.options.conservative,
            )
        return self._q_regions[key]


def localize_node(
    state: LocalizationState,
    inst: NetworkInstance,
    i: int,
    tri: tuple,
    epsilon: float,
    h: float,
    options: AfalaOptions = AfalaOptions(),
    _ctx: Optional[_Context] = None,
):
    """Try to place ``i`` uniquely using the localized triangle ``tri = (o, p, q)``."""
    ctx = _ctx or _Context(inst, epsilon, h, options)
    o, p, q = tri
    if i not in state.unlocalized:
        raise ValueError(f"node {i} is already localized")
    if not (inst.has_edge(i, o) and inst.has_edge(i, p)):
        return Skipped("needs two localized neighbors")
    m = inst.measured
    eps = ctx.eps_g
    rq1 = ctx.q_region(o, p, q)
    if rq1.is_empty:
        return Skipped("empty q region")
    ri1, ri2 = i_regions(m[o, p], m[o, i], m[p, i], eps, h, swept=options.swept_center, cover=options.conservative)
    if ri1.is_empty and ri2.is_empty:
        return Skipped("empty regions")

    if inst.has_edge(i, q):
        branch = "trilateration"
        if m[q, i] <= 0:
            return Skipped("zero range to q")
        verdict = trilateration_criterion(rq1, ri1, ri2, float(m[q, i]), eps)
    else:
        branch = "bilateration"
        dqi = float(min(ctx.max_d1[q], ctx.max_d1[i]) - eps)
        verdict = bilateration_criterion(rq1, ri1, ri2, dqi)
    if not verdict.is_unique:
        return Skipped("inconclusive", verdict)

    kept = ri1 if verdict.outcome is Outcome.UNIQUE_UPPER else ri2
    local = region_centroid(kept)
    frame = make_frame(state.estimates[o], state.estimates[p], state.estimates[q])
    if frame is None:
        return Skipped("degenerate frame", verdict)
    estimate = frame.to_global(np.array(local))
    if options.refine:
        reach = ctx.max_d1 - ctx.eps_g if options.reach_penalty else None
        estimate = refine_estimate(estimate, i, inst, state.estimates, frame, verdict.outcome, reach)

    truth = true_local_coords(inst, o, p, q, i)
    contained = bool(kept.contains(truth[0], truth[1], tol=_AUDIT_TOL)) if truth is not None else None
    flip = detect_flip(truth[1], verdict.outcome) if truth is not None else False
    new_tri = LocalizedTriangle((o, p, i)) if abs(local.y) > h else None
    return Localized(
        estimate, new_tri, verdict, branch, local, truth, contained, flip, (len(rq1), len(ri1), len(ri2))
    )


def min_altitude(a, b, c) -> float:
    """Smallest height of the triangle ``abc``; 0 when degenerate."""
    a, b, c = (np.asarray(v, dtype=float) for v in (a, b, c))
    area2 = abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    longest = max(math.hypot(*(b - a)), math.hypot(*(c - a)), math.hypot(*(c - b)))
    return area2 / longest if longest > 0 else 0.0


def close_triangles(state: LocalizationState, inst: NetworkInstance, i: int, h: float) -> int:
    """Add triangles ``(j, k, i)`` over adjacent localized neighbor pairs, ascending ``(j, k)``."""
    est = state.estimates
    loc = sorted(j for j in inst.neighbors[i] if j in est and j != i)
    added = 0
    for a_idx, j in enumerate(loc):
        for k in loc[a_idx + 1:]:
            if not inst.has_edge(j, k) or min_altitude(est[j], est[k], est[i]) <= h:
                continue
            added += state.add_triangle(LocalizedTriangle((j, k, i)))
    return added


def _apply(state: LocalizationState, i: int, tri: tuple, res: Localized, inst=None, h=None):
    state.estimates[i] = res.estimate
    state.unlocalized.discard(i)
    if res.new_triangle is not None:
        state.add_triangle(res.new_triangle)
    if inst is not None:
        close_triangles(state, inst, i, h)
    true_side = "H" if res.true_local is not None and res.true_local[1] > 0 else "H'"
    est_side = side_of(res.verdict.outcome)
    if res.flip:
        state.flip_events.append(FlipEvent(i, tri, true_side, est_side))
    state.trace.append(
        {
            "node": i,
            "triangle": list(tri),
            "branch": res.branch,
            "verdict": res.verdict.outcome.value,
            "region_sizes": list(res.sizes),
            "flip": res.flip,
            "contained": res.contained,
            "first_ring": set(tri) <= set(state.seed),
            "round": state.rounds,
        }
    )


def run_afala(
    inst: NetworkInstance,
    cfg: ScenarioConfig,
    rng: Optional[np.random.Generator] = None,
    options: AfalaOptions = AfalaOptions(),
    seed_tri: Optional[tuple] = None,
) -> LocalizationState:
    """Seed, then sweep unlocalized nodes against localized triangles until nothing changes.

    Order is fixed: nodes ascending, triangles in insertion order, edges of a
    triangle as listed by ``orientations``.  A (node, oriented triangle) pair
    is evaluated at most once because its verdict depends on measured
    distances only.  See ``AfalaOptions.schedule`` for how the two branches
    are interleaved.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    state = LocalizationState.fresh(inst.n)
    tri = seed_tri if seed_tri is not None else select_initial_triangle(inst, cfg.triangle_mode, rng)
    seed_triangle(state, inst, tri)
    ctx = _Context(inst, cfg.epsilon, cfg.h, options)
    if options.schedule == "fifo":
        _run_fifo(state, inst, ctx)
    elif options.schedule == "trilateration_first":
        _run_trilateration_first(state, inst, ctx)
    else:
        _run_most_anchored(state, inst, ctx)
    return state


def _attempt(state, inst, ctx, i, tri) -> bool:
    state.attempts += 1
    res = localize_node(state, inst, i, tri, ctx.epsilon, ctx.h, ctx.options, ctx)
    if isinstance(res, Localized):
        _apply(state, i, tri, res, inst if ctx.options.close_triangles else None, ctx.h)
        return True
    return False


def _run_fifo(state, inst, ctx):
    tried = set()
    nbrs = inst.neighbors
    while True:
        state.rounds += 1
        before = len(state.estimates)
        for i in sorted(state.unlocalized):
            ni = nbrs[i]
            t = 0
            done = False
            while t < len(state.triangles) and not done:
                for o, p, q in state.triangles[t].orientations(ctx.options.all_edges):
                    if o not in ni or p not in ni or (i, o, p, q) in tried:
                        continue
                    tried.add((i, o, p, q))
                    if _attempt(state, inst, ctx, i, (o, p, q)):
                        done = True
                        break
                t += 1
        if len(state.estimates) == before:
            break


def _run_trilateration_first(state, inst, ctx):
    """Trilateration to a fixpoint, then one bilateration pass, repeated.

    Each node keeps a scan position into the triangle list, so triangles are
    visited once per node; orientations whose ``q`` is not a neighbor are
    queued for the bilateration step in the order they were met.
    """
    nbrs = inst.neighbors
    scan = [0] * inst.n
    queued = [[] for _ in range(inst.n)]
    while True:
        state.rounds += 1
        progress = False
        changed = True
        while changed:
            changed = False
            for i in sorted(state.unlocalized):
                ni = nbrs[i]
                done = False
                while scan[i] < len(state.triangles) and not done:
                    for o, p, q in state.triangles[scan[i]].orientations(ctx.options.all_edges):
                        if o not in ni or p not in ni:
                            continue
                        if q not in ni:
                            queued[i].append((o, p, q))
                        elif _attempt(state, inst, ctx, i, (o, p, q)):
                            done = changed = progress = True
                            break
                    scan[i] += 1
        for i in sorted(state.unlocalized):
            pending = queued[i]
            while pending:
                if _attempt(state, inst, ctx, i, pending.pop(0)):
                    progress = True
                    break
        if not progress:
            break


def _run_most_anchored(state, inst, ctx):
    """Localize one node at a time, choosing the best-supported candidate.

    Verdicts depend on measured distances only, so each (node, oriented
    triangle) pair is judged once and the first Unique one is remembered.
    Among nodes holding such a verdict, the next to be placed is the one
    with a trilateration verdict, then the most localized neighbors, then
    the lowest id.
    """
    nbrs = inst.neighbors
    scan = [0] * inst.n
    found = {}
    while True:
        state.rounds += 1
        for i in sorted(state.unlocalized):
            if i in found:
                continue
            ni = nbrs[i]
            while scan[i] < len(state.triangles) and i not in found:
                for o, p, q in state.triangles[scan[i]].orientations(ctx.options.all_edges):
                    if o not in ni or p not in ni:
                        continue
                    state.attempts += 1
                    res = localize_node(state, inst, i, (o, p, q), ctx.epsilon, ctx.h, ctx.options, ctx)
                    if isinstance(res, Localized):
                        found[i] = ((o, p, q), res.branch)
                        break
                scan[i] += 1
        if not found:
            break
        est = state.estimates

        def rank(i):
            support = sum(1 for j in nbrs[i] if j in est)
            return (found[i][1] == "trilateration", support, -i)

        best = max(found, key=rank)
        tri, _ = found.pop(best)
        res = localize_node(state, inst, best, tri, ctx.epsilon, ctx.h, ctx.options, ctx)
        _apply(state, best, tri, res, inst if ctx.options.close_triangles else None, ctx.h)
