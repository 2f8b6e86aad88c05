"""Comparison localizers without flip protection.

``run_tla`` is plain iterative trilateration: a node is placed once three
non-collinear neighbors are known.  ``run_naive_bilateration`` walks the
localized triangles like AFALA but settles the two-candidate ambiguity by
connectivity consistency alone, standing in for shadow-edge bilateration.
"""

from __future__ import annotations

import itertools
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .afala import (
    FlipEvent,
    LocalizationState,
    LocalizedTriangle,
    close_triangles,
    seed_triangle,
    select_initial_triangle,
)
from .netmodel import NetworkInstance, ScenarioConfig

# smallest anchor-triangle area treated as non-collinear
COLLINEAR_AREA = 1e-6
# naive bilateration keeps every triangle, even flat ones: placement only uses the edge
MIN_HEIGHT = -1.0


def _tri_area(a, b, c) -> float:
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


def _side(a, b, pt) -> float:
    return float((b[0] - a[0]) * (pt[1] - a[1]) - (b[1] - a[1]) * (pt[0] - a[0]))


def relative_sides(est_i, est_o, est_p, est_q, true_i, true_o, true_p, true_q) -> tuple:
    """Side of line o-p holding ``i``, as "H" (with ``q``) or "H'", truly and as estimated.

    Points on the line count as H'.
    """
    est_same = _side(est_o, est_p, est_i) * _side(est_o, est_p, est_q) > 0
    true_same = _side(true_o, true_p, true_i) * _side(true_o, true_p, true_q) > 0
    return ("H" if true_same else "H'"), ("H" if est_same else "H'")


def _log_flip(state, i, tri, pos, est):
    o, p, q = tri
    true_side, est_side = relative_sides(est[i], est[o], est[p], est[q], pos[i], pos[o], pos[p], pos[q])
    flip = true_side != est_side
    if flip:
        state.flip_events.append(FlipEvent(i, tuple(tri), true_side, est_side))
    return flip


def multilaterate(anchors: np.ndarray, dists: np.ndarray) -> np.ndarray:
    """Least-squares position from anchor positions and ranges.

    Linearized solve for the start point, then a Gauss-Newton polish on the
    range residuals.
    """
    a0, d0 = anchors[0], dists[0]
    A = 2 * (anchors[1:] - a0)
    b = d0**2 - dists[1:] ** 2 + (anchors[1:] ** 2).sum(1) - (a0**2).sum()
    x0 = np.linalg.lstsq(A, b, rcond=None)[0]

    def resid(x):
        return np.hypot(*(anchors - x).T) - dists

    return least_squares(resid, x0, method="lm").x


def _first_anchor_triple(nodes, est):
    for trio in itertools.combinations(nodes, 3):
        if _tri_area(*(est[k] for k in trio)) > COLLINEAR_AREA:
            return trio
    return None


def run_tla(inst: NetworkInstance, cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None,
            seed_tri: Optional[tuple] = None) -> LocalizationState:
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    state = LocalizationState.fresh(inst.n)
    tri = seed_tri if seed_tri is not None else select_initial_triangle(inst, cfg.triangle_mode, rng)
    seed_triangle(state, inst, tri)
    est = state.estimates
    pos = inst.positions
    while True:
        state.rounds += 1
        before = len(est)
        for i in sorted(state.unlocalized):
            anchors = sorted(j for j in inst.neighbors[i] if j in est)
            if len(anchors) < 3:
                continue
            trio = _first_anchor_triple(anchors, est)
            if trio is None:
                continue
            x = multilaterate(np.array([est[j] for j in anchors]), inst.measured[i, anchors])
            est[i] = x
            state.unlocalized.discard(i)
            flip = _log_flip(state, i, trio, pos, est)
            state.trace.append({"node": i, "triangle": list(trio), "branch": "multilateration",
                                "anchors": len(anchors), "flip": flip, "round": state.rounds})
        if len(est) == before:
            break
    return state


def circle_candidates(c0, r0, c1, r1):
    """The two intersections of circles, or the best single point when they miss."""
    c0, c1 = np.asarray(c0, float), np.asarray(c1, float)
    d = float(np.hypot(*(c1 - c0)))
    ex = (c1 - c0) / d
    ey = np.array([-ex[1], ex[0]])
    x = (d * d + r0 * r0 - r1 * r1) / (2 * d)
    y2 = r0 * r0 - x * x
    if y2 <= 0:
        pt = c0 + np.clip(x, -r0, r0) * ex
        return pt, pt
    y = np.sqrt(y2)
    return c0 + x * ex + y * ey, c0 + x * ex - y * ey


def _consistency(cand, i, inst, est, r, skip):
    """(adjacency mismatches, squared range residual) against localized nodes."""
    mismatches = 0
    resid = 0.0
    for k, pk in est.items():
        if k in skip:
            continue
        dist = float(np.hypot(*(cand - pk)))
        adjacent = inst.has_edge(i, k)
        if adjacent != (dist <= r):
            mismatches += 1
        if adjacent:
            resid += (dist - inst.measured[i, k]) ** 2
    return mismatches, resid


def run_naive_bilateration(inst: NetworkInstance, cfg: ScenarioConfig, rng: Optional[np.random.Generator] = None,
                           seed_tri: Optional[tuple] = None) -> LocalizationState:
    """Bilaterate from any localized triangle edge; pick the candidate that best fits the graph.

    Candidates are ranked by adjacency mismatches to localized nodes, then by
    range residual to localized neighbors; exact ties are a coin flip.  No
    error budget is considered.
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    state = LocalizationState.fresh(inst.n)
    tri = seed_tri if seed_tri is not None else select_initial_triangle(inst, cfg.triangle_mode, rng)
    seed_triangle(state, inst, tri)
    est = state.estimates
    pos = inst.positions
    h = MIN_HEIGHT
    while True:
        state.rounds += 1
        before = len(est)
        for i in sorted(state.unlocalized):
            ni = inst.neighbors[i]
            placed = False
            t = 0
            while t < len(state.triangles) and not placed:
                for o, p, q in state.triangles[t].orientations():
                    if o not in ni or p not in ni or np.array_equal(est[o], est[p]):
                        continue
                    c1, c2 = circle_candidates(est[o], inst.measured[o, i], est[p], inst.measured[p, i])
                    s1 = _consistency(c1, i, inst, est, cfg.r, (o, p))
                    s2 = _consistency(c2, i, inst, est, cfg.r, (o, p))
                    if s1 == s2:
                        x = c1 if rng.random() < 0.5 else c2
                    else:
                        x = c1 if s1 < s2 else c2
                    est[i] = x
                    state.unlocalized.discard(i)
                    flip = _log_flip(state, i, (o, p, q), pos, est)
                    if abs(_side(est[o], est[p], x)) / max(np.hypot(*(est[p] - est[o])), 1e-12) > h:
                        state.add_triangle(LocalizedTriangle((o, p, i)))
                    close_triangles(state, inst, i, h)
                    state.trace.append({"node": i, "triangle": [o, p, q], "branch": "bilateration",
                                        "flip": flip, "round": state.rounds})
                    placed = True
                    break
                t += 1
        if len(est) == before:
            break
    return state
