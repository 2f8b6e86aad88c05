"""Shared generators and brute-force oracles for the test suite."""

from __future__ import annotations

import numpy as np

from flipfree.afala import configuration_verdict

R = 30.0


def random_configuration(rng: np.random.Generator, r: float = R):
    """Random (o, p, q, i) in the local frame with clamped noisy ranges.

    Returns ``(true_points, ranges, eps, kwargs)`` where ``kwargs`` feeds
    ``configuration_verdict``: ``d_qi`` when q and i are in range, else the
    sound bilateration threshold ``r - eps``.
    """
    while True:
        eps = float(rng.uniform(0.3, 1.5))
        d_op = float(rng.uniform(0.3 * r, r))
        o, p = np.zeros(2), np.array([d_op, 0.0])
        q = rng.uniform([-r, 0.5], [2 * r, r])
        i = rng.uniform([-r, -r], [2 * r, r])
        if max(np.hypot(*q), np.hypot(*(q - p)), np.hypot(*i), np.hypot(*(i - p))) > r:
            continue
        if abs(i[1]) < 0.5:
            continue
        pts = {"o": o, "p": p, "q": q, "i": i}

        def meas(a, b):
            d = float(np.hypot(*(pts[a] - pts[b])))
            return max(d + float(rng.uniform(-eps, eps)), 0.0)

        ranges = {k: meas(*k) for k in ("oq", "pq", "oi", "pi")}
        d_qi = float(np.hypot(*(q - i)))
        if d_qi <= r:
            kw = {"d_qi": max(meas("q", "i"), 1e-6)}
        else:
            kw = {"guaranteed": r - eps}
        return pts, ranges, eps, kw, d_op


def verdict_for(rng_cfg, h, **opts):
    pts, ranges, eps, kw, d_op = rng_cfg
    return configuration_verdict(d_op, ranges["oq"], ranges["pq"], ranges["oi"], ranges["pi"], max(eps, h), h, **kw, **opts)


# lines printed by the acceptance suite at the end of the session
ACCEPTANCE_LINES: list = []


def report(number: int, ok: bool, detail: str):
    ACCEPTANCE_LINES.append(f"CRITERION {number}: {'PASS' if ok else 'FAIL'} {detail}")


def sample_region(region, k: int, rng: np.random.Generator, batch: int = 20000) -> np.ndarray:
    """Up to ``k`` uniform samples of the region's continuous constraint set.

    Rejection sampling over the constraints' common bounding box.
    """
    boxes = np.array([c.bbox() for c in region.constraints])
    x0, x1 = boxes[:, 0].max(), boxes[:, 1].min()
    y0, y1 = boxes[:, 2].max(), boxes[:, 3].min()
    if x0 > x1 or y0 > y1:
        return np.empty((0, 2))
    out = []
    have = 0
    for _ in range(50):
        pts = rng.uniform([x0, y0], [x1, y1], size=(batch, 2))
        pts = pts[region.contains(pts[:, 0], pts[:, 1])]
        out.append(pts)
        have += len(pts)
        if have >= k:
            break
    pts = np.concatenate(out)
    return pts[:k]
