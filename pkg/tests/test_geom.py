import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flipfree.geom import (
    Annulus,
    AnnulusUnion,
    EmptyRegionError,
    HalfPlane,
    Point,
    SweptAnnulus,
    build_region,
    build_region_pair,
    count_pairs_within,
    default_grid_res,
    geometric_epsilon,
    interval_pair_stats,
    max_pair_distance,
    min_pair_distance,
    region_centroid,
)

FAST = settings(max_examples=40, deadline=None)


def one(center, lo, hi):
    return AnnulusUnion.of(Annulus(center, lo, hi))


def brute_lattice(constraints, hp, h, span=40):
    """Every lattice point in a generous box, tested one by one."""
    out = []
    for m in range(-span, span + 1):
        for k in range(-span, span + 1):
            x, y = m * h, k * h
            if hp.contains(x, y) and all(c.contains(x, y) for c in constraints):
                out.append((x, y))
    return sorted(out)


# ---------------------------------------------------------------- annulus


@pytest.mark.parametrize("pt,expected", [((1.5, 0), True), ((0.5, 0), False), ((2, 0), True)])
def test_annulus_contains(pt, expected):
    assert bool(Annulus((0, 0), 1, 2).contains(*pt)) is expected


def test_annulus_rejects_bad_radii():
    with pytest.raises(ValueError):
        Annulus((0, 0), 3, 2)
    with pytest.raises(ValueError):
        Annulus((0, 0), -1, 2)


def test_annulus_inner_boundary_closed():
    assert Annulus((0, 0), 1, 2).contains(0, 1)


def test_swept_annulus_covers_every_center_on_segment():
    sw = SweptAnnulus((9.0, 0.0), (11.0, 0.0), 4.0, 5.0)
    rng = np.random.default_rng(3)
    for _ in range(200):
        cx = rng.uniform(9, 11)
        t = rng.uniform(0, 2 * np.pi)
        rad = rng.uniform(4, 5)
        assert sw.contains(cx + rad * np.cos(t), rad * np.sin(t))


def test_swept_annulus_excludes_points_no_center_reaches():
    sw = SweptAnnulus((9.0, 0.0), (11.0, 0.0), 4.0, 5.0)
    assert not sw.contains(10.0, 0.0)
    assert not sw.contains(10.0, 6.0)
    assert sw.contains(10.0, 4.5)


def test_halfplane_boundary_belongs_to_lower():
    assert not HalfPlane.upper().contains(3.0, 0.0)
    assert HalfPlane.lower().contains(3.0, 0.0)
    assert HalfPlane.upper().complement() == HalfPlane.lower()


def test_grid_res_defaults():
    assert default_grid_res(1.0) == 0.25
    assert default_grid_res(0.2) == pytest.approx(0.1)
    assert default_grid_res(0.0) == 0.05
    assert geometric_epsilon(0.0, 0.25) == 0.25
    assert geometric_epsilon(1.0, 0.25) == 1.0


# ---------------------------------------------------------------- regions


def test_two_annuli_region_matches_bruteforce():
    cons = [one((0, 0), 4, 6), one((8, 0), 4, 6)]
    reg = build_region(cons, HalfPlane.upper(), 0.5)
    # independent full scan: 18 points with centroid (4, 23/9)
    assert len(reg) == 18
    assert sorted(map(tuple, reg.points)) == brute_lattice(cons, HalfPlane.upper(), 0.5)
    cx, cy = region_centroid(reg)
    assert cx == pytest.approx(4.0)
    assert cy == pytest.approx(23 / 9)
    assert math.hypot(cx - 4, cy - 3) < 1.0


def test_two_annuli_region_dense_oracle():
    cons = [one((0, 0), 4, 6), one((8, 0), 4, 6)]
    h = 0.5
    reg = build_region(cons, HalfPlane.upper(), h, cover=True)
    assert all(reg.contains(x, y) for x, y in reg.points)
    fine = build_region(cons, HalfPlane.upper(), h / 10)
    # every point of the continuous set is within the cover radius of a cover point
    from scipy.spatial import cKDTree

    d, _ = cKDTree(reg.cover).query(fine.points)
    assert d.max() <= reg.cover_radius + 1e-9


def test_far_annuli_are_empty():
    reg = build_region([one((0, 0), 1, 2), one((10, 0), 1, 2)], HalfPlane.upper(), 0.5)
    assert reg.is_empty
    with pytest.raises(EmptyRegionError):
        region_centroid(reg)


def test_union_constraint_contains_shared_point():
    u = AnnulusUnion.of(Annulus((-1, 0), 4, 6), Annulus((1, 0), 4, 6))
    reg = build_region([u], HalfPlane.upper(), 0.5)
    assert (0.0, 5.0) in set(map(tuple, reg.points))


def test_build_rejects_bad_input():
    with pytest.raises(ValueError):
        build_region([one((0, 0), 1, 2)], HalfPlane.upper(), 0.0)
    with pytest.raises(ValueError):
        build_region([], HalfPlane.upper(), 0.5)


def test_pair_split_partitions_lattice():
    cons = [one((0, 0), 3, 5), one((6, 0), 3, 5)]
    up, low = build_region_pair(cons, HalfPlane.upper(), 0.25)
    both = brute_lattice(cons, HalfPlane(0, 1, 1000, False), 0.25, span=60)
    assert sorted(map(tuple, np.vstack([up.points, low.points]))) == both
    assert (up.points[:, 1] > 0).all()
    assert (low.points[:, 1] <= 0).all()


centers = st.tuples(st.floats(-4, 4), st.floats(-4, 4))
annuli = st.builds(
    lambda c, lo, w: (c, lo, lo + w), centers, st.floats(0, 5), st.floats(0.2, 3)
)


@FAST
@given(st.lists(annuli, min_size=1, max_size=3), st.sampled_from([0.25, 0.5]), st.booleans())
def test_membership_and_completeness(specs, h, upper):
    cons = [one(*s) for s in specs]
    hp = HalfPlane.upper() if upper else HalfPlane.lower()
    reg = build_region(cons, hp, h)
    assert all(reg.contains(x, y) for x, y in reg.points)
    assert sorted(map(tuple, reg.points)) == brute_lattice(cons, hp, h, span=int(12 / h))


@FAST
@given(st.lists(annuli, min_size=1, max_size=3), st.sampled_from([0.25, 0.5]))
def test_refinement_keeps_coarse_points(specs, h):
    cons = [one(*s) for s in specs]
    coarse = build_region(cons, HalfPlane.upper(), h)
    fine = set(map(tuple, np.round(build_region(cons, HalfPlane.upper(), h / 2).points, 9)))
    assert set(map(tuple, np.round(coarse.points, 9))) <= fine


@FAST
@given(st.floats(0.5, 8), st.floats(0, 6), st.floats(0.3, 3), st.floats(0, 6), st.floats(0.3, 3))
def test_mirror_symmetry(d_op, lo_o, w_o, lo_p, w_p):
    cons = [one((0, 0), lo_o, lo_o + w_o), one((d_op, 0), lo_p, lo_p + w_p)]
    h = 0.25
    up, low = build_region_pair(cons, HalfPlane.upper(), h)
    mirrored = {(x, -y) for x, y in map(tuple, np.round(up.points, 9))}
    lower = set(map(tuple, np.round(low.points, 9)))
    # lattice is symmetric about y=0, so mirror images match except on the axis
    assert mirrored == {p for p in lower if p[1] < 0}


@FAST
@given(st.floats(0.5, 8), st.floats(0, 6), st.floats(0.3, 3), st.floats(0, 6), st.floats(0.3, 3))
def test_cover_contains_lattice_and_continuous_samples(d_op, lo_o, w_o, lo_p, w_p):
    cons = [one((0, 0), lo_o, lo_o + w_o), one((d_op, 0), lo_p, lo_p + w_p)]
    reg = build_region(cons, HalfPlane.upper(), 0.5, cover=True)
    cover = set(map(tuple, reg.cover))
    assert set(map(tuple, reg.points)) <= cover
    rng = np.random.default_rng(0)
    pts = rng.uniform([-10, 0], [20, 10], size=(4000, 2))
    inside = pts[reg.contains(pts[:, 0], pts[:, 1])]
    if len(inside):
        d = np.min(np.hypot(*(inside[:, None, :] - reg.cover[None, :, :]).transpose(2, 0, 1)), axis=1)
        assert d.max() <= reg.cover_radius + 1e-9


# ---------------------------------------------------------------- pair stats


def test_pair_stats_examples():
    assert interval_pair_stats([(0, 0)], [(5, 0)], 4, 6) == (0, 1, 0, 5.0, 5.0)
    assert interval_pair_stats([(0, 0), (1, 0)], [(4, 0)], 10, 11) == (2, 0, 0, 3.0, 4.0)
    disk = np.random.default_rng(1).uniform(-1, 1, (50, 2))
    s = interval_pair_stats(disk, disk, 0, np.inf)
    assert s.n_within == 2500
    assert s.d_min == 0.0


def test_pair_stats_errors():
    with pytest.raises(EmptyRegionError):
        interval_pair_stats(np.empty((0, 2)), [(0, 0)], 0, 1)
    with pytest.raises(ValueError):
        interval_pair_stats([(0, 0)], [(1, 0)], 2, 1)


coord = st.floats(-10, 10).map(lambda v: round(v, 6))
point_sets = st.lists(st.tuples(coord, coord), min_size=1, max_size=25)


@FAST
@given(point_sets, point_sets, st.floats(0, 15), st.floats(0, 15))
def test_pair_stats_match_full_scan(a, b, x, y):
    lo, hi = min(x, y), max(x, y)
    A, B = np.array(a), np.array(b)
    d = np.hypot(*(A[:, None, :] - B[None, :, :]).transpose(2, 0, 1)).ravel()
    s = interval_pair_stats(A, B, lo, hi)
    assert s.n_below + s.n_within + s.n_above == len(A) * len(B)
    assert (s.n_below, s.n_within, s.n_above) == ((d < lo).sum(), ((d >= lo) & (d <= hi)).sum(), (d > hi).sum())
    assert s.d_min <= s.d_max
    assert s.d_min == pytest.approx(d.min(), abs=1e-9)
    assert s.d_max == pytest.approx(d.max(), abs=1e-9)
    assert count_pairs_within(A, B, lo, hi) == s.n_within
    assert max_pair_distance(A, B) == pytest.approx(d.max(), abs=1e-9)
    assert min_pair_distance(A, B) == pytest.approx(d.min(), abs=1e-9)


# ---------------------------------------------------------------- centroid


@pytest.mark.parametrize(
    "pts,expected",
    [([(0, 0), (2, 0)], (1, 0)), ([(1, 1)], (1, 1)), ([(0, 1), (0, -1), (2, 1), (2, -1)], (1, 0))],
)
def test_centroid(pts, expected):
    assert region_centroid(pts) == Point(*map(float, expected))
