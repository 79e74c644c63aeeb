import math

import numpy as np
import pytest

from oracles import bf_cluster_locations, bf_deltas, random_slot_points, two_blob_instance
from regiondet.partition import (
    CoverageMismatch,
    DegenerateValues,
    IsolatedVertex,
    TooManyClusters,
    cluster_locations,
    cluster_readings_cfdp,
    compute_deltas,
    intersect,
    location_density,
    LocationClustering,
    ReadingClustering,
)
from regiondet.triangulation import build_delaunay


# --- location density ------------------------------------------------------

def test_density_equal_edges_hits_floor():
    # equilateral triangle: every vertex sees two edges of identical length
    g = build_delaunay([("A", 0, 0), ("B", 1, 0), ("C", 0.5, math.sqrt(3) / 2)])
    rho = location_density(g, "A")
    assert rho == pytest.approx(-math.log(1e-12))


def test_density_edge_lengths_one_and_three():
    # collinear path 0 - 1 - 4: middle vertex has incident lengths {1, 3},
    # population std 1, so the density is exactly 0
    g = build_delaunay([("L", 0, 0), ("M", 1, 0), ("R", 4, 0)])
    assert location_density(g, "M") == pytest.approx(0.0, abs=1e-12)


def test_density_single_vertex_isolated():
    g = build_delaunay([("A", 0.0, 0.0)])
    with pytest.raises(IsolatedVertex):
        location_density(g, "A")


def test_boundary_vertices_less_dense_than_interior():
    rng = np.random.default_rng(3)
    pts, _ = two_blob_instance(rng)
    g = build_delaunay(pts)
    from scipy.spatial import ConvexHull

    xy = np.array([(x, y) for _, x, y in pts])
    hull = {pts[i][0] for i in ConvexHull(xy).vertices}
    interior = [p[0] for p in pts if p[0] not in hull]
    rho = {v: location_density(g, v) for v, _, _ in pts}
    assert np.mean([rho[v] for v in interior]) > np.mean([rho[v] for v in hull])


# --- deltas ----------------------------------------------------------------

def test_two_point_deltas():
    coords = {"A": (0.0, 0.0), "B": (5.0, 0.0)}
    delta, parent = compute_deltas({"A": 2.0, "B": 1.0}, coords)
    assert delta == {"A": 5.0, "B": 5.0}
    assert parent == {"B": "A"}


def test_density_tie_broken_by_id():
    coords = {"A": (0.0, 0.0), "B": (3.0, 0.0)}
    delta, parent = compute_deltas({"A": 1.0, "B": 1.0}, coords)
    # equal densities: A (lower id) outranks B
    assert parent == {"B": "A"}
    assert delta["B"] == 3.0


def test_deltas_match_brute_force():
    rng = np.random.default_rng(17)
    for _ in range(25):
        n = int(rng.integers(3, 21))
        pts = random_slot_points(rng, n)
        coords = {v: (x, y) for v, x, y in pts}
        dens = {v: float(rng.normal()) for v in coords}
        delta, parent = compute_deltas(dens, coords)
        ref_delta, ref_parent = bf_deltas(dens, coords)
        assert parent == ref_parent
        for v in coords:
            assert delta[v] == pytest.approx(ref_delta[v], abs=1e-12)


def test_deltas_coverage_mismatch():
    with pytest.raises(CoverageMismatch):
        compute_deltas({"A": 1.0}, {"A": (0, 0), "B": (1, 1)})


# --- location clustering ---------------------------------------------------

def test_c_equals_one_is_one_cluster():
    rng = np.random.default_rng(23)
    pts = random_slot_points(rng, 30)
    g = build_delaunay(pts)
    lc = cluster_locations(g, 1)
    assert set(lc.assignment.values()) == {0}


def test_c_equals_n_all_singletons():
    rng = np.random.default_rng(29)
    pts = random_slot_points(rng, 12)
    g = build_delaunay(pts)
    lc = cluster_locations(g, 12)
    assert sorted(lc.assignment.values()) == list(range(12))


def test_too_many_clusters():
    g = build_delaunay([("A", 0, 0), ("B", 1, 0)])
    with pytest.raises(TooManyClusters):
        cluster_locations(g, 3)
    with pytest.raises(TooManyClusters):
        cluster_locations(g, 0)


def test_two_blob_recovery_sample():
    rng = np.random.default_rng(101)
    pts, labels = two_blob_instance(rng)
    g = build_delaunay(pts)
    lc = cluster_locations(g, 2)
    by_label = {}
    for pid, lab in labels.items():
        by_label.setdefault(lab, set()).add(lc.assignment[pid])
    assert len(by_label[0]) == 1 and len(by_label[1]) == 1
    assert by_label[0] != by_label[1]


def test_matches_brute_force_oracle():
    for seed in range(40):
        rng = np.random.default_rng(5000 + seed)
        n = int(rng.integers(5, 26))
        pts = random_slot_points(rng, n)
        if seed % 4 == 0:
            # widen spacing so edge-length spread exceeds 1 and every
            # density goes negative; exercises the non-center-top branch
            pts = [(v, 9.0 * x, 9.0 * y) for v, x, y in pts]
        g = build_delaunay(pts)
        c = int(rng.integers(1, min(6, n) + 1))
        got = cluster_locations(g, c)
        ref_assign, ref_centers, ref_rho, ref_delta, ref_parent = bf_cluster_locations(g, c)
        assert got.assignment == ref_assign
        assert list(got.centers) == ref_centers
        assert got.parent == ref_parent
        for v in ref_rho:
            assert got.density[v] == pytest.approx(ref_rho[v], rel=1e-12, abs=1e-12)
            assert got.delta[v] == pytest.approx(ref_delta[v], rel=1e-12, abs=1e-12)


def test_parent_chain_reaches_own_center():
    rng = np.random.default_rng(31)
    pts = random_slot_points(rng, 80)
    g = build_delaunay(pts)
    lc = cluster_locations(g, 4)
    for v, k in lc.assignment.items():
        cur = v
        for _ in range(len(pts)):
            if cur in lc.centers:
                break
            cur = lc.parent.get(cur, lc.centers[lc.assignment[cur]])
        assert lc.assignment[cur] == k


def test_scaling_preserves_rho_order_and_parents():
    rng = np.random.default_rng(37)
    pts = random_slot_points(rng, 50)
    g1 = build_delaunay(pts)
    g2 = build_delaunay([(v, 7.5 * x, 7.5 * y) for v, x, y in pts])
    lc1 = cluster_locations(g1, 3)
    lc2 = cluster_locations(g2, 3)
    order1 = sorted(lc1.density, key=lambda v: (-lc1.density[v], v))
    order2 = sorted(lc2.density, key=lambda v: (-lc2.density[v], v))
    assert order1 == order2
    assert lc1.parent == lc2.parent


# --- reading clustering ----------------------------------------------------

def test_six_values_two_groups():
    readings = [("a", 0.9), ("b", 1.0), ("c", 1.1), ("d", 4.9), ("e", 5.0), ("f", 5.1)]
    rc = cluster_readings_cfdp(readings, 2)
    low = {rc.assignment[i] for i in "abc"}
    high = {rc.assignment[i] for i in "def"}
    assert len(low) == 1 and len(high) == 1 and low != high


def test_single_cluster():
    rc = cluster_readings_cfdp([("a", 1.0), ("b", 2.0), ("c", 9.0)], 1)
    assert set(rc.assignment.values()) == {0}


def test_identical_values_degenerate():
    with pytest.raises(DegenerateValues):
        cluster_readings_cfdp([("a", 2.0), ("b", 2.0), ("c", 2.0)], 2)


def test_duplicate_reading_ids_rejected():
    with pytest.raises(ValueError):
        cluster_readings_cfdp([("a", 1.0), ("a", 2.0)], 1)


def test_dc_auto_is_second_percentile():
    rng = np.random.default_rng(41)
    vals = [(f"p{k}", float(v)) for k, v in enumerate(rng.normal(0, 1, 60))]
    rc = cluster_readings_cfdp(vals, 2)
    arr = np.array([v for _, v in vals])
    d = np.abs(arr[:, None] - arr[None, :])
    iu = np.triu_indices(len(arr), k=1)
    assert rc.d_c == pytest.approx(float(np.percentile(d[iu], 2.0)))


def test_explicit_dc_respected():
    readings = [("a", 0.0), ("b", 1.0), ("c", 10.0)]
    rc = cluster_readings_cfdp(readings, 2, d_c=0.5)
    assert rc.d_c == 0.5


# --- intersection ----------------------------------------------------------

def _loc(assign, centers):
    ids = sorted(assign)
    return LocationClustering(dict(assign), tuple(centers),
                              {v: 0.0 for v in ids}, {v: 0.0 for v in ids},
                              {v: 0.0 for v in ids}, {})


def _read(assign, values):
    return ReadingClustering(dict(assign), ("x",), dict(values), 1.0)


def test_intersect_single_cell():
    loc = _loc({"a": 0, "b": 0}, ["a"])
    read = _read({"a": 0, "b": 0}, {"a": 1.0, "b": 2.0})
    rs = intersect(loc, read, 7)
    assert rs.t == 7
    assert len(rs) == 1
    assert rs.regions[0].members == ("a", "b")


def test_intersect_drops_empty_fibers():
    loc = _loc({"a": 0, "b": 1}, ["a", "b"])
    read = _read({"a": 0, "b": 1}, {"a": 0.0, "b": 9.0})
    rs = intersect(loc, read, 0)
    assert len(rs) == 2  # aligned partitions give 2 cells, not 4


def test_intersect_five_by_two_gives_six():
    # five location clusters crossed with two reading clusters, populated so
    # exactly six cells are non-empty
    members = {
        "a": (0, 0), "b": (0, 0),
        "c": (1, 0), "d": (1, 1),
        "e": (2, 1),
        "f": (3, 1), "g": (3, 1),
        "h": (4, 1),
    }
    loc = _loc({k: v[0] for k, v in members.items()}, list("acefh"))
    read = _read({k: v[1] for k, v in members.items()},
                 {k: float(i) for i, k in enumerate(members)})
    rs = intersect(loc, read, 0)
    assert len(rs) == 6


def test_intersect_region_invariants():
    rng = np.random.default_rng(43)
    pts = random_slot_points(rng, 64)
    g = build_delaunay(pts)
    loc = cluster_locations(g, 4)
    readings = [(v, float(rng.normal())) for v, _, _ in pts]
    read = cluster_readings_cfdp(readings, 2)
    rs = intersect(loc, read, 0)
    seen = []
    for r in rs.regions:
        assert len(r.members) > 0
        for m in r.members:
            assert loc.assignment[m] == r.location_cluster
            assert read.assignment[m] == r.reading_cluster
        seen.extend(r.members)
    assert sorted(seen) == sorted(v for v, _, _ in pts)


def test_intersect_coverage_mismatch():
    loc = _loc({"a": 0}, ["a"])
    read = _read({"a": 0, "b": 0}, {"a": 1.0, "b": 2.0})
    with pytest.raises(CoverageMismatch):
        intersect(loc, read, 0)
