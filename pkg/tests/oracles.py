"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written the slow, obvious way (plain loops,
explicit formulas) so that agreement with the optimized implementations is
meaningful evidence and not a shared bug.
"""

from __future__ import annotations

import math

import numpy as np

SIGMA_FLOOR = 1e-12


# ---------------------------------------------------------------------------
# location clustering, brute force


def bf_density(graph, vertex_id: str) -> float:
    """-log of the (floored) population std of incident edge lengths."""
    i = graph.index_of(vertex_id)
    x0, y0 = graph.xy[i]
    lengths = []
    for nb in sorted(graph.neighbors(vertex_id)):
        j = graph.index_of(nb)
        x1, y1 = graph.xy[j]
        lengths.append(math.hypot(x1 - x0, y1 - y0))
    mu = sum(lengths) / len(lengths)
    var = sum((L - mu) ** 2 for L in lengths) / len(lengths)
    sigma = max(math.sqrt(var), SIGMA_FLOOR)
    return -math.log(sigma)


def bf_cluster_locations(graph, c: int):
    """Reference density-peak clustering over a TriangulationGraph.

    Returns (assignment, centers, density, delta, parent) with the same tie
    rules the package documents: density and gamma ties break by ascending
    id, the parent is the first minimum in rank order, and a top point that
    is not a center adopts the center nearest to it.
    """
    ids = list(graph.ids)
    coords = {v: (float(graph.xy[graph.index_of(v)][0]),
                  float(graph.xy[graph.index_of(v)][1])) for v in ids}
    density = {v: bf_density(graph, v) for v in ids}
    order = sorted(ids, key=lambda v: (-density[v], v))

    def dist(a, b):
        (xa, ya), (xb, yb) = coords[a], coords[b]
        return math.hypot(xa - xb, ya - yb)

    delta: dict[str, float] = {}
    parent: dict[str, str] = {}
    for i in range(1, len(order)):
        best = None
        best_j = None
        for j in range(i):
            d = dist(order[i], order[j])
            if best is None or d < best:
                best = d
                best_j = j
        delta[order[i]] = best
        parent[order[i]] = order[best_j]
    if len(order) > 1:
        delta[order[0]] = max(delta[v] for v in order[1:])
    else:
        delta[order[0]] = 0.0

    gamma = {v: density[v] * delta[v] for v in ids}
    centers = sorted(ids, key=lambda v: (-gamma[v], v))[:c]
    label = {v: k for k, v in enumerate(centers)}

    assignment: dict[str, int] = {}
    for v in order:
        if v in label:
            assignment[v] = label[v]
        elif v in parent:
            assignment[v] = assignment[parent[v]]
        else:
            # densest point not chosen as a center (possible when all
            # densities are negative): nearest center by (distance, id)
            near = sorted(centers, key=lambda cv: (dist(cv, v), cv))[0]
            assignment[v] = label[near]
    return assignment, centers, density, delta, parent


def bf_deltas(densities: dict[str, float], coords: dict[str, tuple[float, float]]):
    """Reference for compute_deltas over explicit points."""
    order = sorted(densities, key=lambda v: (-densities[v], v))

    def dist(a, b):
        (xa, ya), (xb, yb) = coords[a], coords[b]
        return math.hypot(xa - xb, ya - yb)

    delta: dict[str, float] = {}
    parent: dict[str, str] = {}
    for i in range(1, len(order)):
        best, best_j = None, None
        for j in range(i):
            d = dist(order[i], order[j])
            if best is None or d < best:
                best, best_j = d, j
        delta[order[i]] = best
        parent[order[i]] = order[best_j]
    delta[order[0]] = max(delta[v] for v in order[1:]) if len(order) > 1 else 0.0
    return delta, parent


# ---------------------------------------------------------------------------
# divergence


def quadrature_kl(p, q, pad: float = 8.0, n_grid: int = 40001) -> float:
    """Trapezoid integral of p(x) * (log p(x) - log q(x)).

    Uses the models' own (floored) evaluations for the log terms, so the
    quantity integrated is exactly what the Monte-Carlo estimator targets;
    only the integration method is independent.
    """
    support = np.concatenate([p.support, q.support])
    bw = max(p.bandwidth, q.bandwidth)
    lo = float(support.min()) - pad * bw
    hi = float(support.max()) + pad * bw
    x = np.linspace(lo, hi, n_grid)
    px = p.evaluate(x)
    qx = q.evaluate(x)
    return float(np.trapezoid(px * (np.log(px) - np.log(qx)), x))


def bf_gaussian_kde(support, bandwidth: float, x: float, floor: float = 1e-12) -> float:
    """Scalar Gaussian KDE evaluation, written out longhand."""
    total = 0.0
    for s in support:
        z = (x - s) / bandwidth
        total += math.exp(-0.5 * z * z)
    dens = total / (len(support) * bandwidth * math.sqrt(2.0 * math.pi))
    return max(dens, floor)


# ---------------------------------------------------------------------------
# detection


def bf_t_statistic(window, value: float) -> float:
    """Two-sided one-sample t statistic; its square is the Hotelling T^2."""
    w = list(window)
    n = len(w)
    mean = sum(w) / n
    var = sum((x - mean) ** 2 for x in w) / (n - 1)
    if var == 0.0:
        return 0.0 if mean == value else math.inf
    return (mean - value) / math.sqrt(var / n)


# ---------------------------------------------------------------------------
# geometry


def circumcircle(a, b, c):
    """Center and squared radius of the circle through three points."""
    ax, ay = a
    bx, by = b
    cx, cy = c
    d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    if d == 0.0:
        return None
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay)
          + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx)
          + (cx * cx + cy * cy) * (bx - ax)) / d
    r2 = (ax - ux) ** 2 + (ay - uy) ** 2
    return (ux, uy), r2


def empty_circumcircle_violations(points, triangles, rel_tol: float = 1e-9) -> int:
    """Count triangles whose circumcircle strictly contains another point."""
    bad = 0
    for tri in triangles:
        cc = circumcircle(*(points[i] for i in tri))
        if cc is None:
            continue
        (ux, uy), r2 = cc
        for k, (x, y) in enumerate(points):
            if k in tri:
                continue
            d2 = (x - ux) ** 2 + (y - uy) ** 2
            if d2 < r2 * (1.0 - rel_tol):
                bad += 1
                break
    return bad


# ---------------------------------------------------------------------------
# instance builders


def scatter_blob(rng: np.random.Generator, n: int, origin: tuple[float, float],
                 spacing: float = 1.0) -> list[tuple[float, float]]:
    """n points on a jittered triangular lattice of the given spacing.

    On a triangular lattice every interior vertex has six incident edges of
    near-equal length, which is the regular-blob shape the spatial density
    measure is designed around; the small jitter avoids degenerate
    collinear or co-circular layouts.
    """
    cols = math.ceil(math.sqrt(n))
    cells = [(i, j) for j in range(cols + 1) for i in range(cols)]
    pts = []
    for i, j in cells[:n]:
        x = (i + 0.5 * (j % 2)) * spacing + float(rng.uniform(-0.1, 0.1)) * spacing
        y = j * spacing * math.sqrt(3.0) / 2.0 + float(rng.uniform(-0.1, 0.1)) * spacing
        pts.append((origin[0] + x, origin[1] + y))
    return pts


def two_blob_instance(rng: np.random.Generator, spacing: float = 1.0):
    """Two well-separated jittered-grid blobs; returns (points, labels).

    The inter-blob gap is at least three times the realized intra-blob
    nearest-neighbor spacing, measured after placement.
    """
    n_a = int(rng.integers(8, 26))
    n_b = int(rng.integers(8, 26))
    blob_a = scatter_blob(rng, n_a, (0.0, 0.0), spacing)
    blob_b_local = scatter_blob(rng, n_b, (0.0, 0.0), spacing)

    def max_nn(pts):
        worst = 0.0
        for i, (x, y) in enumerate(pts):
            best = min(
                math.hypot(x - px, y - py)
                for j, (px, py) in enumerate(pts) if j != i
            )
            worst = max(worst, best)
        return worst

    gap = 3.0 * max(max_nn(blob_a), max_nn(blob_b_local))
    span_a = max(x for x, _ in blob_a)
    shift = span_a + gap + spacing
    blob_b = [(x + shift, y) for x, y in blob_b_local]

    points = [(f"a{k:02d}", x, y) for k, (x, y) in enumerate(blob_a)]
    points += [(f"b{k:02d}", x, y) for k, (x, y) in enumerate(blob_b)]
    labels = {pid: (0 if pid.startswith("a") else 1) for pid, _, _ in points}
    return points, labels


def random_slot_points(rng: np.random.Generator, n: int) -> list[tuple[str, float, float]]:
    """n distinct random points in a square scaled to keep spacing sane."""
    side = math.sqrt(n) * 2.0
    pts: list[tuple[str, float, float]] = []
    seen = set()
    k = 0
    while len(pts) < n:
        x = round(float(rng.uniform(0, side)), 9)
        y = round(float(rng.uniform(0, side)), 9)
        if (x, y) in seen:
            continue
        seen.add((x, y))
        pts.append((f"p{k:03d}", x, y))
        k += 1
    return pts
