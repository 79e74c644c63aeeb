"""Dynamic region partition for one time slot.

Two independent clusterings are intersected: a density-peak clustering of
locations over the slot triangulation (density from the spread of incident
edge lengths), and a density-peak clustering of the reading values in one
dimension.  The non-empty intersection cells are the regions handed to the
divergence stage.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .triangulation import TriangulationGraph

SIGMA_FLOOR = 1e-12


class PartitionError(ValueError):
    pass


class IsolatedVertex(PartitionError):
    def __init__(self, vertex_id):
        self.vertex_id = vertex_id
        super().__init__(f"vertex {vertex_id!r} has no incident edges")


class TooManyClusters(PartitionError):
    pass


class DegenerateValues(PartitionError):
    pass


class CoverageMismatch(PartitionError):
    pass


@dataclass(frozen=True)
class LocationClustering:
    assignment: dict[str, int]
    centers: tuple[str, ...]
    density: dict[str, float]
    delta: dict[str, float]
    gamma: dict[str, float]
    parent: dict[str, str]

    @property
    def n_clusters(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class ReadingClustering:
    assignment: dict[str, int]
    centers: tuple[str, ...]
    values: dict[str, float]
    d_c: float

    @property
    def n_clusters(self) -> int:
        return len(self.centers)


@dataclass(frozen=True)
class Region:
    index: int
    location_cluster: int
    reading_cluster: int
    members: tuple[str, ...]
    readings: np.ndarray


@dataclass(frozen=True)
class RegionSet:
    t: int
    regions: tuple[Region, ...]

    def __len__(self) -> int:
        return len(self.regions)

    def location_cluster_readings(self, cluster: int) -> np.ndarray:
        parts = [r.readings for r in self.regions if r.location_cluster == cluster]
        return np.concatenate(parts) if parts else np.empty(0)

    def all_readings(self) -> np.ndarray:
        return np.concatenate([r.readings for r in self.regions])


def location_density(graph: TriangulationGraph, vertex_id: str) -> float:
    """log(1 / sigma) where sigma is the population std of incident edge lengths.

    sigma is floored at 1e-12 so duplicate-free but perfectly regular
    neighborhoods stay finite.
    """
    i = graph.index_of(vertex_id)
    lengths = graph.incident_lengths(i)
    if lengths.size == 0:
        raise IsolatedVertex(vertex_id)
    sigma = max(float(np.std(lengths)), SIGMA_FLOOR)
    return float(-np.log(sigma))


def _rank_order(densities: Mapping[str, float]) -> list[str]:
    return sorted(densities, key=lambda v: (-densities[v], v))


def _deltas_from_matrix(order: list[str], dist: np.ndarray) -> tuple[dict[str, float], dict[str, str]]:
    """delta / parent for points already sorted by descending density.

    ``dist[i, j]`` is the distance between order[i] and order[j].  The parent
    of each point is its nearest higher-ranked point (first such on ties);
    the top-ranked point takes the largest delta seen elsewhere and no parent.
    """
    n = len(order)
    delta: dict[str, float] = {}
    parent: dict[str, str] = {}
    if n == 1:
        return {order[0]: 0.0}, {}
    masked = dist.copy()
    iu = np.triu_indices(n)
    masked[iu] = np.inf  # row i may only look at ranks < i
    mins = masked.min(axis=1)
    args = masked.argmin(axis=1)
    for i in range(1, n):
        delta[order[i]] = float(mins[i])
        parent[order[i]] = order[int(args[i])]
    delta[order[0]] = float(max(mins[1:]))
    return delta, parent


def compute_deltas(densities: Mapping[str, float], graph_or_points) -> tuple[dict[str, float], dict[str, str]]:
    """Distance to the nearest denser point, plus that point's id.

    ``graph_or_points`` may be a TriangulationGraph or a mapping of id to
    (x, y).  Distances are Euclidean over coordinates regardless of graph
    edges.  Density ties rank by ascending id.
    """
    if isinstance(graph_or_points, TriangulationGraph):
        coords = {v: (float(x), float(y)) for v, (x, y) in zip(graph_or_points.ids, graph_or_points.xy)}
    else:
        coords = {v: (float(x), float(y)) for v, (x, y) in graph_or_points.items()}
    if set(densities) != set(coords):
        raise CoverageMismatch("density map and point set disagree")
    order = _rank_order(densities)
    pts = np.array([coords[v] for v in order], dtype=float)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    return _deltas_from_matrix(order, dist)


def _assign_by_chains(order: list[str], parent: dict[str, str], centers: list[str],
                      nearest_center: Mapping[str, str]) -> dict[str, int]:
    label = {c: k for k, c in enumerate(centers)}
    assignment: dict[str, int] = {}
    for v in order:
        if v in label:
            assignment[v] = label[v]
        elif v in parent:
            assignment[v] = assignment[parent[v]]
        else:
            # top-ranked point that was not picked as a center: adopt the
            # nearest center's cluster so coverage stays total.  Use the
            # static label, not assignment: with negative densities the top
            # point is ranked before every center has been visited.
            assignment[v] = label[nearest_center[v]]
    return assignment


def cluster_locations(graph: TriangulationGraph, c: int) -> LocationClustering:
    """Density-peak clustering of graph vertices into ``c`` clusters.

    Centers are the c largest density * delta scores; everyone else follows
    the chain of nearest denser points down to a center.  All ties break by
    ascending vertex id, so the result is a pure function of the input.
    """
    n = len(graph)
    if c < 1 or c > n:
        raise TooManyClusters(f"cannot form {c} clusters from {n} vertices")
    if n == 1:
        v = graph.ids[0]
        rho = float(-np.log(SIGMA_FLOOR))
        return LocationClustering({v: 0}, (v,), {v: rho}, {v: 0.0}, {v: 0.0}, {})

    density = {v: location_density(graph, v) for v in graph.ids}
    order = _rank_order(density)
    idx = {v: graph.index_of(v) for v in graph.ids}
    pts = graph.xy[[idx[v] for v in order]]
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    delta, parent = _deltas_from_matrix(order, dist)

    gamma = {v: density[v] * delta[v] for v in graph.ids}
    centers = sorted(graph.ids, key=lambda v: (-gamma[v], v))[:c]

    top = order[0]
    by_dist = sorted(centers, key=lambda cv: (float(np.hypot(*(graph.xy[idx[cv]] - graph.xy[idx[top]]))), cv))
    assignment = _assign_by_chains(order, parent, centers, {top: by_dist[0]})
    return LocationClustering(assignment, tuple(centers), density, delta, gamma, parent)


def cluster_readings_cfdp(readings, n_v: int, d_c: float | None = None) -> ReadingClustering:
    """Density-peak clustering of scalar readings.

    Density uses a Gaussian kernel sum over pairwise value distances; the
    cutoff ``d_c`` defaults to the 2nd percentile of those distances.
    Requires at least ``n_v`` distinct values.
    """
    readings = list(readings)
    ids = [r[0] for r in readings]
    if len(set(ids)) != len(ids):
        raise PartitionError("reading ids must be unique")
    vals = {r[0]: float(r[1]) for r in readings}
    n = len(ids)
    if n_v < 1 or n_v > n:
        raise TooManyClusters(f"cannot form {n_v} clusters from {n} readings")
    if len(set(vals.values())) < n_v:
        raise DegenerateValues(f"fewer than {n_v} distinct reading values")

    v = np.array([vals[i] for i in ids], dtype=float)
    dist = np.abs(v[:, None] - v[None, :])
    if d_c is None:
        iu = np.triu_indices(n, k=1)
        d_c = float(np.percentile(dist[iu], 2.0)) if iu[0].size else 1.0
    if d_c <= 0.0:
        positive = dist[dist > 0.0]
        d_c = float(positive.min()) if positive.size else 1.0

    density_arr = np.exp(-((dist / d_c) ** 2)).sum(axis=1) - 1.0  # drop self term
    density = {i: float(d) for i, d in zip(ids, density_arr)}
    order = _rank_order(density)
    pos = {i: k for k, i in enumerate(ids)}
    dist_sorted = dist[np.ix_([pos[i] for i in order], [pos[i] for i in order])]
    delta, parent = _deltas_from_matrix(order, dist_sorted)

    gamma = {i: density[i] * delta[i] for i in ids}
    centers = sorted(ids, key=lambda i: (-gamma[i], i))[:n_v]

    top = order[0]
    by_dist = sorted(centers, key=lambda cv: (abs(vals[cv] - vals[top]), cv))
    assignment = _assign_by_chains(order, parent, centers, {top: by_dist[0]})
    return ReadingClustering(assignment, tuple(centers), vals, float(d_c))


def intersect(loc: LocationClustering, read: ReadingClustering, t: int) -> RegionSet:
    """Non-empty cells of the two clusterings, as regions of slot ``t``."""
    if set(loc.assignment) != set(read.assignment):
        raise CoverageMismatch("location and reading clusterings cover different ids")
    cells: dict[tuple[int, int], list[str]] = {}
    for v in loc.assignment:
        cells.setdefault((loc.assignment[v], read.assignment[v]), []).append(v)
    regions = []
    for k, key in enumerate(sorted(cells)):
        members = tuple(sorted(cells[key]))
        readings = np.array([read.values[m] for m in members], dtype=float)
        regions.append(Region(k, key[0], key[1], members, readings))
    return RegionSet(t, tuple(regions))
