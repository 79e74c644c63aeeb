"""Planar proximity graphs built from Delaunay triangulation.

scipy's Qhull wrapper does the heavy lifting for general position input;
the degenerate layouts it cannot triangulate (fewer than three points,
exactly collinear sets) fall back to explicit constructions so every
non-empty point set yields a usable graph.
"""

from __future__ import annotations

import json

import numpy as np
from scipy.spatial import Delaunay, QhullError


class GeometryError(ValueError):
    pass


class DuplicatePoints(GeometryError):
    def __init__(self, ids):
        self.ids = tuple(ids)
        super().__init__(f"coincident points: {', '.join(self.ids)}")


class UnknownVertex(KeyError):
    def __init__(self, vertex_id):
        self.vertex_id = vertex_id
        super().__init__(f"unknown vertex {vertex_id!r}")


_JITTER_SEED = 179424673  # fixed so the optional perturbation is reproducible


class TriangulationGraph:
    """Undirected proximity graph over identified points."""

    def __init__(self, ids: tuple[str, ...], xy: np.ndarray, edges: set[tuple[int, int]]):
        self.ids = ids
        self.xy = np.asarray(xy, dtype=float)
        self._index = {v: k for k, v in enumerate(ids)}
        self._edges_idx = frozenset(tuple(sorted(e)) for e in edges)
        adj: list[list[int]] = [[] for _ in ids]
        for a, b in self._edges_idx:
            adj[a].append(b)
            adj[b].append(a)
        self._adj_idx = [np.array(sorted(n), dtype=int) for n in adj]

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self, vertex_id: str) -> int:
        try:
            return self._index[vertex_id]
        except KeyError:
            raise UnknownVertex(vertex_id) from None

    @property
    def edges(self) -> set[tuple[str, str]]:
        out = set()
        for a, b in self._edges_idx:
            pair = sorted((self.ids[a], self.ids[b]))
            out.add((pair[0], pair[1]))
        return out

    def neighbors(self, vertex_id: str) -> set[str]:
        i = self.index_of(vertex_id)
        return {self.ids[j] for j in self._adj_idx[i]}

    def neighbor_indices(self, i: int) -> np.ndarray:
        return self._adj_idx[i]

    def edge_length(self, a: str, b: str) -> float:
        ia, ib = self.index_of(a), self.index_of(b)
        if tuple(sorted((ia, ib))) not in self._edges_idx:
            raise KeyError(f"no edge between {a!r} and {b!r}")
        return float(np.hypot(*(self.xy[ia] - self.xy[ib])))

    def incident_lengths(self, i: int) -> np.ndarray:
        nbr = self._adj_idx[i]
        d = self.xy[nbr] - self.xy[i]
        return np.hypot(d[:, 0], d[:, 1])

    def to_json(self) -> str:
        vertices = [
            {"id": v, "x": float(x), "y": float(y)}
            for v, (x, y) in zip(self.ids, self.xy)
        ]
        edges = sorted([sorted((self.ids[a], self.ids[b])) for a, b in self._edges_idx])
        return json.dumps({"vertices": vertices, "edges": edges})


def _collinear_path_edges(xy: np.ndarray) -> set[tuple[int, int]]:
    # Order along the line by (x, y); consecutive points become path edges.
    order = sorted(range(len(xy)), key=lambda i: (xy[i, 0], xy[i, 1]))
    return {tuple(sorted((order[k], order[k + 1]))) for k in range(len(order) - 1)}


def build_delaunay(points, jitter_duplicates: bool = False) -> TriangulationGraph:
    """Triangulate ``(id, x, y)`` triples into a TriangulationGraph.

    Coincident points are rejected unless ``jitter_duplicates`` is set, in
    which case every coordinate gets a deterministic perturbation of at most
    1e-9 times the bounding-box diagonal before triangulating.  Collinear
    input degrades to a path graph in coordinate order.
    """
    points = list(points)
    if not points:
        raise ValueError("at least one point required")
    ids = tuple(p[0] for p in points)
    if len(set(ids)) != len(ids):
        raise ValueError("vertex ids must be unique")
    xy = np.array([(p[1], p[2]) for p in points], dtype=float)

    if jitter_duplicates and len(points) > 1:
        span = xy.max(axis=0) - xy.min(axis=0)
        diag = float(np.hypot(*span))
        if diag > 0.0:
            rng = np.random.default_rng(_JITTER_SEED)
            xy = xy + rng.uniform(-1e-9 * diag, 1e-9 * diag, size=xy.shape)

    seen: dict[tuple[float, float], str] = {}
    for v, (x, y) in zip(ids, xy):
        key = (float(x), float(y))
        if key in seen:
            raise DuplicatePoints((seen[key], v))
        seen[key] = v

    n = len(points)
    if n == 1:
        return TriangulationGraph(ids, xy, set())
    if n == 2:
        return TriangulationGraph(ids, xy, {(0, 1)})

    try:
        tri = Delaunay(xy)
    except QhullError:
        # Exactly collinear input: qhull cannot build 2-D simplices.
        return TriangulationGraph(ids, xy, _collinear_path_edges(xy))

    edges: set[tuple[int, int]] = set()
    for simplex in tri.simplices:
        a, b, c = int(simplex[0]), int(simplex[1]), int(simplex[2])
        edges.add(tuple(sorted((a, b))))
        edges.add(tuple(sorted((b, c))))
        edges.add(tuple(sorted((a, c))))
    return TriangulationGraph(ids, xy, edges)


def neighbors(graph: TriangulationGraph, vertex_id: str) -> set[str]:
    return graph.neighbors(vertex_id)


def components(graph: TriangulationGraph, subset) -> list[set[str]]:
    """Connected components of the subgraph induced by ``subset``.

    Components come back ordered by their smallest member id; unknown ids
    raise UnknownVertex.
    """
    member_idx = set()
    for v in subset:
        member_idx.add(graph.index_of(v))
    out: list[set[str]] = []
    unvisited = set(member_idx)
    for start in sorted(member_idx, key=lambda i: graph.ids[i]):
        if start not in unvisited:
            continue
        comp = set()
        stack = [start]
        unvisited.discard(start)
        while stack:
            cur = stack.pop()
            comp.add(graph.ids[cur])
            for nb in graph.neighbor_indices(cur):
                nb = int(nb)
                if nb in unvisited:
                    unvisited.discard(nb)
                    stack.append(nb)
        out.append(comp)
    return out
