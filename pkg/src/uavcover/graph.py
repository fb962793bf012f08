"""Weighted graphs with a charging station, instance generators and shortest paths."""

from __future__ import annotations

import heapq
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

log = logging.getLogger(__name__)

NodeId = int
Edge = Tuple[NodeId, NodeId, float]


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    nodes: Tuple[NodeId, ...]
    coords: Dict[NodeId, Tuple[float, float]]
    edges: Tuple[Edge, ...]
    station: NodeId
    adj: Dict[NodeId, Dict[NodeId, float]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.nodes)) != len(self.nodes):
            raise GraphError("duplicate node ids")
        if self.station not in self.coords or self.station not in set(self.nodes):
            raise GraphError(f"station {self.station} is not a node")
        adj: Dict[NodeId, Dict[NodeId, float]] = {v: {} for v in self.nodes}
        for u, v, w in self.edges:
            if u not in adj or v not in adj:
                raise GraphError(f"edge ({u}, {v}) references unknown node")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if not (w > 0 and math.isfinite(w)):
                raise GraphError(f"edge ({u}, {v}) has non-positive or infinite time {w}")
            if v in adj[u]:
                raise GraphError(f"duplicate edge ({u}, {v})")
            adj[u][v] = w
            adj[v][u] = w
        object.__setattr__(self, "adj", adj)
        seen = {self.station}
        stack = [self.station]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if len(seen) != len(self.nodes):
            raise GraphError(f"graph is disconnected: {len(self.nodes) - len(seen)} nodes unreachable")

    def __len__(self):
        return len(self.nodes)

    def weight(self, u: NodeId, v: NodeId) -> float:
        return self.adj[u][v]

    def neighbors(self, u: NodeId) -> Dict[NodeId, float]:
        return self.adj[u]

    def walk_time(self, walk: Iterable[NodeId]) -> float:
        walk = list(walk)
        return sum(self.adj[a][b] for a, b in zip(walk, walk[1:]))

    def subgraph(self, keep: Iterable[NodeId], station: Optional[NodeId] = None) -> "Graph":
        keep = set(keep)
        nodes = tuple(v for v in self.nodes if v in keep)
        edges = tuple(e for e in self.edges if e[0] in keep and e[1] in keep)
        return Graph(nodes, {v: self.coords[v] for v in nodes}, edges,
                     self.station if station is None else station)


@dataclass(frozen=True)
class InstanceParams:
    """Flight budget ``b``, recharge time ``B`` and uniform latency deadline ``T`` (seconds)."""

    b: float
    B: float
    T: float
    per_node_deadline: Optional[Dict[NodeId, float]] = None

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError(f"battery budget must be positive, got {self.b}")
        if not self.B >= 0:
            raise ValueError(f"recharge time must be non-negative, got {self.B}")
        if not self.T > 0:
            raise ValueError(f"latency must be positive, got {self.T}")
        if self.per_node_deadline:
            odd = {v: t for v, t in self.per_node_deadline.items() if t != self.T}
            if odd:
                raise ValueError(f"per-node deadlines must all equal T={self.T}; got {odd}")

    def with_latency(self, T: float) -> "InstanceParams":
        return InstanceParams(self.b, self.B, T)


@dataclass(frozen=True)
class DistanceMap:
    dist: Dict[NodeId, float]
    parent: Dict[NodeId, Optional[NodeId]]
    source: NodeId

    def path_from_source(self, v: NodeId) -> List[NodeId]:
        path = [v]
        while path[-1] != self.source:
            path.append(self.parent[path[-1]])
        path.reverse()
        return path

    def tree_edges(self) -> set:
        return {frozenset((v, p)) for v, p in self.parent.items() if p is not None}


def shortest_paths(g: Graph, source: Optional[NodeId] = None) -> DistanceMap:
    """Dijkstra from ``source`` (default: the station).

    Among equal-distance parents the smaller node id wins, so the tree is
    reproducible regardless of heap ordering.
    """
    src = g.station if source is None else source
    dist: Dict[NodeId, float] = {src: 0.0}
    parent: Dict[NodeId, Optional[NodeId]] = {src: None}
    done = set()
    heap = [(0.0, src)]
    while heap:
        du, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        for v, w in g.adj[u].items():
            if v in done:
                continue
            nd = du + w
            old = dist.get(v)
            if old is None or nd < old:
                dist[v] = nd
                parent[v] = u
                heapq.heappush(heap, (nd, v))
            elif nd == old and u < parent[v]:
                parent[v] = u
    return DistanceMap(dist, parent, src)


def all_pairs(g: Graph) -> Dict[NodeId, DistanceMap]:
    return {v: shortest_paths(g, v) for v in g.nodes}


def build_grid(rows: int, cols: int, edge_time: float, station: Optional[NodeId] = None) -> Graph:
    """4-connected ``rows`` x ``cols`` grid; node id is ``r * cols + c``.

    Coordinates are spaced by ``edge_time`` (unit speed).  Without an
    explicit station the node nearest the grid centroid is used.
    """
    if rows < 1 or cols < 1:
        raise GraphError("grid dimensions must be >= 1")
    if not edge_time > 0:
        raise GraphError("edge_time must be positive")
    n = rows * cols
    coords = {r * cols + c: (c * edge_time, r * edge_time) for r in range(rows) for c in range(cols)}
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1, edge_time))
            if r + 1 < rows:
                edges.append((v, v + cols, edge_time))
    if station is None:
        cx, cy = (cols - 1) * edge_time / 2, (rows - 1) * edge_time / 2
        station = min(coords, key=lambda v: (math.hypot(coords[v][0] - cx, coords[v][1] - cy), v))
    if not (0 <= station < n):
        raise GraphError(f"station {station} outside grid of {n} nodes")
    return Graph(tuple(range(n)), coords, tuple(edges), station)


def build_random_geometric(n: int, radius: float, side: float, seed: int,
                           station_policy: str = "centroid-most", max_retries: int = 100) -> Graph:
    """Uniform points in a ``side`` square joined when closer than ``radius``.

    Edge time is the Euclidean distance.  Disconnected draws are rejected and
    redrawn from the sub-seed ``[seed, attempt]``.
    """
    if n < 1:
        raise GraphError("n must be >= 1")
    if not radius > 0:
        raise GraphError("radius must be positive")
    if station_policy not in ("corner-most", "centroid-most"):
        raise GraphError(f"unknown station policy {station_policy!r}")
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        pts = rng.uniform(0.0, side, size=(n, 2))
        diff = pts[:, None, :] - pts[None, :, :]
        d = np.sqrt((diff ** 2).sum(-1))
        edges = tuple((int(i), int(j), float(d[i, j]))
                      for i in range(n) for j in range(i + 1, n) if d[i, j] <= radius and d[i, j] > 0)
        coords = {i: (float(pts[i, 0]), float(pts[i, 1])) for i in range(n)}
        if station_policy == "corner-most":
            key = np.hypot(pts[:, 0], pts[:, 1])
        else:
            c = pts.mean(axis=0)
            key = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
        station = int(np.argmin(key))
        try:
            return Graph(tuple(range(n)), coords, edges, station)
        except GraphError as exc:
            log.debug("geometric attempt %d rejected: %s", attempt, exc)
    raise GraphError(f"no connected geometric graph after {max_retries} draws (n={n}, radius={radius})")


def build_path(n: int, edge_time: float) -> Graph:
    coords = {i: (i * edge_time, 0.0) for i in range(n)}
    edges = tuple((i, i + 1, edge_time) for i in range(n - 1))
    return Graph(tuple(range(n)), coords, edges, 0)


# -- instance files ---------------------------------------------------------

_TOP_FIELDS = {"nodes", "edges", "station", "params"}
_NODE_FIELDS = {"id", "x", "y"}
_EDGE_FIELDS = {"u", "v", "time"}
_PARAM_FIELDS = {"b", "B", "T"}


def graph_to_dict(g: Graph, params: Optional[InstanceParams] = None) -> dict:
    doc = {
        "nodes": [{"id": v, "x": g.coords[v][0], "y": g.coords[v][1]} for v in g.nodes],
        "edges": [{"u": u, "v": v, "time": w} for u, v, w in g.edges],
        "station": g.station,
    }
    if params is not None:
        doc["params"] = {"b": params.b, "B": params.B, "T": params.T}
    return doc


def _warn_unknown(obj: dict, allowed: set, where: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        log.warning("ignoring unknown %s field(s): %s", where, ", ".join(extra))


def graph_from_dict(doc: dict) -> Tuple[Graph, Optional[InstanceParams]]:
    _warn_unknown(doc, _TOP_FIELDS, "instance")
    ids = []
    coords = {}
    for nd in doc["nodes"]:
        _warn_unknown(nd, _NODE_FIELDS, "node")
        v = int(nd["id"])
        if v in coords:
            raise GraphError(f"duplicate node id {v}")
        ids.append(v)
        coords[v] = (float(nd["x"]), float(nd["y"]))
    edges = []
    for ed in doc["edges"]:
        _warn_unknown(ed, _EDGE_FIELDS, "edge")
        edges.append((int(ed["u"]), int(ed["v"]), float(ed["time"])))
    g = Graph(tuple(ids), coords, tuple(edges), int(doc["station"]))
    params = None
    if doc.get("params") is not None:
        _warn_unknown(doc["params"], _PARAM_FIELDS, "params")
        p = doc["params"]
        params = InstanceParams(float(p["b"]), float(p["B"]), float(p["T"]))
    return g, params


def save_instance(path, g: Graph, params: Optional[InstanceParams] = None):
    Path(path).write_text(json.dumps(graph_to_dict(g, params), indent=1), encoding="utf-8")


def load_instance(path) -> Tuple[Graph, Optional[InstanceParams]]:
    return graph_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
