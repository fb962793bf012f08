"""Candidate tours: TSP segmentation, Dijkstra-tree loops, and pool export."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .graph import DistanceMap, Graph, InstanceParams, NodeId
from .tsp import Walk

log = logging.getLogger(__name__)

EPS = 1e-9

ORIGINS = ("tsp-greedy", "tsp-lp", "lollipop", "dijkstra")


class InfeasibleInstance(ValueError):
    """Some node cannot be served by any tour under (b, T)."""

    def __init__(self, msg, nodes=()):
        super().__init__(msg)
        self.nodes = tuple(nodes)


@dataclass(frozen=True)
class Segment:
    nodes: Tuple[NodeId, ...]
    duration: float

    @classmethod
    def from_walk(cls, g: Graph, walk: Walk, i: int, j: int) -> "Segment":
        nodes = walk.nodes[i:j + 1]
        return cls(tuple(nodes), g.walk_time(nodes))


@dataclass(frozen=True)
class CandidateTour:
    walk: Walk
    arrival: Dict[NodeId, float] = field(compare=False)
    coverage: FrozenSet[NodeId]
    origin: str
    id: int = -1
    anchor: Optional[NodeId] = None
    spur: bool = False

    @property
    def time(self) -> float:
        return self.walk.total_time


def first_arrivals(g: Graph, nodes: Sequence[NodeId]) -> Dict[NodeId, float]:
    arr = {nodes[0]: 0.0}
    t = 0.0
    for a, b in zip(nodes, nodes[1:]):
        t += g.weight(a, b)
        if b not in arr:
            arr[b] = t
    return arr


def make_tour(g: Graph, nodes: Sequence[NodeId], p: InstanceParams, origin: str,
              anchor: Optional[NodeId] = None, spur: bool = False) -> CandidateTour:
    nodes = tuple(nodes)
    walk = Walk(nodes, g.walk_time(nodes))
    arr = first_arrivals(g, nodes)
    cov = frozenset(v for v, t in arr.items() if t <= p.T + EPS)
    return CandidateTour(walk, arr, cov, origin, anchor=anchor, spur=spur)


def is_feasible_tour(t: CandidateTour, p: InstanceParams) -> bool:
    return (t.walk.total_time <= p.b + EPS
            and all(t.arrival[v] <= p.T + EPS for v in t.coverage)
            and t.walk.nodes[0] == t.walk.nodes[-1])


# -- segments ---------------------------------------------------------------

def is_valid_segment(s: Segment, d: DistanceMap, p: InstanceParams) -> bool:
    u0, um = s.nodes[0], s.nodes[-1]
    return (d.dist[u0] + s.duration <= p.T + EPS
            and d.dist[u0] + d.dist[um] + s.duration <= p.b + EPS)


def segment_to_tour(g: Graph, s: Segment, d: DistanceMap, p: InstanceParams,
                    origin: str = "tsp-lp") -> CandidateTour:
    """Close a valid segment with shortest paths to and from the station."""
    if not is_valid_segment(s, d, p):
        raise ValueError(f"segment {s.nodes[0]}..{s.nodes[-1]} violates the deadline or battery bound")
    stem = d.path_from_source(s.nodes[0])
    back = d.path_from_source(s.nodes[-1])[::-1]
    nodes = stem[:-1] + list(s.nodes) + back[1:]
    return make_tour(g, nodes, p, origin)


def _prefix_times(g: Graph, walk: Walk) -> List[float]:
    pre = [0.0]
    for a, b in zip(walk.nodes, walk.nodes[1:]):
        pre.append(pre[-1] + g.weight(a, b))
    return pre


def _longest_from(walk: Walk, pre: List[float], i: int, d: DistanceMap,
                  p: InstanceParams) -> Optional[int]:
    """End index of the longest valid segment starting at walk position ``i``.

    Longest means largest duration, then more nodes; the deadline bound is
    monotone in the end index so the scan stops once it fails.
    """
    du0 = d.dist[walk.nodes[i]]
    best = None
    for j in range(i, len(walk.nodes)):
        dur = pre[j] - pre[i]
        if du0 + dur > p.T + EPS or du0 + dur > p.b + EPS:
            break
        if du0 + d.dist[walk.nodes[j]] + dur <= p.b + EPS:
            if best is None or dur >= pre[best] - pre[i] - EPS:
                best = j
    return best


def segment_greedy(g: Graph, w: Walk, d: DistanceMap, p: InstanceParams) -> List[CandidateTour]:
    """tsp-greedy: cut the walk into consecutive longest valid segments."""
    pre = _prefix_times(g, w)
    tours: List[CandidateTour] = []
    covered = set()
    i = 0
    n = len(w.nodes)
    while i < n:
        j = _longest_from(w, pre, i, d, p)
        if j is None:
            v = w.nodes[i]
            raise InfeasibleInstance(f"node {v} admits no valid segment (dist {d.dist[v]:g})", [v])
        seg = Segment.from_walk(g, w, i, j)
        if not set(seg.nodes) <= covered:
            t = segment_to_tour(g, seg, d, p, origin="tsp-greedy")
            if t.walk.total_time > 0:
                tours.append(t)
                covered |= t.coverage
        i = j + 1
    missing = set(g.nodes) - covered
    if len(g) == 1:
        missing = set()
    if missing:
        raise InfeasibleInstance(f"greedy segmentation leaves {sorted(missing)} uncovered", sorted(missing))
    return renumber(tours)


def longest_segments_per_node(g: Graph, w: Walk, d: DistanceMap, p: InstanceParams) -> List[CandidateTour]:
    """tsp-lp: one longest valid segment from the first walk position of each node."""
    pre = _prefix_times(g, w)
    seen = set()
    tours = []
    for i, v in enumerate(w.nodes):
        if v == g.station or v in seen:
            continue
        seen.add(v)
        j = _longest_from(w, pre, i, d, p)
        if j is None:
            log.info("no valid segment starts at node %s", v)
            continue
        tours.append(segment_to_tour(g, Segment.from_walk(g, w, i, j), d, p, origin="tsp-lp"))
    return renumber(tours)


def dedupe_by_coverage(tours: Iterable[CandidateTour]) -> List[CandidateTour]:
    """Keep the fastest tour for every distinct coverage set (first seen wins ties)."""
    best: Dict[FrozenSet[NodeId], CandidateTour] = {}
    order: List[FrozenSet[NodeId]] = []
    for t in tours:
        cur = best.get(t.coverage)
        if cur is None:
            best[t.coverage] = t
            order.append(t.coverage)
        elif t.walk.total_time < cur.walk.total_time - EPS:
            best[t.coverage] = t
    return renumber(best[c] for c in order)


def multi_tsp_pool(g: Graph, walks: Sequence[Walk], d: DistanceMap, p: InstanceParams) -> List[CandidateTour]:
    if not walks:
        raise ValueError("need at least one walk")
    pool = []
    for w in walks:
        pool.extend(longest_segments_per_node(g, w, d, p))
    return dedupe_by_coverage(pool)


def dijkstra_closed_walks(g: Graph, d: DistanceMap) -> List[List[NodeId]]:
    """All |E| closed walks of the shortest-path-tree baseline, unfiltered.

    One loop per non-tree edge, one out-and-back per non-station node.
    """
    tree = d.tree_edges()
    walks = []
    for u, v, _ in g.edges:
        if frozenset((u, v)) in tree:
            continue
        walks.append(d.path_from_source(u) + d.path_from_source(v)[::-1])
    for v in g.nodes:
        if v == g.station:
            continue
        path = d.path_from_source(v)
        walks.append(path + path[-2::-1])
    return walks


def dijkstra_loop_pool(g: Graph, d: DistanceMap, p: InstanceParams) -> List[CandidateTour]:
    pool = []
    for nodes in dijkstra_closed_walks(g, d):
        fwd = make_tour(g, nodes, p, "dijkstra")
        if fwd.walk.total_time > p.b + EPS:
            continue
        rev = make_tour(g, nodes[::-1], p, "dijkstra")
        pool.append(rev if len(rev.coverage) > len(fwd.coverage) else fwd)
    return renumber(pool)


def renumber(tours: Iterable[CandidateTour], start: int = 0) -> List[CandidateTour]:
    return [replace(t, id=start + i) for i, t in enumerate(tours)]


# -- export -----------------------------------------------------------------

def tour_to_dict(t: CandidateTour) -> dict:
    doc = {
        "id": t.id,
        "origin": t.origin,
        "nodes": list(t.walk.nodes),
        "arrivals": [t.arrival[v] for v in t.walk.nodes],
        "coverage": sorted(t.coverage),
        "time": t.walk.total_time,
    }
    if t.anchor is not None:
        doc["anchor"] = t.anchor
        doc["spur"] = t.spur
    return doc


def tour_from_dict(doc: dict) -> CandidateTour:
    nodes = tuple(doc["nodes"])
    arrival = {}
    # arrivals list is per walk position; first occurrence carries the first arrival
    for v, a in zip(nodes, doc["arrivals"]):
        arrival.setdefault(v, a)
    return CandidateTour(Walk(nodes, doc["time"]), arrival, frozenset(doc["coverage"]),
                         doc["origin"], doc["id"], doc.get("anchor"), doc.get("spur", False))


def export_pool(path, pool: Sequence[CandidateTour]):
    Path(path).write_text(json.dumps([tour_to_dict(t) for t in pool], indent=1), encoding="utf-8")
