"""Maximum lollipop tours: a stem from the station plus an outward cycle.

A cycle is stored as a tuple starting at its anchor and implicitly closed
back to it.  A 2-tuple ``(v, a)`` is a spur, flown ``v -> a -> v``.

Cycles grow by ear insertion: a cycle edge ``(x, y)`` is replaced with
``x -> u -> y`` when ``u`` neighbours both endpoints, or with
``x -> u -> u' -> y`` through two new nodes.  The two-node ear is what lets
cycles grow on bipartite graphs such as 4-connected grids, where no node is
adjacent to both ends of an edge.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from .graph import DistanceMap, Graph, InstanceParams, NodeId
from .tours import EPS, CandidateTour, InfeasibleInstance, first_arrivals, make_tour, renumber
from .tsp import solve_tsp_exact, solve_tsp_heuristic

log = logging.getLogger(__name__)

MAX_STATES = 50_000

Cycle = Tuple[NodeId, ...]
CycleKey = Tuple[NodeId, ...]


def cycle_key(cycle: Sequence[NodeId]) -> CycleKey:
    """Hashable key of the cycle's node set; equal node sets give equal keys."""
    return tuple(sorted(set(cycle)))


def canonical_cycle(cycle: Cycle) -> Cycle:
    rev = (cycle[0],) + tuple(reversed(cycle[1:]))
    return min(cycle, rev)


def cycle_time(g: Graph, cycle: Cycle) -> float:
    return sum(g.adj[a][b] for a, b in zip(cycle, cycle[1:] + cycle[:1]))


@dataclass(frozen=True)
class LollipopTour:
    anchor: NodeId
    stem: Tuple[NodeId, ...]
    cycle: Cycle
    cycle_time: float
    time: float

    @property
    def spur(self) -> bool:
        return len(self.cycle) == 2

    @property
    def key(self) -> CycleKey:
        return cycle_key(self.cycle)

    def walk_nodes(self) -> List[NodeId]:
        return list(self.stem) + list(self.cycle[1:]) + [self.anchor] + list(self.stem[-2::-1])

    def to_candidate(self, g: Graph, p: InstanceParams) -> CandidateTour:
        return make_tour(g, self.walk_nodes(), p, "lollipop", anchor=self.anchor, spur=self.spur)


def _max_arrival(g: Graph, d: DistanceMap, cycle: Cycle, ctime: float) -> float:
    """Latest first arrival over the cycle when flown in the stored orientation."""
    v = cycle[0]
    if len(set(cycle)) == len(cycle):
        return d.dist[v] + ctime - g.adj[cycle[-1]][v]
    arr = first_arrivals(g, list(cycle) + [v])
    return d.dist[v] + max(arr.values())


def _orient(g: Graph, d: DistanceMap, cycle: Cycle, ctime: float) -> Tuple[Cycle, float]:
    """Pick the orientation with the earlier latest arrival."""
    rev = (cycle[0],) + tuple(reversed(cycle[1:]))
    fa = _max_arrival(g, d, cycle, ctime)
    ra = _max_arrival(g, d, rev, ctime)
    if ra < fa - EPS or (abs(ra - fa) <= EPS and rev < cycle):
        return rev, ra
    return cycle, fa


def make_lollipop(g: Graph, d: DistanceMap, cycle: Cycle, ctime: Optional[float] = None) -> LollipopTour:
    if ctime is None:
        ctime = cycle_time(g, cycle)
    cyc, _ = _orient(g, d, tuple(cycle), ctime)
    v = cyc[0]
    return LollipopTour(v, tuple(d.path_from_source(v)), cyc, ctime, 2 * d.dist[v] + ctime)


def is_feasible(g: Graph, d: DistanceMap, p: InstanceParams, cycle: Cycle,
                ctime: Optional[float] = None) -> bool:
    if ctime is None:
        ctime = cycle_time(g, cycle)
    v = cycle[0]
    if 2 * d.dist[v] + ctime > p.b + EPS:
        return False
    return _orient(g, d, cycle, ctime)[1] <= p.T + EPS


def _outward(d: DistanceMap, anchor: NodeId, u: NodeId) -> bool:
    return d.dist[u] >= d.dist[anchor] - EPS


def initial_cycle(g: Graph, v: NodeId, d: DistanceMap) -> List[LollipopTour]:
    """Triangles through two outward neighbours of ``v``; spurs if none close."""
    if v == g.station:
        raise ValueError("lollipops are not anchored at the station")
    out = sorted(u for u in g.adj[v] if _outward(d, v, u))
    tri = [(v, a, c) for i, a in enumerate(out) for c in out[i + 1:] if c in g.adj[a]]
    if tri:
        return [make_lollipop(g, d, c) for c in tri]
    return [make_lollipop(g, d, (v, a)) for a in out]


def _splice_ok(d: DistanceMap, anchor: NodeId, x: NodeId, y: NodeId, ear: Sequence[NodeId]) -> bool:
    floor = min(d.dist[x], d.dist[y]) - EPS
    return all(_outward(d, anchor, u) and d.dist[u] >= floor for u in ear)


def expand_candidates(t: LollipopTour, g: Graph, d: DistanceMap) -> List[NodeId]:
    """Nodes that can be spliced between two consecutive cycle nodes.

    Excludes nodes touching only one cycle node and nodes closer to the
    station than the pair they would sit between.  Budget feasibility is
    not checked here.
    """
    cyc = t.cycle
    members = set(cyc)
    found = set()
    m = len(cyc)
    for i in range(m):
        x, y = cyc[i], cyc[(i + 1) % m]
        for u in g.adj[x]:
            if u not in members and u in g.adj[y] and _splice_ok(d, t.anchor, x, y, (u,)):
                found.add(u)
    return sorted(found)


def expansion_moves(g: Graph, d: DistanceMap, cycle: Cycle) -> Iterator[Tuple[Cycle, float]]:
    """Every single ear insertion of ``cycle`` with its new cycle time."""
    anchor = cycle[0]
    members = set(cycle)
    m = len(cycle)
    base = cycle_time(g, cycle)
    adj = g.adj
    for i in range(m):
        x, y = cycle[i], cycle[(i + 1) % m]
        wxy = adj[x][y]
        head, tail = cycle[:i + 1], cycle[i + 1:]
        for u in sorted(adj[x]):
            if u in members:
                continue
            if u in adj[y] and _splice_ok(d, anchor, x, y, (u,)):
                yield head + (u,) + tail, base - wxy + adj[x][u] + adj[u][y]
            for u2 in sorted(adj[u]):
                if u2 in members or u2 == u or u2 not in adj[y]:
                    continue
                if _splice_ok(d, anchor, x, y, (u, u2)):
                    yield head + (u, u2) + tail, base - wxy + adj[x][u] + adj[u][u2] + adj[u2][y]


def expand_all(g: Graph, v: NodeId, d: DistanceMap, p: InstanceParams,
               limit: Optional[int] = None, max_states: int = MAX_STATES) -> List[LollipopTour]:
    """Maximum lollipop tours anchored at ``v``, one per distinct cycle node set.

    Exhaustive search is breadth-first.  With ``limit`` the search runs
    depth-first and stops once ``limit`` distinct maximal tours are known.
    At most ``max_states`` cycles are explored either way.
    """
    if limit is not None and limit <= 0:
        return []
    init = [t for t in initial_cycle(g, v, d) if is_feasible(g, d, p, t.cycle, t.cycle_time)]
    seen = set()
    frontier: deque = deque()
    for t in init:
        c = canonical_cycle(t.cycle)
        if c not in seen:
            seen.add(c)
            frontier.append((c, t.cycle_time))
    best: Dict[CycleKey, Tuple[float, Cycle]] = {}
    order: List[CycleKey] = []
    depth_first = limit is not None
    capped = False
    while frontier:
        cyc, ctime = frontier.pop() if depth_first else frontier.popleft()
        grown = False
        children = []
        for nc, nt in expansion_moves(g, d, cyc):
            if not is_feasible(g, d, p, nc, nt):
                continue
            grown = True
            c = canonical_cycle(nc)
            if c in seen:
                continue
            if len(seen) >= max_states:
                capped = True
                continue
            seen.add(c)
            children.append((c, nt))
        if depth_first:
            frontier.extend(reversed(children))
        else:
            frontier.extend(children)
        if not grown:
            k = cycle_key(cyc)
            cur = best.get(k)
            if cur is None:
                order.append(k)
                best[k] = (ctime, cyc)
            elif (ctime, cyc) < cur:
                best[k] = (ctime, cyc)
            if limit is not None and len(best) >= limit:
                break
    if capped:
        log.info("lollipop search at node %s hit the %d-state cap", v, max_states)
    return [make_lollipop(g, d, best[k][1], best[k][0]) for k in order]


def _retour(g: Graph, cycle: Cycle) -> Tuple[Cycle, float]:
    """Shortest closed walk found over the cycle's own node set, from the anchor."""
    nodes = set(cycle)
    sub = g.subgraph(nodes, station=cycle[0])
    w = solve_tsp_exact(sub) if len(sub) <= 9 else solve_tsp_heuristic(sub, 0)
    return tuple(w.nodes[:-1]), w.total_time


def _is_optimal_ring(g: Graph, cycle: Cycle, ctime: float) -> bool:
    # a simple cycle whose edges are all minimum-weight edges of its induced subgraph
    # cannot be beaten by any closed walk over the same nodes
    if len(set(cycle)) != len(cycle):
        return False
    members = set(cycle)
    wmin = min((w for a in members for b, w in g.adj[a].items() if b in members), default=0.0)
    return ctime <= len(cycle) * wmin + EPS


def reoptimize_cycle(t: LollipopTour, g: Graph, d: DistanceMap, p: InstanceParams) -> LollipopTour:
    """Re-tour the cycle's node set; when that is shorter, try to absorb more nodes.

    Repeats until neither step helps.  The node set never shrinks and the
    result stays within the battery and deadline bounds.
    """
    cyc, ctime = t.cycle, t.cycle_time
    if len(cyc) <= 3:
        return t
    while True:
        if _is_optimal_ring(g, cyc, ctime):
            break
        nc, nt = _retour(g, cyc)
        if not (nt < ctime - EPS and is_feasible(g, d, p, nc, nt)):
            break
        cyc, ctime = nc, nt
        grown = [(mt, canonical_cycle(mc)) for mc, mt in expansion_moves(g, d, cyc)
                 if is_feasible(g, d, p, mc, mt)]
        if not grown:
            break
        ctime, cyc = min(grown)
    if cyc == t.cycle:
        return t
    return make_lollipop(g, d, cyc, ctime)


def collect_lollipop_pool(g: Graph, d: DistanceMap, p: InstanceParams, n: int = 10,
                          reoptimize: bool = True, max_states: int = MAX_STATES,
                          require_cover: bool = True) -> List[CandidateTour]:
    """Farthest-first collection of maximum lollipop tours.

    Every node is searched exhaustively until the pool covers the graph;
    after that each node contributes at most ``n`` tours.  With
    ``require_cover=False`` a pool leaving nodes uncovered is returned as is.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    universe = set(g.nodes)
    covered = {g.station}
    pool: List[CandidateTour] = []
    anchors = sorted((v for v in g.nodes if v != g.station), key=lambda v: (-d.dist[v], v))
    for v in anchors:
        full = covered != universe
        if not full and n == 0:
            break
        found = expand_all(g, v, d, p, limit=None if full else n, max_states=max_states)
        keys = set()
        for lt in found:
            if reoptimize:
                lt = reoptimize_cycle(lt, g, d, p)
            if lt.key in keys:
                continue
            keys.add(lt.key)
            ct = lt.to_candidate(g, p)
            pool.append(ct)
            covered |= ct.coverage
    missing = universe - covered
    if missing and require_cover:
        raise InfeasibleInstance(f"no lollipop tour reaches nodes {sorted(missing)}", sorted(missing))
    return renumber(pool)
