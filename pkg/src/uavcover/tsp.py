"""Closed tours through every node, solved on the shortest-path metric closure.

Tours are computed over the complete "hop" graph of geodesic times and then
expanded back to edge-by-edge walks, so nodes may repeat in the result.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .graph import DistanceMap, Graph, NodeId, all_pairs

log = logging.getLogger(__name__)

EXACT_MAX_NODES = 15
_EPS = 1e-9


@dataclass(frozen=True)
class Walk:
    nodes: Tuple[NodeId, ...]
    total_time: float

    def __len__(self):
        return len(self.nodes)


class MetricClosure:
    """All-pairs geodesic times plus the paths that realise them."""

    def __init__(self, g: Graph):
        self.g = g
        self.order = list(g.nodes)
        self.index = {v: i for i, v in enumerate(self.order)}
        self.trees: Dict[NodeId, DistanceMap] = all_pairs(g)
        n = len(self.order)
        self.D = np.zeros((n, n))
        for i, u in enumerate(self.order):
            dist = self.trees[u].dist
            for j, v in enumerate(self.order):
                self.D[i, j] = dist[v]

    def path(self, u: NodeId, v: NodeId) -> List[NodeId]:
        # tree rooted at u gives u -> v
        return self.trees[u].path_from_source(v)

    def expand(self, hop_order: Sequence[int]) -> Walk:
        """Expand a cyclic order of closure indices (starting at the station) to a real walk."""
        seq = [self.order[i] for i in hop_order]
        if len(seq) == 1:
            return Walk((seq[0],), 0.0)
        seq = seq + [seq[0]]
        nodes = [seq[0]]
        for a, b in zip(seq, seq[1:]):
            nodes.extend(self.path(a, b)[1:])
        return Walk(tuple(nodes), self.g.walk_time(nodes))


_closure_cache: Dict[int, MetricClosure] = {}


def metric_closure(g: Graph) -> MetricClosure:
    mc = _closure_cache.get(id(g))
    if mc is None or mc.g is not g:
        mc = MetricClosure(g)
        if len(_closure_cache) > 16:
            _closure_cache.clear()
        _closure_cache[id(g)] = mc
    return mc


def _cycle_cost(D: np.ndarray, order: Sequence[int]) -> float:
    idx = np.asarray(order)
    return float(D[idx, np.roll(idx, -1)].sum())


def solve_tsp_exact(g: Graph) -> Walk:
    """Held-Karp over the metric closure; only for graphs up to 15 nodes."""
    n = len(g)
    if n > EXACT_MAX_NODES:
        raise ValueError(f"exact TSP limited to {EXACT_MAX_NODES} nodes, graph has {n}")
    mc = metric_closure(g)
    s = mc.index[g.station]
    others = [i for i in range(n) if i != s]
    m = len(others)
    if m == 0:
        return mc.expand([s])
    D = mc.D[np.ix_(others, others)]
    from_s = mc.D[s, others]
    full = 1 << m
    dp = np.full((full, m), np.inf)
    par = np.full((full, m), -1, dtype=np.int64)
    for j in range(m):
        dp[1 << j, j] = from_s[j]
    for mask in range(1, full):
        row = dp[mask]
        if not np.isfinite(row).any():
            continue
        cand = row[:, None] + D
        best_j = np.argmin(cand, axis=0)
        best_v = cand[best_j, np.arange(m)]
        for k in range(m):
            bit = 1 << k
            if mask & bit:
                continue
            nm = mask | bit
            if best_v[k] < dp[nm, k] - _EPS:
                dp[nm, k] = best_v[k]
                par[nm, k] = best_j[k]
    last_costs = dp[full - 1] + mc.D[others, s]
    k = int(np.argmin(last_costs))
    order = []
    mask = full - 1
    while k != -1:
        order.append(others[k])
        pk = int(par[mask, k])
        mask ^= 1 << k
        k = pk
    order.reverse()
    return mc.expand([s] + order)


def _nearest_neighbor(D: np.ndarray, start: int, rng: np.random.Generator) -> List[int]:
    n = D.shape[0]
    unvisited = np.ones(n, dtype=bool)
    unvisited[start] = False
    order = [start]
    cur = start
    for _ in range(n - 1):
        d = np.where(unvisited, D[cur], np.inf)
        best = d.min()
        ties = np.flatnonzero(d <= best + _EPS)
        cur = int(ties[rng.integers(len(ties))]) if len(ties) > 1 else int(ties[0])
        unvisited[cur] = False
        order.append(cur)
    return order


def two_opt(D: np.ndarray, order: List[int]) -> List[int]:
    """First-improvement 2-opt with the first city held fixed."""
    tour = list(order)
    n = len(tour)
    if n < 4:
        return tour
    improved = True
    while improved:
        improved = False
        for i in range(1, n - 1):
            t = np.asarray(tour)
            a, b = t[i - 1], t[i]
            c = t[i + 1:]
            d = np.roll(t, -1)[i + 1:]
            delta = D[a, c] + D[b, d] - D[a, b] - D[c, d]
            j = int(np.argmin(delta))
            if delta[j] < -_EPS:
                j += i + 1
                tour[i:j + 1] = tour[i:j + 1][::-1]
                improved = True
    return tour


def or_opt(D: np.ndarray, order: List[int], max_len: int = 3) -> List[int]:
    """Relocate chains of up to ``max_len`` cities (station fixed at position 0)."""
    tour = list(order)
    n = len(tour)
    improved = True
    while improved:
        improved = False
        for length in range(1, max_len + 1):
            for i in range(1, n - length + 1):
                seg = tour[i:i + length]
                prev, nxt = tour[i - 1], tour[(i + length) % n]
                remove_gain = D[prev, seg[0]] + D[seg[-1], nxt] - D[prev, nxt]
                rest = tour[:i] + tour[i + length:]
                r = np.asarray(rest)
                rn = np.roll(r, -1)
                ins_fwd = D[r, seg[0]] + D[seg[-1], rn] - D[r, rn]
                ins_rev = D[r, seg[-1]] + D[seg[0], rn] - D[r, rn]
                jf, jr = int(np.argmin(ins_fwd)), int(np.argmin(ins_rev))
                if min(ins_fwd[jf], ins_rev[jr]) < remove_gain - _EPS:
                    if ins_fwd[jf] <= ins_rev[jr]:
                        tour = rest[:jf + 1] + seg + rest[jf + 1:]
                    else:
                        tour = rest[:jr + 1] + seg[::-1] + rest[jr + 1:]
                    improved = True
                    break
            if improved:
                break
    return tour


def _local_search(D: np.ndarray, order: List[int]) -> List[int]:
    cur = two_opt(D, order)
    while True:
        nxt = two_opt(D, or_opt(D, cur))
        if _cycle_cost(D, nxt) >= _cycle_cost(D, cur) - _EPS:
            return cur
        cur = nxt


def solve_tsp_heuristic(g: Graph, seed: int = 0) -> Walk:
    """Nearest neighbour (random tie-breaks) followed by 2-opt / or-opt."""
    mc = metric_closure(g)
    rng = np.random.default_rng(seed)
    s = mc.index[g.station]
    order = _nearest_neighbor(mc.D, s, rng)
    order = _local_search(mc.D, order)
    return mc.expand(order)


def canonical_form(walk: Walk) -> Tuple[NodeId, ...]:
    """Lexicographically smallest rotation/reflection of the cyclic node sequence."""
    seq = list(walk.nodes[:-1]) if len(walk.nodes) > 1 else list(walk.nodes)
    if not seq:
        return ()
    best = None
    for s in (seq, seq[::-1]):
        lo = min(s)
        for k, v in enumerate(s):
            if v == lo:
                cand = tuple(s[k:] + s[:k])
                if best is None or cand < best:
                    best = cand
    return best


def _double_bridge(order: List[int], rng: np.random.Generator) -> List[int]:
    n = len(order)
    if n <= 2:
        return list(order)
    if n < 8:
        i, j = sorted(rng.choice(np.arange(1, n), size=2, replace=False))
        out = list(order)
        out[i], out[j] = out[j], out[i]
        return out
    a, b, c = sorted(rng.choice(np.arange(2, n - 1), size=3, replace=False))
    return order[:a] + order[b:c] + order[a:b] + order[c:]


def distinct_tours(g: Graph, n: int, seed: int = 0) -> List[Walk]:
    """Up to ``n`` pairwise distinct locally optimal tours, fastest first.

    Attempt 0 is ``solve_tsp_heuristic(g, seed)``; later attempts alternate
    fresh randomised constructions with double-bridge kicks of tours already
    found.  The attempt sequence depends only on ``seed``, so the result for a
    larger ``n`` always contains the result for a smaller one.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    mc = metric_closure(g)
    s = mc.index[g.station]
    found: Dict[Tuple[NodeId, ...], Walk] = {}
    orders: List[List[int]] = []
    budget = 10 * n
    for attempt in range(budget):
        if len(found) >= n:
            break
        if attempt == 0:
            order = _local_search(mc.D, _nearest_neighbor(mc.D, s, np.random.default_rng(seed)))
        else:
            rng = np.random.default_rng([seed, attempt])
            if attempt % 2 == 1 or not orders:
                start = _nearest_neighbor(mc.D, s, rng)
            else:
                start = _double_bridge(orders[int(rng.integers(len(orders)))], rng)
            order = _local_search(mc.D, start)
        w = mc.expand(order)
        key = canonical_form(w)
        if key not in found:
            found[key] = w
            orders.append(order)
    if len(found) < n:
        log.info("distinct_tours: %d of %d requested tours after %d attempts", len(found), n, budget)
    return [found[k] for k in sorted(found, key=lambda k: (found[k].total_time, k))]
