"""Slow reference implementations used only by the tests.

Each one is written independently of the package code it checks:
Bellman-Ford for shortest paths, Floyd-Warshall plus permutations for TSP,
numpy subset enumeration for set cover and networkx cycle enumeration for
lollipop tours.
"""

from __future__ import annotations

import itertools
import math

import networkx as nx
import numpy as np


def bellman_ford(g, source=None):
    source = g.station if source is None else source
    dist = {v: math.inf for v in g.nodes}
    dist[source] = 0.0
    for _ in range(len(g.nodes) - 1):
        changed = False
        for u, v, w in g.edges:
            if dist[u] + w < dist[v]:
                dist[v] = dist[u] + w
                changed = True
            if dist[v] + w < dist[u]:
                dist[u] = dist[v] + w
                changed = True
        if not changed:
            break
    return dist


def floyd_warshall(g):
    idx = {v: i for i, v in enumerate(g.nodes)}
    n = len(idx)
    D = np.full((n, n), np.inf)
    np.fill_diagonal(D, 0.0)
    for u, v, w in g.edges:
        D[idx[u], idx[v]] = min(D[idx[u], idx[v]], w)
        D[idx[v], idx[u]] = min(D[idx[v], idx[u]], w)
    for k in range(n):
        D = np.minimum(D, D[:, k:k + 1] + D[k:k + 1, :])
    return D, idx


def brute_tsp(g):
    """Shortest closed walk from the station through every node."""
    if len(g.nodes) == 1:
        return 0.0
    D, idx = floyd_warshall(g)
    s = idx[g.station]
    rest = [idx[v] for v in g.nodes if v != g.station]
    best = math.inf
    for perm in itertools.permutations(rest):
        if perm[0] > perm[-1]:
            continue  # reversal gives the same tour
        cost = D[s, perm[0]] + sum(D[a, b] for a, b in zip(perm, perm[1:])) + D[perm[-1], s]
        best = min(best, cost)
    return float(best)


def brute_cover(universe, sets):
    """Minimum total weight of a cover; ``sets`` is a list of (elements, weight)."""
    elems = sorted(universe)
    pos = {e: i for i, e in enumerate(elems)}
    full = (1 << len(elems)) - 1
    cov = np.zeros(1, dtype=np.int64)
    wt = np.zeros(1)
    for elements, w in sets:
        m = 0
        for e in elements:
            if e in pos:
                m |= 1 << pos[e]
        cov = np.concatenate([cov, cov | m])
        wt = np.concatenate([wt, wt + w])
    ok = cov == full
    if not ok.any():
        return None
    return float(wt[ok].min())


# -- lollipop reference -------------------------------------------------------

def _canon(cyc):
    rev = (cyc[0],) + tuple(reversed(cyc[1:]))
    return min(tuple(cyc), rev)


def _rotate_to(cyc, v):
    i = cyc.index(v)
    return tuple(cyc[i:]) + tuple(cyc[:i])


def _feasible(g, dist, p, cyc, eps=1e-9):
    w = g.adj
    ctime = sum(w[a][b] for a, b in zip(cyc, cyc[1:] + cyc[:1]))
    v = cyc[0]
    if 2 * dist[v] + ctime > p.b + eps:
        return False, ctime
    best = math.inf
    for seq in (cyc, (cyc[0],) + tuple(reversed(cyc[1:]))):
        t, seen = 0.0, {seq[0]: 0.0}
        for a, b in zip(seq, seq[1:]):
            t += w[a][b]
            seen.setdefault(b, t)
        best = min(best, dist[v] + max(seen.values()))
    return best <= p.T + eps, ctime


def _ear_predecessors(g, dist, cyc):
    """Cycles that become ``cyc`` after inserting one ear of one or two nodes."""
    out = set()
    m = len(cyc)
    for size in (1, 2):
        if m - size < 2:
            continue
        for start in range(1, m - size + 1):
            ear = cyc[start:start + size]
            x = cyc[start - 1]
            y = cyc[(start + size) % m]
            if y not in g.adj[x] or x == y:
                continue
            floor = min(dist[x], dist[y]) - 1e-9
            if any(dist[u] < floor for u in ear):
                continue
            rest = cyc[:start] + cyc[start + size:]
            out.add(_canon(rest))
    return out


def brute_lollipops(g, v, p, dist=None):
    """Node sets of maximal lollipop cycles at ``v`` with their best cycle time.

    All simple outward cycles through ``v`` are enumerated; a cycle counts
    when it is feasible, can be reduced ear by ear to an initial cycle
    through feasible cycles only, and no feasible cycle extends it by an ear.
    """
    dist = dist or bellman_ford(g)
    outward = [u for u in g.nodes if dist[u] >= dist[v] - 1e-9]
    H = nx.Graph()
    H.add_nodes_from(outward)
    H.add_edges_from((a, b) for a, b, _ in g.edges if a in H and b in H)
    cycles = set()
    for c in nx.simple_cycles(H):
        if v in c:
            cycles.add(_canon(_rotate_to(list(c), v)))
    nbrs = sorted(u for u in g.adj[v] if u in H)
    triangles = {c for c in cycles if len(c) == 3}
    initial = set(triangles)
    if not triangles:
        initial = {(v, a) for a in nbrs}
        cycles |= initial
    feas = {}
    for c in cycles:
        ok, t = _feasible(g, dist, p, c)
        if ok:
            feas[c] = t
    preds = {c: _ear_predecessors(g, dist, c) & feas.keys() for c in feas}
    reach = {c for c in feas if c in initial}
    changed = True
    while changed:
        changed = False
        for c in feas:
            if c not in reach and preds[c] & reach:
                reach.add(c)
                changed = True
    extended = set()
    for c in feas:
        extended |= preds[c]
    result = {}
    for c in reach:
        if c in extended:
            continue
        key = tuple(sorted(set(c)))
        if key not in result or feas[c] < result[key]:
            result[key] = feas[c]
    return result
