"""0-1 covering program over a candidate tour pool.

One constraint per vertex, one binary variable per tour.  Solvers:
weighted greedy, a depth-first branch-and-bound, and HiGHS through
``scipy.optimize.milp``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .graph import Graph, InstanceParams, NodeId
from .tours import CandidateTour, InfeasibleInstance

log = logging.getLogger(__name__)

OBJECTIVES = ("tour-count", "uav-count", "total-time", "total-card")
DEFAULT_TIME_LIMIT = 60.0
_EPS = 1e-9


@dataclass(frozen=True)
class CoverSet:
    id: int
    elements: FrozenSet[NodeId]
    weight: float


@dataclass
class CoverInstance:
    universe: FrozenSet[NodeId]
    sets: List[CoverSet]

    def uncovered(self) -> List[NodeId]:
        seen = set()
        for s in self.sets:
            seen |= s.elements
        return sorted(self.universe - seen)

    def check(self):
        missing = self.uncovered()
        if missing:
            raise InfeasibleInstance(f"vertices {missing} are in no candidate set", missing)
        bad = [s.id for s in self.sets if not s.weight > 0]
        if bad:
            raise ValueError(f"sets {bad} have non-positive weight")


@dataclass(frozen=True)
class Selection:
    chosen: FrozenSet[int]
    objective_value: float
    proof: str  # optimal | greedy | time-limited-incumbent


def replication_factor(t: CandidateTour, p: InstanceParams, mode: str = "per-tour") -> int:
    """UAVs needed to fly ``t`` every ``T`` seconds given recharge time ``B``."""
    if mode == "per-tour":
        return max(1, math.ceil((t.walk.total_time + p.B) / p.T - _EPS))
    if mode == "uniform":
        return max(1, math.ceil((p.b + p.B) / p.T - _EPS))
    raise ValueError(f"unknown replication mode {mode!r}")


def objective_weight(t: CandidateTour, obj: str, p: InstanceParams, replication: str = "per-tour") -> float:
    if obj == "tour-count":
        return 1.0
    if obj == "uav-count":
        return float(replication_factor(t, p, replication))
    if obj == "total-time":
        return t.walk.total_time
    if obj == "total-card":
        return float(len(t.coverage))
    raise ValueError(f"unknown objective {obj!r}")


def greedy_cover(ci: CoverInstance) -> Selection:
    """Pick the set with most uncovered elements per unit weight until done."""
    ci.check()
    left = set(ci.universe)
    chosen = []
    total = 0.0
    while left:
        best = None
        best_ratio = -1.0
        for s in ci.sets:
            gain = len(s.elements & left)
            if gain == 0:
                continue
            ratio = gain / s.weight
            if ratio > best_ratio + _EPS or (abs(ratio - best_ratio) <= _EPS and s.id < best.id):
                best, best_ratio = s, ratio
        chosen.append(best.id)
        total += best.weight
        left -= best.elements
    return Selection(frozenset(chosen), total, "greedy")


def prune_redundant(ci: CoverInstance, sel: Selection) -> Selection:
    """Drop chosen sets (heaviest first) whose elements the others still cover."""
    by_id = {s.id: s for s in ci.sets}
    chosen = sorted(sel.chosen, key=lambda i: (-by_id[i].weight, -i))
    keep = set(chosen)
    for i in chosen:
        rest = set()
        for j in keep:
            if j != i:
                rest |= by_id[j].elements
        if rest >= ci.universe:
            keep.discard(i)
    if len(keep) == len(sel.chosen):
        return sel
    return Selection(frozenset(keep), sum(by_id[i].weight for i in keep), sel.proof)


class _Timeout(Exception):
    pass


def _bnb(ci: CoverInstance, time_limit: float, incumbent: Selection) -> Selection:
    """Depth-first branch-and-bound.

    Branches on the uncovered element with the fewest usable sets; the i-th
    child takes the i-th such set and forbids the earlier ones.  Bound: each
    uncovered element is charged its cheapest per-element share, rounded up
    when all weights are integral.
    """
    deadline = time.monotonic() + time_limit
    elems = sorted(ci.universe)
    eidx = {e: i for i, e in enumerate(elems)}
    sets = sorted(ci.sets, key=lambda s: s.id)
    masks = [sum(1 << eidx[e] for e in s.elements if e in eidx) for s in sets]
    weights = [s.weight for s in sets]
    integral = all(abs(w - round(w)) < _EPS for w in weights)
    by_elem: List[List[int]] = [[] for _ in elems]
    for j, m in enumerate(masks):
        mm = m
        while mm:
            low = mm & -mm
            by_elem[low.bit_length() - 1].append(j)
            mm ^= low

    best_val = incumbent.objective_value
    best_set = sorted(incumbent.chosen)
    id_of = [s.id for s in sets]
    nodes = 0

    def popcount(x):
        return bin(x).count("1")

    def bound(left: int, banned: int) -> Optional[float]:
        share = {}
        lb_max = 0.0
        total = 0.0
        mm = left
        while mm:
            low = mm & -mm
            i = low.bit_length() - 1
            mm ^= low
            cheapest = math.inf
            wmin = math.inf
            for j in by_elem[i]:
                if banned >> j & 1:
                    continue
                c = share.get(j)
                if c is None:
                    c = weights[j] / popcount(masks[j] & left)
                    share[j] = c
                if c < cheapest:
                    cheapest = c
                if weights[j] < wmin:
                    wmin = weights[j]
            if cheapest == math.inf:
                return None
            total += cheapest
            if wmin > lb_max:
                lb_max = wmin
        lb = max(total, lb_max)
        if integral:
            lb = math.ceil(lb - 1e-7)
        return lb

    def rec(left: int, banned: int, cost: float, picked: List[int]):
        nonlocal best_val, best_set, nodes
        nodes += 1
        if nodes & 1023 == 0 and time.monotonic() > deadline:
            raise _Timeout
        if left == 0:
            if cost < best_val - _EPS:
                best_val = cost
                best_set = sorted(id_of[j] for j in picked)
            return
        lb = bound(left, banned)
        if lb is None or cost + lb >= best_val - _EPS:
            return
        # element with fewest usable sets
        pick_i, pick_opts = -1, None
        mm = left
        while mm:
            low = mm & -mm
            i = low.bit_length() - 1
            mm ^= low
            opts = [j for j in by_elem[i] if not banned >> j & 1]
            if pick_opts is None or len(opts) < len(pick_opts):
                pick_i, pick_opts = i, opts
                if len(opts) <= 1:
                    break
        pick_opts.sort(key=lambda j: (weights[j] / popcount(masks[j] & left), j))
        ban = banned
        for j in pick_opts:
            picked.append(j)
            rec(left & ~masks[j], ban, cost + weights[j], picked)
            picked.pop()
            ban |= 1 << j

    full = (1 << len(elems)) - 1
    try:
        rec(full, 0, 0.0, [])
        proof = "optimal"
    except _Timeout:
        proof = "time-limited-incumbent"
    return Selection(frozenset(best_set), best_val, proof)


def _milp(ci: CoverInstance, time_limit: float, incumbent: Selection) -> Selection:
    from scipy.optimize import Bounds, LinearConstraint, milp
    from scipy.sparse import lil_matrix

    sets = sorted(ci.sets, key=lambda s: s.id)
    elems = sorted(ci.universe)
    eidx = {e: i for i, e in enumerate(elems)}
    A = lil_matrix((len(elems), len(sets)))
    for j, s in enumerate(sets):
        for e in s.elements:
            if e in eidx:
                A[eidx[e], j] = 1.0
    c = np.array([s.weight for s in sets])
    res = milp(c, constraints=LinearConstraint(A.tocsr(), lb=1.0, ub=np.inf),
               integrality=np.ones(len(sets)), bounds=Bounds(0, 1),
               options={"time_limit": time_limit, "mip_rel_gap": 0.0})
    if res.x is None:
        return Selection(incumbent.chosen, incumbent.objective_value, "time-limited-incumbent")
    chosen = frozenset(sets[j].id for j in np.flatnonzero(res.x > 0.5))
    val = float(sum(sets[j].weight for j in np.flatnonzero(res.x > 0.5)))
    if res.status != 0 or val > incumbent.objective_value + _EPS:
        if val > incumbent.objective_value + _EPS:
            chosen, val = incumbent.chosen, incumbent.objective_value
        return Selection(chosen, val, "time-limited-incumbent")
    return Selection(chosen, val, "optimal")


def reduce_instance(ci: CoverInstance) -> CoverInstance:
    """Drop dominated sets and implied elements; the optimum value is unchanged.

    A set is dominated by another covering a superset at no greater weight
    (on exact ties the smaller id survives).  An element is implied when every
    set covering some other element also covers it.
    """
    elems = sorted(ci.universe)
    eidx = {e: i for i, e in enumerate(elems)}
    sets = [(s, sum(1 << eidx[e] for e in s.elements if e in eidx)) for s in ci.sets]
    live = [True] * len(elems)
    while True:
        keep_bits = sum(1 << i for i, ok in enumerate(live) if ok)
        cur = [(s, m & keep_bits) for s, m in sets]
        cur.sort(key=lambda sm: (-bin(sm[1]).count("1"), sm[0].weight, sm[0].id))
        kept: List[Tuple[CoverSet, int]] = []
        for s, m in cur:
            if m == 0:
                continue
            if any(m & ~km == 0 and ks.weight <= s.weight + _EPS for ks, km in kept):
                continue
            kept.append((s, m))
        cols = []
        for i in range(len(elems)):
            if not live[i]:
                cols.append(None)
                continue
            cols.append(sum(1 << j for j, (_, m) in enumerate(kept) if m >> i & 1))
        changed = False
        for i in range(len(elems)):
            if not live[i]:
                continue
            for k in range(len(elems)):
                if k == i or not live[k]:
                    continue
                # element i implied by k when sets(k) is a subset of sets(i)
                if cols[k] & ~cols[i] == 0 and (cols[k] != cols[i] or k < i):
                    live[i] = False
                    changed = True
                    break
        sets = [(s, m) for s, m in kept]
        if not changed:
            break
    universe = frozenset(e for e, ok in zip(elems, live) if ok)
    return CoverInstance(universe, [CoverSet(s.id, s.elements & universe, s.weight)
                                    for s, _ in sorted(sets, key=lambda sm: sm[0].id)])


def exact_cover(ci: CoverInstance, time_limit: float = DEFAULT_TIME_LIMIT,
                backend: str = "auto", reduce: bool = True) -> Selection:
    """Optimal cover, or the best incumbent (never worse than greedy) on timeout.

    ``backend`` is ``"bnb"``, ``"milp"`` or ``"auto"`` (branch-and-bound for
    up to 40 sets after reduction, HiGHS beyond).
    """
    ci.check()
    inc = prune_redundant(ci, greedy_cover(ci))
    if reduce:
        red = reduce_instance(ci)
        if len(red.sets) < len(ci.sets) or len(red.universe) < len(ci.universe):
            # any cover of the reduced instance covers the original one
            sel = exact_cover(red, time_limit, backend, reduce=False)
            if sel.objective_value <= inc.objective_value + _EPS:
                return sel
            return Selection(inc.chosen, inc.objective_value, sel.proof)
    if backend == "auto":
        backend = "bnb" if len(ci.sets) <= 40 else "milp"
    if backend == "bnb":
        sel = _bnb(ci, time_limit, inc)
    elif backend == "milp":
        sel = _milp(ci, time_limit, inc)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    if sel.proof != "optimal":
        log.warning("cover solve stopped at the %.0fs limit; returning incumbent %g", time_limit,
                    sel.objective_value)
    return sel


def build_cover_instance(pool: Sequence[CandidateTour], g: Graph, obj: str, p: InstanceParams,
                         replication: str = "per-tour") -> CoverInstance:
    universe = frozenset(g.nodes)
    sets = [CoverSet(t.id, t.coverage & universe, objective_weight(t, obj, p, replication)) for t in pool]
    return CoverInstance(universe, sets)


def solve_cover(pool: Sequence[CandidateTour], g: Graph, obj: str, p: InstanceParams,
                time_limit: float = DEFAULT_TIME_LIMIT, replication: str = "per-tour",
                backend: str = "auto") -> Selection:
    if not pool:
        raise ValueError("empty tour pool")
    ids = [t.id for t in pool]
    if len(set(ids)) != len(ids):
        raise ValueError("tour ids in pool must be unique")
    ci = build_cover_instance(pool, g, obj, p, replication)
    sel = exact_cover(ci, time_limit, backend)
    by_id = {t.id: t for t in pool}
    union = set()
    for i in sel.chosen:
        union |= by_id[i].coverage
    assert union >= ci.universe, "selection does not cover the graph"
    return sel


def to_lp_text(ci: CoverInstance) -> str:
    """CPLEX-LP rendering of the cover program, for cross-checks with other solvers.

    Variables are ``x<id>``, constraints ``c<node>``.
    """
    lines = ["Minimize", " obj: " + " + ".join(f"{s.weight:.12g} x{s.id}" for s in ci.sets), "Subject To"]
    for e in sorted(ci.universe):
        terms = [f"x{s.id}" for s in ci.sets if e in s.elements]
        lines.append(f" c{e}: " + " + ".join(terms) + " >= 1")
    lines.append("Binary")
    lines.extend(f" x{s.id}" for s in ci.sets)
    lines.append("End")
    return "\n".join(lines) + "\n"
