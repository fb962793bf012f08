"""Feasibility classes, replicated dispatch schedules and a replay simulator."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

from .graph import DistanceMap, Graph, InstanceParams, NodeId, shortest_paths
from .setcover import Selection, replication_factor
from .tours import EPS, CandidateTour


class MalformedSchedule(ValueError):
    pass


@dataclass(frozen=True)
class FeasibilityClass:
    reachable: bool
    size: str  # small | large
    regime: str  # single-uav | replicated | partitioned | infeasible
    k: int  # ceil((B + b) / T)
    note: str = ""


def classify_instance(g: Graph, p: InstanceParams, tsp_time: float,
                      d: Optional[DistanceMap] = None) -> FeasibilityClass:
    d = d or shortest_paths(g)
    reachable = max(d.dist.values()) <= p.b / 2 + EPS
    size = "small" if tsp_time <= p.b + EPS else "large"
    k = max(1, math.ceil((p.B + p.b) / p.T - EPS))
    if not reachable:
        return FeasibilityClass(False, size, "infeasible", k, "some node is farther than b/2 from the station")
    if size == "small" and p.T >= p.B + p.b - EPS:
        regime, note = "single-uav", "one UAV flying the TSP tour suffices"
    elif size == "small" and p.T >= p.b - EPS:
        regime, note = "replicated", f"{k} UAVs dispatched every T on the TSP tour"
    else:
        regime = "partitioned"
        note = ("single UAV would need T >= (number of small subgraphs) * (B + b)"
                if size == "large" else "T < b: the graph must be split among UAVs flying at once")
    return FeasibilityClass(True, size, regime, k, note)


@dataclass(frozen=True)
class Dispatch:
    uav: int
    tour: int
    t0: float
    period: float


@dataclass
class Schedule:
    dispatches: List[Dispatch]
    num_uavs: int
    num_tours: int
    replication: Dict[int, int] = field(default_factory=dict)


@dataclass
class SimReport:
    horizon: float
    max_age_per_node: Dict[NodeId, float]
    battery_violations: int
    latency_violations: int
    pass_: bool

    @property
    def passed(self) -> bool:
        return self.pass_

    @property
    def max_age(self) -> float:
        return max(self.max_age_per_node.values(), default=0.0)


def build_schedule(sel: Selection, pool: Sequence[CandidateTour], p: InstanceParams,
                   replication: str = "per-tour", override: Optional[Dict[int, int]] = None) -> Schedule:
    """k UAVs per chosen tour, launched at 0, T, 2T, ... and repeating every k*T.

    ``override`` forces the UAV count of individual tours (used to probe
    whether a smaller count would still work).
    """
    by_id = {t.id: t for t in pool}
    dispatches = []
    reps = {}
    uav = 0
    for tid in sorted(sel.chosen):
        k = replication_factor(by_id[tid], p, replication)
        if override and tid in override:
            k = override[tid]
        reps[tid] = k
        for j in range(k):
            dispatches.append(Dispatch(uav, tid, j * p.T, k * p.T))
            uav += 1
    return Schedule(dispatches, uav, len(sel.chosen), reps)


def uav_count(sel: Selection, pool: Sequence[CandidateTour], p: InstanceParams,
              replication: str = "per-tour") -> int:
    by_id = {t.id: t for t in pool}
    return sum(replication_factor(by_id[i], p, replication) for i in sel.chosen)


def default_horizon(sched: Schedule, pool: Sequence[CandidateTour], p: InstanceParams) -> float:
    by_id = {t.id: t for t in pool}
    period = max((d.period for d in sched.dispatches), default=p.T)
    tmax = max((by_id[d.tour].walk.total_time for d in sched.dispatches), default=0.0)
    return 2 * max(period, p.T) + tmax


def simulate(sched: Schedule, pool: Sequence[CandidateTour], g: Graph, p: InstanceParams,
             horizon: Optional[float] = None, nodes: Optional[Iterable[NodeId]] = None) -> SimReport:
    """Replay every mission and track each node's age.

    All nodes count as serviced at time 0 and the station is never checked.  A UAV launches at its scheduled
    time, or as soon as its recharge completes if that is later; such a
    late launch is a battery violation and the delay propagates.  ``nodes``
    restricts which node ages are checked (default: all of ``g``).
    """
    by_id = {t.id: t for t in pool}
    per_uav: Dict[int, List[Dispatch]] = {}
    for dsp in sched.dispatches:
        if dsp.tour not in by_id:
            raise MalformedSchedule(f"dispatch references unknown tour {dsp.tour}")
        if dsp.t0 < 0 or not dsp.period > 0:
            raise MalformedSchedule(f"bad dispatch timing {dsp}")
        per_uav.setdefault(dsp.uav, []).append(dsp)

    min_h = default_horizon(sched, pool, p)
    if horizon is None:
        horizon = min_h
    elif horizon < min_h - EPS:
        raise ValueError(f"horizon {horizon} shorter than required {min_h}")
    # the station hosts the fleet and counts as permanently serviced
    check = [v for v in (g.nodes if nodes is None else nodes) if v != g.station]

    # queue of (scheduled launch, uav, dispatch index, repetition)
    heap = []
    for uav, ds in per_uav.items():
        for i, dsp in enumerate(ds):
            heapq.heappush(heap, (dsp.t0, uav, i, 0))
    ready: Dict[int, float] = {}
    visits: Dict[NodeId, List[float]] = {v: [] for v in g.nodes}
    battery = 0
    while heap:
        sched_t, uav, i, rep = heapq.heappop(heap)
        dsp = per_uav[uav][i]
        tour = by_id[dsp.tour]
        launch = sched_t
        if uav in ready and ready[uav] > sched_t + EPS:
            launch = ready[uav]
            battery += 1
        if launch > horizon:
            continue
        if tour.walk.total_time > p.b + EPS:
            battery += 1
        t = launch
        wn = tour.walk.nodes
        visits[wn[0]].append(t)
        for a, b in zip(wn, wn[1:]):
            t += g.adj[a][b]
            if t <= horizon:
                visits[b].append(t)
        ready[uav] = launch + tour.walk.total_time + p.B
        # the next repetition keeps its nominal slot unless the UAV is still busy
        heapq.heappush(heap, (dsp.t0 + (rep + 1) * dsp.period, uav, i, rep + 1))

    max_age = {g.station: 0.0} if nodes is None else {}
    latency = 0
    for v in check:
        ts = sorted(visits[v])
        prev = 0.0
        worst = 0.0
        for t in ts + [horizon]:
            gap = t - prev
            if gap > worst:
                worst = gap
            if gap > p.T + EPS:
                latency += 1
            prev = t
        max_age[v] = worst
    ok = battery == 0 and latency == 0 and all(a <= p.T + EPS for a in max_age.values())
    return SimReport(horizon, max_age, battery, latency, ok)
