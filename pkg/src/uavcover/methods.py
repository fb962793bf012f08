"""Planning methods end to end: tour pool -> cover -> schedule -> simulation."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .graph import DistanceMap, Graph, InstanceParams, build_grid, build_path, shortest_paths
from .lollipop import MAX_STATES, collect_lollipop_pool
from .scheduler import Schedule, SimReport, build_schedule, simulate
from .setcover import DEFAULT_TIME_LIMIT, Selection, objective_weight, solve_cover
from .tours import (CandidateTour, InfeasibleInstance, dedupe_by_coverage, dijkstra_loop_pool, longest_segments_per_node,
                    multi_tsp_pool, renumber, segment_greedy)
from .tsp import Walk, canonical_form, distinct_tours, solve_tsp_exact, solve_tsp_heuristic

log = logging.getLogger(__name__)

METHODS = ("dijkstra", "tsp-greedy", "tsp-lp-1", "tsp-lp-n", "lollipop", "hybrid")
# graphs this small get the Held-Karp optimum as their primary walk
EXACT_WALK_MAX_NODES = 10

DEFAULT_BATTERY = 5000.0
DEFAULT_RECHARGE = 11000.0
BENCH_LATENCIES = (2500.0, 3000.0, 5000.0, 20000.0)

GRID6_EDGE = 400.0
GRID10_EDGE = 250.0


def preset(name: str) -> Graph:
    """Named benchmark instances: p3, grid2, grid6, grid10."""
    if name == "p3":
        return build_path(3, 1000.0)
    if name == "grid2":
        return build_grid(2, 2, 1000.0, station=0)
    if name == "grid6":
        return build_grid(6, 6, GRID6_EDGE)
    if name == "grid10":
        return build_grid(10, 10, GRID10_EDGE)
    raise KeyError(f"unknown preset {name!r}")


PRESETS = ("p3", "grid2", "grid6", "grid10")


@dataclass
class RunConfig:
    method: str = "hybrid"
    tsp_count: int = 20
    lollipop_n: int = 10
    objective: str = "uav-count"
    replication: str = "per-tour"
    seed: int = 0
    time_limit: float = DEFAULT_TIME_LIMIT
    trials: int = 1
    max_states: int = MAX_STATES

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.tsp_count < 1:
            raise ValueError("tsp_count must be >= 1")
        if self.lollipop_n < 0:
            raise ValueError("lollipop_n must be >= 0")


@dataclass
class Solution:
    method: str
    params: InstanceParams
    config: RunConfig
    tours: List[CandidateTour]  # chosen tours only
    selection: Selection
    schedule: Schedule
    sim: SimReport
    pool_size: int
    wall_time: float
    seed: int = 0

    @property
    def N(self) -> int:
        return self.schedule.num_uavs

    @property
    def K(self) -> int:
        return self.schedule.num_tours


class SimulationFailure(RuntimeError):
    """A schedule produced by the planner did not pass replay; always a bug."""


class Planner:
    """Per-graph caches of walks and lollipop pools shared across runs."""

    def __init__(self, g: Graph):
        self.g = g
        self.d: DistanceMap = shortest_paths(g)
        self._walks: Dict[Tuple[int, int], List[Walk]] = {}
        self._lolli: Dict[Tuple, List[CandidateTour]] = {}

    def primary_walk(self, seed: int) -> Walk:
        return self.walks(seed, 1)[0]

    def walks(self, seed: int, count: int) -> List[Walk]:
        key = (seed, count)
        if key not in self._walks:
            if len(self.g) <= EXACT_WALK_MAX_NODES:
                first = solve_tsp_exact(self.g)
            else:
                first = solve_tsp_heuristic(self.g, seed)
            out = [first]
            seen = {canonical_form(first)}
            if count > 1:
                for w in distinct_tours(self.g, count, seed):
                    if len(out) >= count:
                        break
                    c = canonical_form(w)
                    if c not in seen:
                        seen.add(c)
                        out.append(w)
            self._walks[key] = out
        return self._walks[key]

    def lollipop_pool(self, p: InstanceParams, n: int, max_states: int,
                      require_cover: bool = True) -> List[CandidateTour]:
        key = (p.b, p.B, p.T, n, max_states)
        if key not in self._lolli:
            self._lolli[key] = collect_lollipop_pool(self.g, self.d, p, n, max_states=max_states,
                                                     require_cover=False)
        pool = self._lolli[key]
        if require_cover:
            missing = set(self.g.nodes) - set().union({self.g.station}, *(t.coverage for t in pool))
            if missing:
                raise InfeasibleInstance(f"no lollipop tour reaches nodes {sorted(missing)}", sorted(missing))
        return pool

    def pool(self, p: InstanceParams, cfg: RunConfig, seed: Optional[int] = None) -> List[CandidateTour]:
        seed = cfg.seed if seed is None else seed
        g, d = self.g, self.d
        m = cfg.method
        if m == "dijkstra":
            return dijkstra_loop_pool(g, d, p)
        if m == "tsp-greedy":
            return segment_greedy(g, self.primary_walk(seed), d, p)
        if m == "tsp-lp-1":
            return longest_segments_per_node(g, self.primary_walk(seed), d, p)
        if m == "tsp-lp-n":
            return multi_tsp_pool(g, self.walks(seed, cfg.tsp_count), d, p)
        if m == "lollipop":
            return self.lollipop_pool(p, cfg.lollipop_n, cfg.max_states)
        if m == "hybrid":
            # lollipops only add options here; the TSP segments decide coverage
            tsp = multi_tsp_pool(g, self.walks(seed, cfg.tsp_count), d, p)
            lolli = self.lollipop_pool(p, cfg.lollipop_n, cfg.max_states, require_cover=False)
            return dedupe_by_coverage(list(tsp) + list(lolli))
        raise ValueError(m)

    def solve(self, p: InstanceParams, cfg: RunConfig, seed: Optional[int] = None) -> Solution:
        t0 = time.perf_counter()
        seed = cfg.seed if seed is None else seed
        pool = self.pool(p, cfg, seed)
        if not pool:
            if len(self.g) == 1:
                sel = Selection(frozenset(), 0.0, "optimal")
            else:
                raise ValueError("empty tour pool")
        elif cfg.method == "tsp-greedy":
            # the greedy segmentation is itself the selection
            val = sum(objective_weight(t, cfg.objective, p, cfg.replication) for t in pool)
            sel = Selection(frozenset(t.id for t in pool), val, "greedy")
        else:
            # the time limit covers the whole solve, pool construction included
            # (a small reserve is kept for scheduling and replay)
            budget = max(1.0, 0.95 * cfg.time_limit - (time.perf_counter() - t0))
            sel = solve_cover(pool, self.g, cfg.objective, p, budget, cfg.replication)
        sched = build_schedule(sel, pool, p, cfg.replication)
        report = simulate(sched, pool, self.g, p)
        wall = time.perf_counter() - t0
        if not report.passed:
            raise SimulationFailure(
                f"{cfg.method}: schedule failed replay (latency violations {report.latency_violations}, "
                f"battery violations {report.battery_violations}, max age {report.max_age:g} > T={p.T:g})")
        chosen = [t for t in pool if t.id in sel.chosen]
        return Solution(cfg.method, p, cfg, chosen, sel, sched, report, len(pool), wall, seed)


def solve(g: Graph, p: InstanceParams, cfg: RunConfig) -> Solution:
    return Planner(g).solve(p, cfg)


# methods whose pools do not depend on the seed; their trials collapse to one run
SEEDLESS = ("dijkstra", "lollipop")


@dataclass
class Cell:
    method: str
    latency: float
    trials: List[Optional[Solution]]
    error: str = ""

    @property
    def infeasible(self) -> bool:
        return bool(self.error)

    def mean(self, attr: str) -> float:
        vals = [getattr(s, attr) for s in self.trials]
        return sum(vals) / len(vals)

    @property
    def time_limited(self) -> int:
        return sum(s.selection.proof == "time-limited-incumbent" for s in self.trials)


def _trial(args):
    g, p, cfg, seed = args
    return Planner(g).solve(p, cfg, seed)


def run_cell(planner: Planner, p: InstanceParams, cfg: RunConfig, jobs: int = 1) -> Cell:
    """All trials of one (method, latency) cell; trial t uses seed ``cfg.seed + t``."""
    n = 1 if cfg.method in SEEDLESS else cfg.trials
    seeds = [cfg.seed + t for t in range(n)]
    try:
        if jobs > 1 and n > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=min(jobs, n)) as ex:
                sols = list(ex.map(_trial, [(planner.g, p, cfg, s) for s in seeds]))
        else:
            sols = [planner.solve(p, cfg, s) for s in seeds]
    except InfeasibleInstance as e:
        return Cell(cfg.method, p.T, [], f"INFEASIBLE: {e}")
    return Cell(cfg.method, p.T, sols)


def experiment(g: Graph, p: InstanceParams, latencies: Sequence[float], methods: Sequence[str],
               cfg: RunConfig, jobs: int = 1) -> List[Cell]:
    planner = Planner(g)
    cells = []
    for m in methods:
        mc = replace(cfg, method=m)
        for T in latencies:
            cells.append(run_cell(planner, p.with_latency(T), mc, jobs))
            log.info("%s T=%g done", m, T)
    return cells
