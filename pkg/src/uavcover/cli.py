"""Command line: generate instances, solve, sweep experiments, export plot data.

Exit codes: 0 solved and verified, 2 infeasible instance, 3 solver hit its
time limit (the incumbent was still verified), 4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .graph import (Graph, GraphError, InstanceParams, build_grid, build_random_geometric, graph_from_dict,
                    graph_to_dict, load_instance, save_instance)
from .methods import (METHODS, DEFAULT_BATTERY, DEFAULT_RECHARGE, PRESETS, Cell, Planner, RunConfig, Solution,
                      experiment, preset)
from .scheduler import Dispatch
from .setcover import DEFAULT_TIME_LIMIT, OBJECTIVES
from .tours import InfeasibleInstance, export_pool, tour_from_dict, tour_to_dict

log = logging.getLogger("uavcover")

EXIT_OK, EXIT_INFEASIBLE, EXIT_TIME_LIMIT, EXIT_IO = 0, 2, 3, 4
TIME_LIMIT_ENV = "UAVCOVER_TIME_LIMIT"


class FormatError(ValueError):
    pass


def default_time_limit() -> float:
    raw = os.environ.get(TIME_LIMIT_ENV)
    if not raw:
        return DEFAULT_TIME_LIMIT
    try:
        return float(raw)
    except ValueError:
        log.warning("ignoring non-numeric %s=%r", TIME_LIMIT_ENV, raw)
        return DEFAULT_TIME_LIMIT


# -- solution files ---------------------------------------------------------

def solution_to_dict(sol: Solution, g: Graph) -> dict:
    p = sol.params
    return {
        "method": sol.method,
        "seed": sol.seed,
        "params": {"b": p.b, "B": p.B, "T": p.T},
        "instance": graph_to_dict(g),
        "proof": sol.selection.proof,
        "objective": sol.config.objective,
        "objective_value": sol.selection.objective_value,
        "tours": [tour_to_dict(t) for t in sol.tours],
        "dispatches": [{"uav": d.uav, "tour": d.tour, "t0": d.t0, "period": d.period}
                       for d in sol.schedule.dispatches],
        "N": sol.N,
        "K": sol.K,
        "sim": {"pass": sol.sim.passed, "max_age": sol.sim.max_age, "horizon": sol.sim.horizon},
    }


def load_solution(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: not JSON ({e})") from e
    for key in ("params", "tours", "dispatches", "N", "K", "sim"):
        if key not in doc:
            raise FormatError(f"{path}: missing field {key!r}")
    return doc


def plot_data(doc: dict) -> dict:
    """Per-tour polylines (node coordinates in walk order) and per-UAV timelines."""
    try:
        coords = {}
        if "instance" in doc:
            g, _ = graph_from_dict(doc["instance"])
            coords = g.coords
        tours = [tour_from_dict(t) for t in doc["tours"]]
        dispatches = [Dispatch(int(d["uav"]), int(d["tour"]), float(d["t0"]), float(d["period"]))
                      for d in doc["dispatches"]]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"malformed solution: {e}") from e
    known = {t.id for t in tours}
    for d in dispatches:
        if d.tour not in known:
            raise FormatError(f"dispatch of uav {d.uav} references unknown tour {d.tour}")
    lines = []
    for t in tours:
        pts = [list(coords[v]) for v in t.walk.nodes] if coords else []
        lines.append({"tour": t.id, "nodes": list(t.walk.nodes), "points": pts, "time": t.walk.total_time})
    times = {t.id: t.walk.total_time for t in tours}
    timeline = [{"uav": d.uav, "tour": d.tour, "t0": d.t0, "period": d.period, "duration": times[d.tour]}
                for d in dispatches]
    return {"polylines": lines, "timeline": timeline}


# -- argument handling ------------------------------------------------------

def _load_graph(spec: str) -> Tuple[Graph, Optional[InstanceParams]]:
    if spec.startswith("preset:"):
        return preset(spec.split(":", 1)[1]), None
    return load_instance(spec)


def _params(args, file_params: Optional[InstanceParams], latency: Optional[float]) -> InstanceParams:
    b = args.battery if args.battery is not None else (file_params.b if file_params else DEFAULT_BATTERY)
    B = args.recharge if args.recharge is not None else (file_params.B if file_params else DEFAULT_RECHARGE)
    if latency is None:
        if file_params is None:
            raise SystemExit("no latency given: pass --latency or store params in the instance file")
        latency = file_params.T
    return InstanceParams(b, B, latency)


def _config(args, method: Optional[str] = None) -> RunConfig:
    return RunConfig(method=method or args.method, tsp_count=args.tsp_count, lollipop_n=args.lollipop_n,
                     objective=args.objective, replication=args.replication, seed=args.seed,
                     time_limit=args.time_limit, trials=getattr(args, "trials", 1))


def _write(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _add_model_flags(sp: argparse.ArgumentParser, latency_many: bool = False):
    if latency_many:
        sp.add_argument("--latency", type=float, nargs="+", required=True, help="latencies T to sweep (s)")
    else:
        sp.add_argument("--latency", type=float, help="uniform latency T (s); defaults to the instance file")
    sp.add_argument("--battery", type=float, help=f"flight budget b (s), default {DEFAULT_BATTERY:g}")
    sp.add_argument("--recharge", type=float, help=f"recharge time B (s), default {DEFAULT_RECHARGE:g}")
    sp.add_argument("--tsp-count", type=int, default=20)
    sp.add_argument("--lollipop-n", type=int, default=10)
    sp.add_argument("--objective", choices=OBJECTIVES, default="uav-count")
    sp.add_argument("--replication", choices=("per-tour", "uniform"), default="per-tour",
                    help="per-tour: ceil((time+B)/T) per tour; uniform: ceil((b+B)/T) for all")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--time-limit", type=float, default=default_time_limit(),
                    help=f"seconds per solve (env {TIME_LIMIT_ENV})")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavcover", description="Persistent UAV coverage planner")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    gen = sub.add_parser("generate", help="write an instance file")
    gsub = gen.add_subparsers(dest="kind", required=True)
    gg = gsub.add_parser("grid")
    gg.add_argument("--rows", type=int, required=True)
    gg.add_argument("--cols", type=int, required=True)
    gg.add_argument("--edge-time", type=float, default=250.0)
    gg.add_argument("--station", type=int)
    gr = gsub.add_parser("geometric")
    gr.add_argument("--n", type=int, required=True)
    gr.add_argument("--radius", type=float, required=True)
    gr.add_argument("--side", type=float, default=1000.0)
    gr.add_argument("--seed", type=int, default=0)
    gr.add_argument("--station-policy", choices=("centroid-most", "corner-most"), default="centroid-most")
    for sp in (gg, gr):
        sp.add_argument("--battery", type=float)
        sp.add_argument("--recharge", type=float)
        sp.add_argument("--latency", type=float)
        sp.add_argument("--out", required=True)

    so = sub.add_parser("solve", help="plan, verify by simulation and write a solution file")
    so.add_argument("instance", help="instance file or preset:{%s}" % ",".join(PRESETS))
    so.add_argument("--method", choices=METHODS, default="hybrid")
    _add_model_flags(so)
    so.add_argument("--out", help="solution JSON path")

    ex = sub.add_parser("experiment", help="CSV of N and K per method and latency")
    ex.add_argument("instance")
    ex.add_argument("--method", choices=METHODS, nargs="+", default=list(METHODS))
    _add_model_flags(ex, latency_many=True)
    ex.add_argument("--trials", type=int, default=1)
    ex.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel trial workers")
    ex.add_argument("--with-time", action="store_true", help="add a mean wall-time column (not reproducible)")
    ex.add_argument("--out", help="CSV path (default stdout)")

    pdp = sub.add_parser("plot-data", help="polylines and dispatch timeline of a solution")
    pdp.add_argument("solution")
    pdp.add_argument("--out")

    po = sub.add_parser("pool", help="export the candidate tour pool of a method")
    po.add_argument("instance")
    po.add_argument("--method", choices=METHODS, default="hybrid")
    _add_model_flags(po)
    po.add_argument("--out", required=True)
    return ap


def cmd_generate(args) -> int:
    if args.kind == "grid":
        g = build_grid(args.rows, args.cols, args.edge_time, args.station)
    else:
        g = build_random_geometric(args.n, args.radius, args.side, args.seed, args.station_policy)
    params = None
    if args.latency is not None:
        params = InstanceParams(args.battery or DEFAULT_BATTERY, args.recharge or DEFAULT_RECHARGE, args.latency)
    save_instance(args.out, g, params)
    print(f"wrote {len(g)} nodes, {len(g.edges)} edges, station {g.station} -> {args.out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    g, fp = _load_graph(args.instance)
    p = _params(args, fp, args.latency)
    sol = Planner(g).solve(p, _config(args))
    if args.out:
        Path(args.out).write_text(json.dumps(solution_to_dict(sol, g), indent=1), encoding="utf-8")
    print(f"method={sol.method} N={sol.N} K={sol.K} time={sol.wall_time:.2f}s "
          f"sim={'pass' if sol.sim.passed else 'FAIL'} max_age={sol.sim.max_age:g} proof={sol.selection.proof}")
    return EXIT_TIME_LIMIT if sol.selection.proof == "time-limited-incumbent" else EXIT_OK


def cells_to_csv(cells: Sequence[Cell], with_time: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["method", "latency", "N", "K", "trials", "time_limited"]
    if with_time:
        head.append("time")
    w.writerow(head)
    for c in cells:
        if c.infeasible:
            row = [c.method, f"{c.latency:g}", "INFEASIBLE", "INFEASIBLE", 0, 0]
            if with_time:
                row.append("")
        else:
            row = [c.method, f"{c.latency:g}", f"{c.mean('N'):.2f}", f"{c.mean('K'):.2f}",
                   len(c.trials), c.time_limited]
            if with_time:
                row.append(f"{c.mean('wall_time'):.2f}")
        w.writerow(row)
    return buf.getvalue()


def cmd_experiment(args) -> int:
    g, fp = _load_graph(args.instance)
    p = _params(args, fp, args.latency[0])
    cfg = _config(args, method=args.method[0])
    cells = experiment(g, p, args.latency, args.method, cfg, jobs=args.jobs)
    _write(args.out, cells_to_csv(cells, args.with_time))
    if any(c.infeasible for c in cells):
        return EXIT_INFEASIBLE
    if any(c.time_limited for c in cells):
        return EXIT_TIME_LIMIT
    return EXIT_OK


def cmd_plot_data(args) -> int:
    out = plot_data(load_solution(args.solution))
    _write(args.out, json.dumps(out, indent=1) + "\n")
    return EXIT_OK


def cmd_pool(args) -> int:
    g, fp = _load_graph(args.instance)
    p = _params(args, fp, args.latency)
    pool = Planner(g).pool(p, _config(args))
    export_pool(args.out, pool)
    print(f"wrote {len(pool)} tours -> {args.out}")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "experiment": cmd_experiment,
            "plot-data": cmd_plot_data, "pool": cmd_pool}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except InfeasibleInstance as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, FormatError, GraphError, KeyError, json.JSONDecodeError) as e:
        # unreadable files and malformed instances alike
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        # parameter combinations no schedule can satisfy
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
