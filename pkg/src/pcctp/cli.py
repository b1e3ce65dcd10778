"""Command-line front end: extract, solve, evaluate, compare."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .evaluator import ALGORITHMS, InfeasibleError, expected_regret
from .extract import ExtractConfig, ExtractionError, RasterFormatError, extract_graph, read_raster
from .graph import GraphError, load_graph
from .solver import DEFAULT_MAX_STOCHASTIC, SizeCapError, solve, tree_to_dot

EXIT_OK = 0
EXIT_FORMAT = 2
EXIT_INFEASIBLE = 3
EXIT_SIZE_CAP = 4

ALGO_NAMES = {"pcctp": "pcctp", "greedy": "greedy", "tsp": "optimistic-tsp", "cr": "cyclic-routing"}
ALGO_NAMES.update({a: a for a in ALGORITHMS})

log = logging.getLogger("pcctp")


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _config(args, *keys) -> dict:
    cfg = {"subcommand": args.command}
    for k in keys:
        v = getattr(args, k)
        cfg[k] = str(v) if isinstance(v, Path) else v
    return cfg


def read_targets(path) -> list[tuple[float, float]]:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GraphError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, list):
        raise GraphError(f"{path}: expected a JSON list of {{x, y}} objects")
    try:
        return [(float(t["x"]), float(t["y"])) for t in data]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError(f"{path}: malformed target record: {exc!r}") from None


def cmd_extract(args) -> int:
    cfg = ExtractConfig(args.det_threshold, args.stoch_threshold, args.windy_dist,
                        args.wind_block_prob, args.search_radius, args.dbscan_eps, args.dbscan_min,
                        args.seed, args.shortcut_iterations)
    raster = read_raster(args.mask)
    targets = read_targets(args.targets)
    result = extract_graph(raster, tuple(args.start), targets, cfg)
    doc = result.graph.to_dict(provenance=True)
    doc["config"] = dict(_config(args, "mask", "targets", "start"), **cfg.to_dict())
    doc["warnings"] = result.warnings
    _emit(_dumps(doc), args.out)
    return EXIT_OK


def cmd_solve(args) -> int:
    g = load_graph(args.graph)
    res = solve(g, args.blocked_cost_factor, args.world_cap)
    if args.dot:
        Path(args.dot).write_text(tree_to_dot(res.tree, res.policy))
    if res.policy is None:
        log.error("No Solution: no policy with finite expected cost")
        return EXIT_INFEASIBLE
    doc = res.policy.to_dict()
    doc["tree_size"] = res.tree.size
    doc["policy_size"] = len(res.policy.nodes())
    doc["config"] = _config(args, "graph", "blocked_cost_factor", "world_cap")
    _emit(_dumps(doc), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    g = load_graph(args.graph)
    algo = ALGO_NAMES[args.algo]
    report = expected_regret(g, algo, args.blocked_cost_factor, args.world_cap)
    cfg = _config(args, "graph", "algo", "blocked_cost_factor", "world_cap")
    report.config = cfg
    if args.csv:
        Path(args.csv).write_text(f"# config: {json.dumps(cfg, sort_keys=True)}\n" + report.to_csv())
    _emit(_dumps(report.summary()), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    g = load_graph(args.graph)
    rows = []
    for algo in ALGORITHMS:
        t0 = time.perf_counter()
        report = expected_regret(g, algo, args.blocked_cost_factor, args.world_cap)
        rows.append((algo, report.expected_cost, report.expected_regret, time.perf_counter() - t0))
    cfg = _config(args, "graph", "blocked_cost_factor", "world_cap")
    lines = [f"# config: {json.dumps(cfg, sort_keys=True)}",
             f"{'algorithm':<16} {'expected_cost':>16} {'expected_regret':>16} {'wall_s':>10}"]
    for algo, cost, regret, wall in rows:
        lines.append(f"{algo:<16} {cost:>16.6f} {regret:>16.6f} {wall:>10.6f}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcctp", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", help="raster + targets -> stochastic graph JSON")
    ex.add_argument("mask", type=Path)
    ex.add_argument("targets", type=Path)
    ex.add_argument("--start", nargs=2, type=float, required=True, metavar=("X", "Y"))
    ex.add_argument("--det-threshold", type=float, default=0.9)
    ex.add_argument("--stoch-threshold", type=float, default=0.5)
    ex.add_argument("--windy-dist", type=float, default=200.0)
    ex.add_argument("--wind-block-prob", type=float, default=0.1)
    ex.add_argument("--search-radius", type=float, default=300.0)
    ex.add_argument("--dbscan-eps", type=float, default=50.0)
    ex.add_argument("--dbscan-min", type=int, default=1)
    ex.add_argument("--seed", type=int, default=0)
    ex.add_argument("--shortcut-iterations", type=int, default=100)
    ex.set_defaults(func=cmd_extract)

    def common(sp):
        sp.add_argument("graph", type=Path)
        sp.add_argument("--world-cap", type=int, default=DEFAULT_MAX_STOCHASTIC)
        sp.add_argument("--blocked-cost-factor", type=float, default=1.0)

    so = sub.add_parser("solve", help="compute the optimal contingent policy")
    common(so)
    so.add_argument("--dot", help="write the search tree as Graphviz dot")
    so.set_defaults(func=cmd_solve)

    ev = sub.add_parser("evaluate", help="expected regret of one algorithm over every world")
    common(ev)
    ev.add_argument("--algo", choices=sorted(ALGO_NAMES), default="pcctp")
    ev.add_argument("--csv", help="per-world rows")
    ev.set_defaults(func=cmd_evaluate)

    co = sub.add_parser("compare", help="all algorithms side by side")
    common(co)
    co.set_defaults(func=cmd_compare)

    for sp in (ex, so, ev, co):
        sp.add_argument("--out", default=None, help="output file (default stdout)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except SizeCapError as exc:
        log.error("%s", exc)
        return EXIT_SIZE_CAP
    except (RasterFormatError, GraphError, ExtractionError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_FORMAT
    except InfeasibleError as exc:
        log.error("No Solution: %s", exc)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
