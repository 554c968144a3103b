"""Command-line interface: ``warpcone <subcommand> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .exceptions import ConfigError, ParseError, WarpconeError
from .expansion import estimate_alpha
from .geometry import dumps_net, greedy_net, parse_space
from .graphs import (
    build_approximating_graph,
    build_lavish_graph,
    build_schreier_graph,
    deserialize,
    serialize,
)
from .harness import (
    CANDIDATES_PER_NODE,
    ExperimentConfig,
    emit_csv,
    emit_json,
    emit_svg,
    resolve_action,
    run_experiment,
)
from .partition import SampleCloud, build_voronoi_partition, partition_summary
from .spectra import EXACT_CHEEGER_LIMIT, cheeger_bounds, cheeger_exact, lambda2, sigma2
from .warped import build_level_set_graph, serialize_level_set

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
FORMATS = ("csv", "json", "edgelist", "svg")


def _add_common(p, *names):
    if "space" in names:
        p.add_argument("--space", help="space id, e.g. circle:6.283185307179586 or sphere2:1")
    if "action" in names:
        p.add_argument("--action", help="catalog action id, e.g. s2_free_rotations")
    if "r" in names:
        p.add_argument("--r", type=float, help="net separation in the base metric")
    if "t" in names:
        p.add_argument("--t", type=float, help="warped scale t >= 1")
    if "samples" in names:
        p.add_argument("--samples", type=int, default=None,
                       help="samples per cell (candidate budget for `net`)")
    p.add_argument("--seed", type=int, default=0)
    if "threshold" in names:
        p.add_argument("--threshold", type=int, default=1, help="edge count threshold tau")
    if "inflation" in names:
        p.add_argument("--inflation", type=float, default=0.0,
                       help="lavish inflation delta (0 = approximating graph)")
    p.add_argument("--out", default="-", help="output file (directory for `experiment`)")
    p.add_argument("--format", choices=FORMATS, default=None)
    p.add_argument("--config", help="JSON config file (ExperimentConfig fields)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpcone", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("net", help="maximal r-separated net")
    _add_common(p, "space", "action", "r", "samples")
    p = sub.add_parser("partition", help="Voronoi partition summary")
    _add_common(p, "space", "action", "r", "samples")
    p = sub.add_parser("graph", help="approximating or lavish graph")
    _add_common(p, "space", "action", "r", "samples", "threshold", "inflation")
    p = sub.add_parser("warp", help="level-set graph X_t")
    _add_common(p, "space", "action", "t")
    p = sub.add_parser("spectra", help="lambda2, sigma2 and Cheeger bounds")
    _add_common(p, "space", "action", "r", "samples", "threshold", "inflation")
    p.add_argument("graph", nargs="?", help="edge-list file instead of building from an action")
    p = sub.add_parser("expand", help="expansion-in-measure estimate")
    _add_common(p, "space", "action", "r", "samples", "threshold")
    p = sub.add_parser("schreier", help="Schreier graph of a finite action")
    _add_common(p, "action")
    p = sub.add_parser("experiment", help="run a schedule from a config")
    _add_common(p, "space", "action", "samples", "threshold", "inflation")
    p.add_argument("--mode", default=None)
    p.add_argument("--schedule", default=None, help="comma-separated r, t or group sizes")
    return parser


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        raise ConfigError(f"{args.command} needs --{', --'.join(missing)}")


def _space(args):
    if args.space:
        try:
            return parse_space(args.space)
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
    if getattr(args, "action", None):
        return resolve_action(args.action).space
    raise ConfigError(f"{args.command} needs --space or --action")


def _partition(args, action_needed=True):
    _require(args, "r")
    if action_needed:
        _require(args, "action")
        action = resolve_action(args.action, args.space)
        space = action.space
    else:
        action, space = None, _space(args)
    rng = np.random.default_rng(args.seed)
    net = greedy_net(space, args.r, CANDIDATES_PER_NODE * space.estimate_net_size(args.r), rng)
    cloud = SampleCloud.sample(space, (args.samples or 200) * len(net), rng)
    return action, build_voronoi_partition(space, net, cloud)


def _json(obj) -> bytes:
    return (json.dumps(obj, indent=2) + "\n").encode("ascii")


def _cmd_net(args):
    _require(args, "r")
    space = _space(args)
    budget = args.samples or CANDIDATES_PER_NODE * space.estimate_net_size(args.r)
    net = greedy_net(space, args.r, budget, args.seed)
    if args.format == "json":
        return _json({"space": space.describe(), "r": net.r, "size": len(net),
                      "candidate_budget": net.candidate_budget,
                      "density_deficit": net.density_deficit})
    return dumps_net(net).encode("ascii")


def _cmd_partition(args):
    _, part = _partition(args, action_needed=False)
    return _json(partition_summary(part, seed=args.seed))


def _graph_from_args(args):
    action, part = _partition(args)
    graph, tm = build_approximating_graph(action, part, args.threshold)
    if args.inflation > 0:
        graph = build_lavish_graph(action, part, args.inflation)
    return action, part, graph, tm


def _graph_summary(graph, extra=None):
    out = {"num_vertices": graph.n, "num_edges": graph.m,
           "max_degree": int(graph.degrees().max()) if graph.n else 0}
    out.update(extra or {})
    return out


def _cmd_graph(args):
    _, _, graph, _ = _graph_from_args(args)
    if args.format == "json":
        return _json(_graph_summary(graph))
    return serialize(graph)


def _cmd_warp(args):
    _require(args, "action", "t")
    action = resolve_action(args.action, args.space)
    level = build_level_set_graph(action, args.t, random_state=args.seed)
    if args.format == "json":
        return _json(_graph_summary(level.graph, {"t": level.t, "r": level.net.r}))
    return serialize_level_set(level)


def spectral_report(graph, tm=None) -> dict:
    """JSON-ready spectral summary of a graph (and its transition matrix if known)."""
    spec = lambda2(graph)
    bounds = cheeger_bounds(graph, spec)
    report = {
        "lambda2": spec.lambda2,
        "sigma2": None if tm is None else sigma2(tm),
        "cheeger_lower": bounds.lower,
        "cheeger_upper": bounds.upper,
        "iterations": spec.iterations,
        "residual": spec.residual,
    }
    if graph.n <= EXACT_CHEEGER_LIMIT:
        exact = cheeger_exact(graph)
        report["cheeger_exact"] = exact.upper
        report["witness"] = [int(v) for v in exact.witness]
    return report


def _cmd_spectra(args):
    if args.graph:
        try:
            with open(args.graph, "rb") as fh:
                graph = deserialize(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read {args.graph}: {exc}") from None
        return _json(spectral_report(graph))
    _, _, graph, tm = _graph_from_args(args)
    return _json(spectral_report(graph, tm))


def _cmd_expand(args):
    action, part = _partition(args)
    graph, tm = build_approximating_graph(action, part, args.threshold)
    fiedler = lambda2(graph).fiedler if graph.n > 1 else None
    report = estimate_alpha(action, part, tm, fiedler, random_state=args.seed)
    return _json(report.to_dict())


def _cmd_schreier(args):
    _require(args, "action")
    action = resolve_action(args.action)
    if not action.is_finite:
        raise ConfigError("schreier needs a finite action (schreier_cyclic:<n>, schreier_sl2:<p>)")
    graph = build_schreier_graph(action)
    if args.format == "json":
        return _json(_graph_summary(graph, {"lambda2": lambda2(graph).lambda2}))
    return serialize(graph)


def _experiment_config(args) -> ExperimentConfig:
    data = {}
    if args.config:
        cfg = ExperimentConfig.from_json(args.config)
        data = cfg.to_dict()
    overrides = {
        "action": args.action, "space": args.space, "mode": args.mode,
        "samples_per_cell": args.samples,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.schedule:
        try:
            data["schedule"] = [float(v) for v in args.schedule.split(",")]
        except ValueError:
            raise ConfigError(f"bad schedule {args.schedule!r}") from None
    if not args.config:
        data.update(seed=args.seed, threshold=args.threshold, inflation=args.inflation)
    if args.format:
        data["outputs"] = [args.format]
    data.setdefault("schedule", [])
    return ExperimentConfig.from_dict(data)


def _cmd_experiment(args):
    config = _experiment_config(args)
    result = run_experiment(config)
    if args.out != "-":
        for path in result.write(args.out):
            logging.getLogger(__name__).info("wrote %s", path)
        return b""
    fmt = config.outputs[0]
    if fmt == "json":
        return emit_json(result.rows, config)
    if fmt == "svg":
        return emit_svg(result.rows, "t" if config.mode == "level_set" else "num_vertices", "lambda2")
    if fmt == "edgelist":
        return b"".join(data for _, data in sorted(result.graphs.items()))
    return emit_csv(result.rows)


COMMANDS = {
    "net": _cmd_net,
    "partition": _cmd_partition,
    "graph": _cmd_graph,
    "warp": _cmd_warp,
    "spectra": _cmd_spectra,
    "expand": _cmd_expand,
    "schreier": _cmd_schreier,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        data = COMMANDS[args.command](args)
    except (ConfigError, ParseError) as exc:
        print(f"warpcone: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (WarpconeError, ArithmeticError, ValueError) as exc:
        print(f"warpcone: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if data:
        if args.out == "-" or args.command == "experiment":
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
        else:
            with open(args.out, "wb") as fh:
                fh.write(data)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
