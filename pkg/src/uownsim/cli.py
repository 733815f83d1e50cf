"""Command-line front end over the library.

Five subcommands: ``link`` budgets a single hop, ``path`` analyzes an
explicit relay chain, ``route`` solves one seeded topology, ``campaign``
runs a Monte Carlo batch and writes the CSVs, and ``plot`` turns aggregate
CSVs into SVG charts.  Every command reads the same flat configuration
(file, then repeatable ``--set key=value`` overrides); numeric output is
printed with full precision so downstream tools can roundtrip it.

Exit codes: 0 on success, 2 for configuration problems, 3 when a link,
path, or route is infeasible, 4 when an iterative solver gives up.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Sequence

import numpy as np

from .config import CONFIG_KEYS, RunConfig, parse_config, parse_value
from .errors import (
    ConfigError,
    DomainError,
    InfeasibleError,
    NoRouteError,
    SolverError,
)
from .harness import (
    RelayScheme,
    failure_counts,
    run_campaign,
    run_trial,
    write_aggregate_csv,
    write_trial_csv,
)
from .link_budget import analyze_hop
from .plots import METRIC_COLUMNS, line_chart, read_aggregate_csv
from .pointing import NodeState, link_geometry
from .relay_af import e2e_ber_af, e2e_rate_af, sink_snr
from .routing import Route, build_graph, max_rate_df

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4


def _print_kv(key: str, value) -> None:
    # repr keeps the full float precision, so printed numbers roundtrip
    if isinstance(value, float):
        value = repr(value)
    print(f"{key}: {value}")


def _parse_point(text: str) -> np.ndarray:
    parts = text.split(",")
    try:
        if len(parts) != 2:
            raise ValueError
        return np.array([float(parts[0]), float(parts[1])])
    except ValueError:
        raise ConfigError(f"point must be 'x,y', got {text!r}") from None


def _chain_nodes(points: Sequence[np.ndarray], config: RunConfig):
    """Relay chain through the given points; the last point is the sink."""
    sink_id = len(points) - 1
    sink = NodeState(node_id=sink_id, est=points[-1], act=points[-1].copy(),
                     frame_radius=config.frame_radius_m, uncertainty=0.0,
                     pointing_target=sink_id)
    nodes = [NodeState(node_id=i, est=p, act=p.copy(),
                       frame_radius=config.frame_radius_m,
                       uncertainty=config.uncertainty_m,
                       pointing_target=sink_id)
             for i, p in enumerate(points[:-1])]
    return nodes, [sink]


def _cmd_link(config: RunConfig, args) -> int:
    if args.distance <= 0:
        raise ConfigError("distance must be positive")
    # the receiver doubles as the sink: the transmitter aims straight at
    # it and the aperture accepts head-on, the bare point-to-point budget
    tx = NodeState(node_id=0, est=[0.0, 0.0], act=[0.0, 0.0],
                   frame_radius=config.frame_radius_m,
                   uncertainty=config.uncertainty_m, pointing_target=1)
    rx = NodeState(node_id=1, est=[args.distance, 0.0],
                   act=[args.distance, 0.0],
                   frame_radius=config.frame_radius_m,
                   uncertainty=config.uncertainty_m, pointing_target=1)
    geo = link_geometry(tx, rx, {1: rx.est}, config.pointing_case(),
                        config.optics())
    # the channel model takes the perpendicular plane distance
    result = analyze_hop(config.tx_power_w,
                         geo.distance_m * math.cos(geo.phi_rad),
                         geo.phi_rad, geo.psi_rad, geo.theta_half_rad,
                         config.water(), config.optics(), config.noise(),
                         config.target())
    for key in ("distance_m", "phi_rad", "psi_rad", "theta_half_rad",
                "theta_full_rad"):
        _print_kv(key, getattr(geo, key))
    for key in ("gain", "received_w", "count_off", "count_on", "ber",
                "rate_bps"):
        _print_kv(key, getattr(result, key))
    return EXIT_OK


def _cmd_path(config: RunConfig, args) -> int:
    points = [_parse_point(p) for p in args.points]
    if len(points) < 2:
        raise ConfigError("a path needs at least two points")
    nodes, sinks = _chain_nodes(points, config)
    # analysis of a given chain, not admission control: keep every hop the
    # geometry allows and let the budget speak for itself
    graph = build_graph(nodes, sinks, config.pointing_case(), config.optics(),
                        config.water(), config.noise(), config.target(),
                        config.tx_power_w, math.inf)
    path = tuple(range(len(points)))
    for a, b in zip(path, path[1:]):
        if not graph.has_edge(a, b):
            raise InfeasibleError(f"hop {a}->{b} has no admissible beam")

    idx = [graph.index(v) for v in path]
    pairs = list(zip(idx, idx[1:]))
    scheme = RelayScheme(config.scheme)
    if scheme is RelayScheme.AF:
        snrs = np.array([graph.snr[a, b] for a, b in pairs])
        rate = e2e_rate_af(snrs, config.ber_target,
                           config.noise().noise_power_w,
                           config.wavelength_m, config.eta_d)
        count_off = config.noise().counts_per_slot(rate, config.pulse_s)
        ber = e2e_ber_af(sink_snr(snrs), count_off, config.pulse_s)
        per_hop = [f"snr={float(s)!r}" for s in snrs]
    else:
        route = Route(vertices=path, objective=0.0,
                      gains=graph.path_gains(path))
        sol = max_rate_df(graph, route, config.ber_target)
        rate, ber = sol.rate_bps, sol.e2e_ber
        per_hop = [f"ber={float(b)!r}" for b in sol.bers]

    _print_kv("scheme", scheme.value)
    _print_kv("hops", len(pairs))
    for (a, b), extra in zip(pairs, per_hop):
        u, v = path[idx.index(a)], path[idx.index(b)]
        print(f"hop {u}->{v}: distance_m={float(graph.distance_m[a, b])!r} "
              f"theta_half_rad={float(graph.theta_half_rad[a, b])!r} "
              f"gain={float(graph.gain[a, b])!r} {extra}")
    _print_kv("e2e_rate_bps", rate)
    _print_kv("e2e_ber", ber)
    _print_kv("total_power_w", len(pairs) * config.tx_power_w)
    return EXIT_OK


def _cmd_route(config: RunConfig, args) -> int:
    scenario = config.scenario()
    record = run_trial(scenario, args.trial)
    if not record.success:
        print(f"no route: {record.fail_reason} (trial {record.trial})",
              file=sys.stderr)
        return EXIT_INFEASIBLE
    _print_kv("trial", record.trial)
    _print_kv("objective", record.objective.value)
    _print_kv("scheme", record.scheme.value)
    _print_kv("case", record.case.value)
    _print_kv("water", record.water_type)
    _print_kv("route", " -> ".join(str(v) for v in record.vertices))
    _print_kv("hops", record.hops)
    _print_kv("e2e_rate_bps", record.e2e_rate_bps)
    _print_kv("total_power_w", record.total_power_w)
    _print_kv("e2e_bsr", record.e2e_bsr)
    return EXIT_OK


def _cmd_campaign(config: RunConfig, args) -> int:
    scenario = config.scenario()
    records, agg = run_campaign(scenario, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    trial_path = os.path.join(args.out, "trials.csv")
    agg_path = os.path.join(args.out, "aggregate.csv")
    write_trial_csv(trial_path, records)
    write_aggregate_csv(agg_path, [agg])
    print(f"wrote {trial_path} ({len(records)} trials)")
    print(f"wrote {agg_path}")
    _print_kv("fail_frac", agg.fail_frac)
    _print_kv("mean_hops", agg.mean_hops)
    _print_kv("mean_rate_bps", agg.mean_rate_bps)
    _print_kv("mean_power_w", agg.mean_power_w)
    _print_kv("mean_bsr", agg.mean_bsr)
    for reason, count in sorted(failure_counts(records).items()):
        print(f"failures[{reason}]: {count}")
    return EXIT_OK


def _cmd_plot(config: RunConfig, args) -> int:
    rows = []
    for path in args.input:
        rows.extend(read_aggregate_csv(path))
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, f"{args.metric}_vs_{args.x}.svg")
    line_chart(rows, args.x, args.metric, out_path, title=args.title)
    print(f"wrote {out_path}")
    return EXIT_OK


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", default=None,
                        help="configuration file (key: value per line)")
    common.add_argument("--seed", type=int, default=None,
                        help="override the campaign seed")
    common.add_argument("--out", metavar="DIR", default=".",
                        help="directory for generated files")
    common.add_argument("--set", metavar="KEY=VALUE", action="append",
                        default=[], dest="overrides",
                        help="override one configuration key (repeatable); "
                             f"keys: {', '.join(CONFIG_KEYS)}")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uownsim",
        description="multihop underwater optical wireless link simulator",
    )
    common = _common_flags()
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("link", parents=[common],
                       help="budget a single transmitter-receiver hop")
    p.add_argument("--distance", type=float, required=True, metavar="M",
                   help="transmitter-receiver separation in meters")
    p.add_argument("--case", type=int, choices=(1, 2, 3), default=None,
                   help="pointing regime (overrides the configured case)")
    p.set_defaults(handler=_cmd_link)

    p = sub.add_parser("path", parents=[common],
                       help="analyze an explicit relay chain")
    p.add_argument("points", nargs="+", metavar="X,Y",
                   help="chain coordinates; the last point is the sink")
    p.set_defaults(handler=_cmd_path)

    p = sub.add_parser("route", parents=[common],
                       help="solve one seeded topology")
    p.add_argument("--objective", default=None,
                   choices=("rate", "ber", "power", "lipar"),
                   help="routing objective (overrides the configured one)")
    p.add_argument("--trial", type=int, default=0,
                   help="trial index within the seeded campaign")
    p.set_defaults(handler=_cmd_route)

    p = sub.add_parser("campaign", parents=[common],
                       help="run a Monte Carlo campaign and write CSVs")
    p.add_argument("--workers", type=int, default=None,
                   help="process count for parallel trials")
    p.set_defaults(handler=_cmd_campaign)

    p = sub.add_parser("plot", parents=[common],
                       help="render an SVG chart from aggregate CSVs")
    p.add_argument("--input", action="append", required=True, metavar="CSV",
                   help="aggregate CSV to read (repeatable)")
    p.add_argument("--x", required=True,
                   help="column for the x axis")
    p.add_argument("--metric", required=True, choices=METRIC_COLUMNS,
                   help="aggregate metric for the y axis")
    p.add_argument("--title", default=None, help="chart title")
    p.set_defaults(handler=_cmd_plot)
    return parser


def _collect_overrides(args) -> dict:
    overrides: dict = {}
    for item in args.overrides:
        key, sep, text = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key] = parse_value(key, text.strip())
    if args.seed is not None:
        overrides["seed"] = args.seed
    if getattr(args, "case", None) is not None:
        overrides["case"] = args.case
    if getattr(args, "objective", None) is not None:
        overrides["objective"] = args.objective
    return overrides


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits on usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        config = parse_config(args.config, _collect_overrides(args))
        return args.handler(config, args)
    except (ConfigError, DomainError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoRouteError, InfeasibleError) as err:
        print(f"infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
