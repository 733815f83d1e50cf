"""Monte Carlo experiment engine: topologies, trials, campaigns, CSVs.

A trial is a pure function of (scenario, trial index): the topology comes
from a counter-based per-trial seed, so any execution order or degree of
parallelism reproduces the same records and byte-identical CSV bodies.

Networks put the source on the bottom edge (the sea bed), M sinks
equidistant and centered on the top edge (the surface), and N relay nodes
uniform over the square.  Actual positions displace the estimates inside
the uncertainty disk.  The equal-hop study instead lays a fixed-length
chain toward a sink with jittered hop directions.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .channel import OpticsConfig, WaterProfile, water_preset
from .errors import DomainError, InfeasibleError, NoRouteError
from .link_budget import LinkTarget, NoiseModel
from .lipar import FailureReason, lipar_route
from .pointing import NodeState, PointingCase
from .relay_af import e2e_rate_af
from .routing import (
    Route,
    build_graph,
    max_rate_df,
    min_ber_route_af,
    min_ber_route_df,
    min_power_route_af,
    min_power_route_df,
    widest_path_route_df,
)


class RelayScheme(Enum):
    DF = "df"
    AF = "af"


class RouteObjective(Enum):
    RATE = "rate"
    BER = "ber"
    POWER = "power"
    LIPAR = "lipar"


FAIL_DISCONNECTED = "disconnected"
FAIL_INFEASIBLE_TARGET = "infeasible_target"
FAIL_DEAD_END = "dead_end"
FAIL_HOP_BUDGET = "hop_budget"
FAIL_REASONS = (FAIL_DISCONNECTED, FAIL_INFEASIBLE_TARGET, FAIL_DEAD_END,
                FAIL_HOP_BUDGET)

TRIAL_CSV_HEADER = ("trial,objective,scheme,case,water,success,hops,"
                    "e2e_rate_bps,total_power_w,e2e_bsr")
AGGREGATE_CSV_HEADER = ("objective,scheme,case,water,n_nodes,n_sinks,trials,"
                        "fail_frac,mean_hops,mean_rate_bps,mean_power_w,"
                        "mean_bsr,stderr_rate,stderr_power")

UNCERTAINTY_DISTS = ("uniform_disk", "fixed_radius")


@dataclass(frozen=True)
class ScenarioConfig:
    """One experiment family: deployment, targets, scheme, and seeding."""

    area_m: float = 100.0
    n_nodes: int = 60
    n_sinks: int = 3
    water_type: str = "ocean"
    case: PointingCase = PointingCase.UNCERTAIN_PAT
    scheme: RelayScheme = RelayScheme.DF
    objective: RouteObjective = RouteObjective.RATE
    rate_target_bps: float = 1e9
    ber_target: float = 1e-5
    pulse_s: float = 1e-9
    wavelength_m: float = 532e-9
    uncertainty_m: float = 0.75
    frame_radius_m: float = 0.25
    uncertainty_dist: str = "uniform_disk"
    tx_power_w: float = 0.01
    max_tx_power_w: float = 1.0
    trials: int = 2000
    seed: int = 0
    jitter_rad: float = 0.2
    hop_budget_factor: int = 4
    lipar_literal_angle_filter: bool = False
    ksp_k: int = 10
    optics: OpticsConfig = field(default_factory=OpticsConfig)
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError("trial count must be at least 1")
        if self.n_nodes < 1 or self.n_sinks < 1:
            raise DomainError("need at least one node and one sink")
        if self.area_m <= 0:
            raise DomainError("area width must be positive")
        if self.rate_target_bps <= 0 or self.pulse_s <= 0:
            raise DomainError("targets must be positive")
        if not 0.0 < self.ber_target <= 0.5:
            raise DomainError("BER target must lie in (0, 0.5]")
        if self.tx_power_w <= 0 or self.max_tx_power_w <= 0:
            raise DomainError("transmit powers must be positive")
        if self.uncertainty_m < 0 or self.frame_radius_m <= 0:
            raise DomainError("disk radii out of range")
        if self.uncertainty_dist not in UNCERTAINTY_DISTS:
            raise DomainError(
                f"uncertainty_dist must be one of {UNCERTAINTY_DISTS}")
        if self.jitter_rad < 0:
            raise DomainError("jitter cone must be nonnegative")
        if self.hop_budget_factor < 1 or self.ksp_k < 1:
            raise DomainError("hop budget factor and ksp k must be >= 1")
        water_preset(self.water_type, self.wavelength_m)  # validates both

    @property
    def water(self) -> WaterProfile:
        return water_preset(self.water_type, self.wavelength_m)

    @property
    def target(self) -> LinkTarget:
        return LinkTarget(rate_bps=self.rate_target_bps, ber=self.ber_target,
                          pulse_s=self.pulse_s)


@dataclass(frozen=True)
class TrialRecord:
    """Outcome of a single trial, sufficient to rebuild every CSV row."""

    trial: int
    objective: RouteObjective
    scheme: RelayScheme
    case: PointingCase
    water_type: str
    success: bool
    fail_reason: str | None
    hops: int | None
    e2e_rate_bps: float | None
    total_power_w: float | None
    e2e_bsr: float | None
    vertices: tuple

    def __post_init__(self):
        metrics = (self.hops, self.e2e_rate_bps, self.total_power_w,
                   self.e2e_bsr)
        if self.success:
            if self.fail_reason is not None:
                raise DomainError("successful trials carry no failure reason")
            if any(m is None for m in metrics) or len(self.vertices) < 2:
                raise DomainError("successful trials need route and metrics")
            if not 0.0 <= self.e2e_bsr <= 1.0:
                raise DomainError("bit success rate must lie in [0, 1]")
        else:
            if self.fail_reason not in FAIL_REASONS:
                raise DomainError(f"unknown failure reason {self.fail_reason}")
            if any(m is not None for m in metrics) or self.vertices != ():
                raise DomainError("failed trials carry no route or metrics")


def _displacements(rng, count: int, radius: float, dist: str) -> np.ndarray:
    angles = rng.uniform(0.0, 2.0 * math.pi, size=count)
    u = rng.uniform(size=count)
    r = radius * np.sqrt(u) if dist == "uniform_disk" \
        else np.full(count, float(radius))
    return np.column_stack((r * np.cos(angles), r * np.sin(angles)))


def generate_network(config: ScenarioConfig, seed):
    """Draw one deployment; same seed reproduces it bit for bit.

    Ids: source 0, relays 1..N, sinks N+1..N+M.  Draw order is fixed:
    relay estimates, relay displacements, source x, source displacement.
    Returns (nodes, sinks, source) with nodes[0] being the source.
    """
    rng = np.random.default_rng(seed)
    w = config.area_m
    n, m = config.n_nodes, config.n_sinks
    est = rng.uniform(0.0, w, size=(n, 2))
    disp = _displacements(rng, n, config.uncertainty_m, config.uncertainty_dist)
    src_x = rng.uniform(0.0, w)
    src_disp = _displacements(rng, 1, config.uncertainty_m,
                              config.uncertainty_dist)[0]

    sinks = []
    for k in range(1, m + 1):
        pos = np.array([w * k / (m + 1), w])
        sinks.append(NodeState(node_id=n + k, est=pos, act=pos.copy(),
                               frame_radius=config.frame_radius_m,
                               uncertainty=0.0, pointing_target=n + k))
    sink_xy = np.array([s.est for s in sinks])

    def nearest_sink(p) -> int:
        return sinks[int(np.argmin(np.hypot(*(sink_xy - p).T)))].node_id

    src_est = np.array([src_x, 0.0])
    nodes = [NodeState(node_id=0, est=src_est, act=src_est + src_disp,
                       frame_radius=config.frame_radius_m,
                       uncertainty=config.uncertainty_m,
                       pointing_target=nearest_sink(src_est))]
    for i in range(n):
        nodes.append(NodeState(node_id=i + 1, est=est[i],
                               act=est[i] + disp[i],
                               frame_radius=config.frame_radius_m,
                               uncertainty=config.uncertainty_m,
                               pointing_target=nearest_sink(est[i])))
    return nodes, sinks, nodes[0]


def equal_hop_path(config: ScenarioConfig, hops: int, total_distance_m: float,
                   seed):
    """Chain of ``hops`` equal-length hops with jittered directions.

    Hop directions draw uniformly from the jitter cone around the nominal
    trajectory; the sink sits wherever the last hop lands, so every hop
    length is exactly ``total_distance_m / hops``.  Ids: source 0, relays
    1..H-1, sink H.  Returns (nodes, sinks) with nodes[0] the source.
    """
    if hops < 1:
        raise DomainError("need at least one hop")
    if total_distance_m <= 0:
        raise DomainError("total distance must be positive")
    rng = np.random.default_rng(seed)
    offsets = rng.uniform(-config.jitter_rad, config.jitter_rad, size=hops)
    disp = _displacements(rng, hops, config.uncertainty_m,
                          config.uncertainty_dist)
    step = total_distance_m / hops
    points = np.vstack((
        np.zeros((1, 2)),
        np.cumsum(np.column_stack((step * np.cos(offsets),
                                   step * np.sin(offsets))), axis=0),
    ))
    sink = NodeState(node_id=hops, est=points[-1], act=points[-1].copy(),
                     frame_radius=config.frame_radius_m, uncertainty=0.0,
                     pointing_target=hops)
    nodes = [NodeState(node_id=i, est=points[i], act=points[i] + disp[i],
                       frame_radius=config.frame_radius_m,
                       uncertainty=config.uncertainty_m,
                       pointing_target=hops)
             for i in range(hops)]
    return nodes, [sink]


def equal_hop_rate(config: ScenarioConfig, hops: int, total_distance_m: float,
                   seed) -> float | None:
    """End-to-end rate of one jittered equal-hop chain, or None if broken.

    The chain runs at the fixed transmit power with no per-hop target
    filter; the rate is the scheme's achievable end-to-end value at the
    end-to-end error target.
    """
    nodes, sinks = equal_hop_path(config, hops, total_distance_m, seed)
    graph = build_graph(nodes, sinks, config.case, config.optics,
                        config.water, config.noise, config.target,
                        config.tx_power_w, math.inf)
    path = tuple(range(hops + 1))
    if any(not graph.has_edge(a, b) for a, b in zip(path, path[1:])):
        return None
    if config.scheme is RelayScheme.AF:
        idx = [graph.index(v) for v in path]
        snrs = np.array([graph.snr[a, b] for a, b in zip(idx, idx[1:])])
        return e2e_rate_af(snrs, config.ber_target,
                           config.noise.noise_power_w,
                           config.water.wavelength_m, config.optics.eta_d)
    route = Route(vertices=path, objective=0.0, gains=graph.path_gains(path))
    try:
        return max_rate_df(graph, route, config.ber_target).rate_bps
    except InfeasibleError:
        return None


def _failure(config: ScenarioConfig, index: int, reason: str) -> TrialRecord:
    return TrialRecord(trial=index, objective=config.objective,
                       scheme=config.scheme, case=config.case,
                       water_type=config.water_type, success=False,
                       fail_reason=reason, hops=None, e2e_rate_bps=None,
                       total_power_w=None, e2e_bsr=None, vertices=())


def _success(config: ScenarioConfig, index: int, vertices: tuple, hops: int,
             rate: float, power: float, bsr: float) -> TrialRecord:
    return TrialRecord(trial=index, objective=config.objective,
                       scheme=config.scheme, case=config.case,
                       water_type=config.water_type, success=True,
                       fail_reason=None, hops=hops, e2e_rate_bps=float(rate),
                       total_power_w=float(power), e2e_bsr=float(bsr),
                       vertices=vertices)


def _lipar_trial(config, index, nodes, sinks, source) -> TrialRecord:
    budget = config.hop_budget_factor * (len(nodes) + len(sinks))
    result = lipar_route(source.node_id, nodes, sinks, config.optics,
                         config.water, config.noise, config.target,
                         config.tx_power_w, hop_budget=budget,
                         literal_angle_filter=config.lipar_literal_angle_filter)
    if not result.success:
        reason = FAIL_DEAD_END if result.failure is FailureReason.DEAD_END \
            else FAIL_HOP_BUDGET
        return _failure(config, index, reason)
    route = result.route
    return _success(config, index, route.vertices, route.hops,
                    rate=config.rate_target_bps,
                    power=route.hops * config.tx_power_w,
                    bsr=1.0 - route.objective)


def _centralized_trial(config, index, nodes, sinks, source) -> TrialRecord:
    # power routing may spend up to the cap; fixed-power objectives only
    # keep hops that meet the per-hop target at the operating power
    cap = config.max_tx_power_w \
        if config.objective is RouteObjective.POWER else config.tx_power_w
    graph = build_graph(nodes, sinks, config.case, config.optics,
                        config.water, config.noise, config.target,
                        config.tx_power_w, cap)
    src = source.node_id
    obj, scheme = config.objective, config.scheme
    try:
        if obj is RouteObjective.RATE:
            if scheme is RelayScheme.DF:
                route = widest_path_route_df(graph, src)
                sol = max_rate_df(graph, route, config.ber_target)
                rate, bsr = sol.rate_bps, 1.0 - sol.e2e_ber
            else:
                route = min_ber_route_af(graph, src)
                rate = e2e_rate_af(route.snrs, config.ber_target,
                                   config.noise.noise_power_w,
                                   config.water.wavelength_m,
                                   config.optics.eta_d)
                bsr = 1.0 - config.ber_target
            power = route.hops * config.tx_power_w
        elif obj is RouteObjective.BER:
            route = min_ber_route_df(graph, src) if scheme is RelayScheme.DF \
                else min_ber_route_af(graph, src)
            rate = config.rate_target_bps
            bsr = 1.0 - route.objective
            power = route.hops * config.tx_power_w
        elif obj is RouteObjective.POWER:
            if scheme is RelayScheme.DF:
                route = min_power_route_df(graph, src)
            else:
                try:
                    route = min_power_route_af(graph, src, k=config.ksp_k)
                except NoRouteError:
                    # distinguish "no path at all" from "top-k all infeasible"
                    min_ber_route_af(graph, src)
                    raise InfeasibleError("no candidate meets the cap")
            rate = config.rate_target_bps
            bsr = 1.0 - config.ber_target
            power = route.objective
        else:
            raise DomainError(f"objective {obj} is not centralized")
    except NoRouteError:
        return _failure(config, index, FAIL_DISCONNECTED)
    except InfeasibleError:
        return _failure(config, index, FAIL_INFEASIBLE_TARGET)
    return _success(config, index, route.vertices, route.hops, rate, power,
                    bsr)


def run_trial(config: ScenarioConfig, index: int) -> TrialRecord:
    """One seeded trial; identical (config, index) yields identical records."""
    if index < 0:
        raise DomainError("trial index must be nonnegative")
    seed = np.random.SeedSequence((config.seed, index))
    nodes, sinks, source = generate_network(config, seed)
    if config.objective is RouteObjective.LIPAR:
        return _lipar_trial(config, index, nodes, sinks, source)
    return _centralized_trial(config, index, nodes, sinks, source)


def _trial_task(args) -> TrialRecord:
    return run_trial(*args)


@dataclass(frozen=True)
class AggregateRow:
    """Campaign summary; means and errors are over successful trials."""

    objective: RouteObjective
    scheme: RelayScheme
    case: PointingCase
    water_type: str
    n_nodes: int
    n_sinks: int
    trials: int
    fail_frac: float
    mean_hops: float
    mean_rate_bps: float
    mean_power_w: float
    mean_bsr: float
    stderr_rate: float
    stderr_power: float


def aggregate(config: ScenarioConfig, records: Sequence[TrialRecord]
              ) -> AggregateRow:
    """Fold trial records into the campaign summary row."""
    if not records:
        raise DomainError("cannot aggregate zero records")
    ok = [r for r in records if r.success]
    fail_frac = 1.0 - len(ok) / len(records)

    def mean(values) -> float:
        return float(np.mean(values)) if values else math.nan

    def stderr(values) -> float:
        if not values:
            return math.nan
        return float(np.std(values) / math.sqrt(len(values)))

    rates = [r.e2e_rate_bps for r in ok]
    powers = [r.total_power_w for r in ok]
    return AggregateRow(
        objective=config.objective, scheme=config.scheme, case=config.case,
        water_type=config.water_type, n_nodes=config.n_nodes,
        n_sinks=config.n_sinks, trials=len(records), fail_frac=fail_frac,
        mean_hops=mean([r.hops for r in ok]), mean_rate_bps=mean(rates),
        mean_power_w=mean(powers), mean_bsr=mean([r.e2e_bsr for r in ok]),
        stderr_rate=stderr(rates), stderr_power=stderr(powers),
    )


def failure_counts(records: Sequence[TrialRecord]) -> dict:
    """Typed failure tally, one key per reason that occurred."""
    counts: dict = {}
    for r in records:
        if not r.success:
            counts[r.fail_reason] = counts.get(r.fail_reason, 0) + 1
    return counts


def run_campaign(config: ScenarioConfig, workers: int | None = None):
    """All trials of one scenario plus their aggregate row.

    ``workers`` > 1 fans trials out to processes; scheduling cannot change
    the result because each record depends only on (config, index).
    """
    idx = range(config.trials)
    if workers is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_trial_task,
                                    ((config, i) for i in idx),
                                    chunksize=max(1, config.trials // (4 * workers))))
    else:
        records = [run_trial(config, i) for i in idx]
    return records, aggregate(config, records)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def trial_rows(records: Sequence[TrialRecord]):
    for r in records:
        yield [_fmt(r.trial), r.objective.value, r.scheme.value,
               _fmt(r.case.value), r.water_type, _fmt(r.success),
               _fmt(r.hops), _fmt(r.e2e_rate_bps), _fmt(r.total_power_w),
               _fmt(r.e2e_bsr)]


def aggregate_row_values(row: AggregateRow):
    return [row.objective.value, row.scheme.value, _fmt(row.case.value),
            row.water_type, _fmt(row.n_nodes), _fmt(row.n_sinks),
            _fmt(row.trials), _fmt(row.fail_frac), _fmt(row.mean_hops),
            _fmt(row.mean_rate_bps), _fmt(row.mean_power_w),
            _fmt(row.mean_bsr), _fmt(row.stderr_rate), _fmt(row.stderr_power)]


def write_trial_csv(path, records: Sequence[TrialRecord]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRIAL_CSV_HEADER.split(","))
        writer.writerows(trial_rows(records))


def write_aggregate_csv(path, rows: Sequence[AggregateRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AGGREGATE_CSV_HEADER.split(","))
        writer.writerows(aggregate_row_values(r) for r in rows)
