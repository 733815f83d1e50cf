"""Centralized route selection over the link feasibility graph.

A directed edge (i, j) exists when the pointing geometry admits a cone for
the chosen tracking case and the power that closes the link at the per-hop
target stays below the transmit cap.  Edge caches (gain, SNR, BER, rate,
minimum power) are computed once for the whole vertex set with array
arithmetic; the per-objective weight matrices are derived views:

    min E2E BER, regenerating relays:  -log(1 - BER_ij)   (max prod success)
    min E2E BER, amplifying relays:    log(1 + 1/SNR_ij)  (max chain SNR)
    max E2E rate:                      widest path on per-edge rates
    min total power:                   per-edge minimum transmit power

Dijkstra, the widest-path variant, and Yen's loopless k-shortest paths all
share one deterministic tie-break: total weight, then hop count, then the
lexicographically smallest vertex-id sequence.  Path costs are accumulated
strictly left to right so results compare bit-for-bit against brute-force
path enumeration.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erfc as _erfc

from .channel import OpticsConfig, WaterProfile, composite_gain
from .errors import DomainError, InfeasibleError, LinkInfeasibleError, NoRouteError
from .link_budget import (
    LinkTarget,
    NoiseModel,
    hop_ber,
    hop_rate,
    min_tx_power,
    photon_rate,
    rate_power_scale,
    received_power,
)
from .pointing import (
    LinkGeometry,
    NodeState,
    PointingCase,
    _no_pat_core,
    wrap_angle,
)
from .relay_af import e2e_ber_af, e2e_rate_af, min_power_af, sink_snr
from .relay_df import e2e_ber_df, min_power_df

@dataclass(frozen=True)
class NetworkGraph:
    """Immutable feasibility graph with per-edge caches.

    Matrix entries follow the row=transmitter, column=receiver convention
    in the order of ``ids``; entries outside ``edge_mask`` hold neutral
    fillers (zero gain, infinite power) and must not be read as links.
    """

    ids: tuple
    sink_ids: frozenset
    edge_mask: np.ndarray
    gain: np.ndarray
    snr: np.ndarray
    ber: np.ndarray
    rate_bps: np.ndarray
    power_w: np.ndarray
    distance_m: np.ndarray
    phi_rad: np.ndarray
    psi_rad: np.ndarray
    theta_half_rad: np.ndarray
    theta_full_rad: np.ndarray
    tx_power_w: float
    max_tx_power_w: float
    target: LinkTarget
    optics: OpticsConfig
    water: WaterProfile
    noise: NoiseModel
    _index: dict = field(repr=False, default_factory=dict)

    def __post_init__(self):
        self._index.update({v: k for k, v in enumerate(self.ids)})
        if np.any(self.edge_mask.diagonal()):
            raise DomainError("self-loops are not allowed")
        if np.any(~np.isfinite(self.power_w[self.edge_mask])):
            raise DomainError("edges must carry finite weights")

    @property
    def n_vertices(self) -> int:
        return len(self.ids)

    @property
    def n_edges(self) -> int:
        return int(self.edge_mask.sum())

    def index(self, vertex_id: int) -> int:
        try:
            return self._index[vertex_id]
        except KeyError:
            raise DomainError(f"unknown vertex id {vertex_id}") from None

    def has_edge(self, tx_id: int, rx_id: int) -> bool:
        return bool(self.edge_mask[self.index(tx_id), self.index(rx_id)])

    def geometry(self, tx_id: int, rx_id: int) -> LinkGeometry:
        i, j = self.index(tx_id), self.index(rx_id)
        if not self.edge_mask[i, j]:
            raise LinkInfeasibleError(f"no edge {tx_id} -> {rx_id}")
        return LinkGeometry(
            distance_m=float(self.distance_m[i, j]),
            phi_rad=float(self.phi_rad[i, j]),
            psi_rad=float(self.psi_rad[i, j]),
            theta_half_rad=float(self.theta_half_rad[i, j]),
            theta_full_rad=float(self.theta_full_rad[i, j]),
        )

    def path_gains(self, vertices: Sequence[int]) -> np.ndarray:
        idx = [self.index(v) for v in vertices]
        return np.array([self.gain[a, b] for a, b in zip(idx, idx[1:])])


@dataclass(frozen=True)
class Route:
    """A simple source-to-sink path with its objective and hop assignments."""

    vertices: tuple
    objective: float
    gains: np.ndarray
    bers: np.ndarray | None = None
    rates_bps: np.ndarray | None = None
    powers_w: np.ndarray | None = None
    snrs: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "gains", np.asarray(self.gains, dtype=float))
        if len(self.vertices) < 2:
            raise DomainError("a route needs at least one hop")
        if len(set(self.vertices)) != len(self.vertices):
            raise DomainError("routes must be simple paths")
        if self.gains.size != len(self.vertices) - 1:
            raise DomainError("one gain per hop expected")

    @property
    def hops(self) -> int:
        return len(self.vertices) - 1


def _pair_bearings(est: np.ndarray) -> np.ndarray:
    off = est[None, :, :] - est[:, None, :]
    return np.arctan2(off[..., 1], off[..., 0])


def _case3_theta(est, eps, frame, aim, d_est, theta_min):
    """Sink-aimed cone matrices: worst case over the three beam origins."""
    n = est.shape[0]
    to_aim = aim - est
    aims_ok = (to_aim[:, 0] != 0.0) | (to_aim[:, 1] != 0.0)
    phi_s = np.arctan2(to_aim[:, 1], to_aim[:, 0])

    side = np.stack([-np.sin(phi_s), np.cos(phi_s)], axis=1)
    origins = (est, est + eps[:, None] * side, est - eps[:, None] * side)
    theta = np.full((n, n), -np.inf)
    valid = np.broadcast_to(aims_ok[:, None], (n, n)).copy()
    for origin in origins:
        off = est[None, :, :] - origin[:, None, :]
        coincident = (off[..., 0] == 0.0) & (off[..., 1] == 0.0)
        phi_j = np.arctan2(off[..., 1], off[..., 0])
        t, ok = _no_pat_core(phi_s[:, None], phi_j, eps[:, None], eps[None, :],
                             frame[None, :], d_est, theta_min)
        theta = np.maximum(theta, t)
        valid &= ok & ~coincident
    return np.minimum(theta, math.pi), valid, phi_s


def build_graph(nodes: Sequence[NodeState], sinks: Sequence[NodeState],
                case: PointingCase, optics: OpticsConfig, water: WaterProfile,
                noise: NoiseModel, target: LinkTarget, tx_power_w: float,
                max_tx_power_w: float = math.inf) -> NetworkGraph:
    """Assemble the feasibility graph for one pointing case.

    Every ordered non-sink pair is tested at once: the cone required by the
    tracking case must fit the transceiver limit and the minimum power per
    the per-hop target must not exceed ``max_tx_power_w``.  Sinks never
    transmit.  Matches the per-link geometry solver exactly; it only
    batches the arithmetic.
    """
    if len(sinks) < 1:
        raise DomainError("need at least one sink")
    everyone = list(nodes) + list(sinks)
    ids = tuple(v.node_id for v in everyone)
    if len(set(ids)) != len(ids):
        raise DomainError("vertex ids must be unique")
    n = len(everyone)
    sink_ids = frozenset(s.node_id for s in sinks)

    est = np.array([v.est for v in everyone])
    act = np.array([v.act for v in everyone])
    eps = np.array([v.uncertainty for v in everyone])
    frame = np.array([v.frame_radius for v in everyone])
    is_sink = np.array([v.node_id in sink_ids for v in everyone])
    sink_est = {s.node_id: np.asarray(s.est, dtype=float) for s in sinks}
    aim = np.empty((n, 2))
    for row, v in enumerate(everyone):
        if v.node_id in sink_ids:
            aim[row] = est[row]
        else:
            try:
                aim[row] = sink_est[v.pointing_target]
            except KeyError:
                raise DomainError(
                    f"vertex {v.node_id} points at unknown sink "
                    f"{v.pointing_target}") from None

    d_est = np.linalg.norm(est[None, :, :] - est[:, None, :], axis=-1)
    arrival = _pair_bearings(est)
    valid = (d_est > 0.0) & ~np.eye(n, dtype=bool) & ~is_sink[:, None]

    theta_min = optics.theta_min_rad
    with np.errstate(divide="ignore", invalid="ignore"):
        if case is PointingCase.PERFECT_PAT:
            d_act = np.linalg.norm(act[None, :, :] - act[:, None, :], axis=-1)
            arg = np.where(d_act > 0.0, frame[None, :] / np.where(d_act > 0, d_act, 1.0),
                           np.inf)
            valid &= (d_act > 0.0) & (arg <= 1.0)
            theta_full = np.maximum(theta_min, np.arcsin(np.where(valid, arg, 0.5)))
            phi = np.zeros((n, n))
        elif case is PointingCase.UNCERTAIN_PAT:
            num = eps[:, None] + eps[None, :] + frame[None, :]
            arg = np.where(d_est > 0.0, num / np.where(d_est > 0, d_est, 1.0), np.inf)
            valid &= arg <= 1.0
            theta_full = np.maximum(theta_min, np.arcsin(np.where(valid, arg, 0.5)))
            phi = np.zeros((n, n))
        elif case is PointingCase.NO_PAT:
            theta_full, ok, phi_s = _case3_theta(est, eps, frame, aim, d_est,
                                                 theta_min)
            valid &= ok
            phi = np.abs(wrap_angle(phi_s[:, None] - arrival))
        else:
            raise DomainError(f"unknown pointing case {case!r}")

    theta_full = np.minimum(theta_full, math.pi)
    valid &= theta_full <= 2.0 * optics.theta_max_rad
    theta_half = np.maximum(theta_min, theta_full / 2.0)

    # receiver incidence: aperture normal on the bearing to its own sink
    to_aim = aim - est
    has_normal = ~is_sink & ((to_aim[:, 0] != 0.0) | (to_aim[:, 1] != 0.0))
    normal = np.arctan2(to_aim[:, 1], to_aim[:, 0])
    psi = np.where(has_normal[None, :],
                   np.abs(wrap_angle(arrival - normal[None, :])), 0.0)

    cos_phi = np.cos(phi)
    valid &= cos_phi > 0.0

    gain = np.zeros((n, n))
    if np.any(valid):
        gain[valid] = composite_gain(
            d_est[valid] * cos_phi[valid], phi[valid], psi[valid],
            theta_half[valid], water, optics)
    valid &= gain > 0.0

    power = np.full((n, n), np.inf)
    if np.any(valid):
        power[valid] = min_tx_power(
            target.rate_bps, target.ber, gain[valid], optics.eta_t,
            optics.eta_r, optics.eta_d, noise, water.wavelength_m)
    valid &= power <= max_tx_power_w

    received = received_power(tx_power_w, optics.eta_t, optics.eta_r, gain)
    snr = received / noise.noise_power_w
    p0 = noise.counts_per_slot(target.rate_bps, target.pulse_s)
    p1 = p0 + photon_rate(received, target.rate_bps, target.pulse_s,
                          water.wavelength_m, optics.eta_d)
    ber = hop_ber(p1, p0, target.pulse_s)
    rate = hop_rate(received, noise, target.ber, water.wavelength_m,
                    optics.eta_d)

    return NetworkGraph(
        ids=ids, sink_ids=sink_ids, edge_mask=valid, gain=gain, snr=snr,
        ber=ber, rate_bps=rate, power_w=power, distance_m=d_est, phi_rad=phi,
        psi_rad=psi, theta_half_rad=theta_half, theta_full_rad=theta_full,
        tx_power_w=tx_power_w, max_tx_power_w=max_tx_power_w, target=target,
        optics=optics, water=water, noise=noise)


def _run_dijkstra(graph: NetworkGraph, weights: np.ndarray, source: int,
                  sinks: frozenset, start_cost: float = 0.0,
                  forbidden_vertices: frozenset = frozenset(),
                  forbidden_edges: frozenset = frozenset()):
    """Shortest path to any sink, left-to-right cost accumulation.

    Heap entries are (cost, hops, id-path) so ties resolve on hop count and
    then on the smallest vertex-id sequence.  Returns (cost, id-path).
    """
    src = graph.index(source)
    ids = graph.ids
    mask = graph.edge_mask
    settled = set()
    heap = [(start_cost, 0, (ids[src],))]
    while heap:
        cost, hops, path = heapq.heappop(heap)
        vid = path[-1]
        if vid in sinks:
            return cost, path
        if vid in settled:
            continue
        settled.add(vid)
        u = graph.index(vid)
        for v in np.nonzero(mask[u])[0]:
            wid = ids[v]
            if wid in settled or wid in forbidden_vertices:
                continue
            if (vid, wid) in forbidden_edges:
                continue
            heapq.heappush(heap, (cost + weights[u, v], hops + 1, path + (wid,)))
    raise NoRouteError(f"no path from {source} reaches a sink")


def dijkstra(graph: NetworkGraph, weights: np.ndarray, source: int,
             sinks=None) -> Route:
    """Minimum-total-weight simple path from ``source`` to the nearest sink."""
    w = np.asarray(weights, dtype=float)
    if np.any(w[graph.edge_mask] < 0.0):
        raise DomainError("edge weights must be non-negative")
    sink_set = frozenset(graph.sink_ids if sinks is None else sinks)
    cost, path = _run_dijkstra(graph, w, source, sink_set)
    return Route(vertices=path, objective=cost, gains=graph.path_gains(path))


def _ber_weights_df(graph: NetworkGraph) -> np.ndarray:
    w = np.full(graph.ber.shape, np.inf)
    m = graph.edge_mask
    w[m] = -np.log1p(-graph.ber[m])
    return w


def _snr_weights_af(graph: NetworkGraph) -> np.ndarray:
    w = np.full(graph.snr.shape, np.inf)
    m = graph.edge_mask
    w[m] = np.log1p(1.0 / graph.snr[m])
    return w


def min_ber_route_df(graph: NetworkGraph, source: int) -> Route:
    """Maximize the end-to-end bit success product with regenerating relays.

    Additive surrogate -log(1 - BER) per edge; the returned objective is
    the exact end-to-end error probability of the winning path.
    """
    cost, path = _run_dijkstra(graph, _ber_weights_df(graph), source,
                               graph.sink_ids)
    idx = [graph.index(v) for v in path]
    bers = np.array([graph.ber[a, b] for a, b in zip(idx, idx[1:])])
    rates = np.array([graph.rate_bps[a, b] for a, b in zip(idx, idx[1:])])
    return Route(vertices=path, objective=e2e_ber_df(bers),
                 gains=graph.path_gains(path), bers=bers, rates_bps=rates,
                 powers_w=np.full(len(path) - 1, graph.tx_power_w))


def min_ber_route_af(graph: NetworkGraph, source: int) -> Route:
    """Maximize the sink SNR of an amplified chain (additive log form)."""
    cost, path = _run_dijkstra(graph, _snr_weights_af(graph), source,
                               graph.sink_ids)
    idx = [graph.index(v) for v in path]
    snrs = np.array([graph.snr[a, b] for a, b in zip(idx, idx[1:])])
    p0 = graph.noise.counts_per_slot(graph.target.rate_bps, graph.target.pulse_s)
    ber = e2e_ber_af(sink_snr(snrs), p0, graph.target.pulse_s)
    return Route(vertices=path, objective=ber, gains=graph.path_gains(path),
                 snrs=snrs,
                 powers_w=np.full(len(path) - 1, graph.tx_power_w))


def widest_path_route_df(graph: NetworkGraph, source: int) -> Route:
    """Path whose slowest hop is as fast as possible.

    Bottleneck variant of Dijkstra: labels carry the minimum edge rate so
    far, maximized.  The heap prefers fewer hops between equal labels, but
    equally wide paths are otherwise interchangeable.
    """
    ids = graph.ids
    mask = graph.edge_mask
    settled = set()
    heap = [(-math.inf, 0, (source,))]
    graph.index(source)
    while heap:
        neg_bottleneck, hops, path = heapq.heappop(heap)
        vid = path[-1]
        if vid in graph.sink_ids:
            bottleneck = -neg_bottleneck
            idx = [graph.index(v) for v in path]
            rates = np.array([graph.rate_bps[a, b]
                              for a, b in zip(idx, idx[1:])])
            return Route(vertices=path, objective=bottleneck,
                         gains=graph.path_gains(path), rates_bps=rates,
                         bers=np.full(len(path) - 1, graph.target.ber),
                         powers_w=np.full(len(path) - 1, graph.tx_power_w))
        if vid in settled:
            continue
        settled.add(vid)
        u = graph.index(vid)
        for v in np.nonzero(mask[u])[0]:
            wid = ids[v]
            if wid in settled:
                continue
            width = min(-neg_bottleneck, graph.rate_bps[u, v])
            heapq.heappush(heap, (-width, hops + 1, path + (wid,)))
    raise NoRouteError(f"no path from {source} reaches a sink")


@dataclass(frozen=True)
class MaxRateSolution:
    """Common per-hop rate and the hop error split that realizes it."""

    rate_bps: float
    bers: np.ndarray
    e2e_ber: float


def max_rate_df(graph: NetworkGraph, route: Route,
                e2e_ber_target: float | None = None,
                ber_tol: float = 1e-9) -> MaxRateSolution:
    """Largest common slot rate whose accumulated error meets the target.

    At a trial rate every hop's error is the closed-form rate expression
    inverted at that hop's received power; the end-to-end error is monotone
    increasing in the rate, so bisection pins the rate at which the error
    constraint is active (|e2e - target| <= ber_tol).
    """
    target = graph.target.ber if e2e_ber_target is None else e2e_ber_target
    if not 0.0 < target < 0.5:
        raise DomainError(f"e2e BER target must lie in (0, 0.5), got {target}")
    received = route.gains * graph.tx_power_w * graph.optics.eta_t * graph.optics.eta_r
    if np.any(received <= 0.0):
        raise InfeasibleError("a hop with no received power never meets the target")
    lam = graph.water.wavelength_m
    eta_d = graph.optics.eta_d
    p_n = graph.noise.noise_power_w
    # noise-referred signal amplitude; the hop error at a trial rate is the
    # exact inverse of the closed-form rate, so a one-hop route lands on it
    amp = received / (np.sqrt(received + p_n) + math.sqrt(p_n))

    def e2e_at(rate: float):
        bers = 0.5 * _erfc(amp / rate_power_scale(rate, lam, eta_d))
        bers = np.atleast_1d(np.asarray(bers, dtype=float))
        return e2e_ber_df(bers), bers

    lo = None
    hi = None
    probe = graph.target.rate_bps
    for _ in range(200):
        err, _ = e2e_at(probe)
        if err > target:
            hi = probe
            probe /= 2.0
            if lo is not None:
                break
        else:
            lo = probe
            probe *= 2.0
            if hi is not None:
                break
    if lo is None:
        raise InfeasibleError("error target violated even at vanishing rate")
    if hi is None:
        raise InfeasibleError("error never reaches the target; rate unbounded")

    # collapse the bracket fully: the error is flat in the rate near the
    # boundary, so stopping on the error residual alone would leave the
    # rate several orders of magnitude less precise than the bracket
    while hi - lo > 1e-13 * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        err, _ = e2e_at(mid)
        if err <= target:
            lo = mid
        else:
            hi = mid
    err, bers = e2e_at(lo)
    if abs(err - target) > ber_tol:
        raise InfeasibleError("error constraint could not be made active")
    return MaxRateSolution(rate_bps=float(lo), bers=bers, e2e_ber=float(err))


def min_power_route_df(graph: NetworkGraph, source: int) -> Route:
    """Cheapest regenerating route, then optimal per-hop error split.

    Edge weights are the per-hop minimum powers at the fixed per-hop
    target; the winning path's hop errors are re-balanced against the
    end-to-end error budget, which can only lower the total power spent.
    """
    w = np.where(graph.edge_mask, graph.power_w, np.inf)
    cost, path = _run_dijkstra(graph, w, source, graph.sink_ids)
    gains = graph.path_gains(path)
    sol = min_power_df(gains, graph.target.rate_bps, graph.target.ber,
                       graph.noise, graph.optics, graph.water.wavelength_m)
    return Route(vertices=path, objective=sol.total_power_w, gains=gains,
                 bers=sol.bers, powers_w=sol.powers_w,
                 rates_bps=np.full(len(path) - 1, graph.target.rate_bps))


def _fold_path_cost(graph: NetworkGraph, weights: np.ndarray, path) -> float:
    cost = 0.0
    for a, b in zip(path, path[1:]):
        cost = cost + weights[graph.index(a), graph.index(b)]
    return cost


def yen_ksp(graph: NetworkGraph, source: int, k: int,
            weights: np.ndarray | None = None) -> list[Route]:
    """Loopless k shortest source-to-sink paths, ascending.

    Defaults to the amplified-chain SNR weights.  A virtual super-sink
    with zero-weight edges out of every sink makes "any sink" uniform;
    spur costs continue the root's left-to-right accumulation so totals
    are bitwise comparable with enumerated paths.  Returns fewer than
    ``k`` routes when the graph runs out of simple paths.
    """
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    w = _snr_weights_af(graph) if weights is None else np.asarray(weights, float)
    if np.any(w[graph.edge_mask] < 0.0):
        raise DomainError("edge weights must be non-negative")

    def shortest(start, start_cost, banned_v, banned_e):
        try:
            return _run_dijkstra(graph, w, start, graph.sink_ids,
                                 start_cost=start_cost,
                                 forbidden_vertices=banned_v,
                                 forbidden_edges=banned_e)
        except NoRouteError:
            return None

    first = shortest(source, 0.0, frozenset(), frozenset())
    if first is None:
        raise NoRouteError(f"no path from {source} reaches a sink")
    accepted = [first]
    candidates: list = []
    seen = {first[1]}

    while len(accepted) < k:
        _, prev_path = accepted[-1]
        for i in range(len(prev_path) - 1):
            spur = prev_path[i]
            root = prev_path[: i + 1]
            banned_e = {(p[i], p[i + 1]) for _, p in accepted
                        if len(p) > i + 1 and p[: i + 1] == root}
            for _, _, p in candidates:
                if len(p) > i + 1 and p[: i + 1] == root:
                    banned_e.add((p[i], p[i + 1]))
            banned_v = frozenset(root[:-1])
            root_cost = _fold_path_cost(graph, w, root)
            found = shortest(spur, root_cost, banned_v, frozenset(banned_e))
            if found is None:
                continue
            total, tail = found
            path = root[:-1] + tail
            if path in seen:
                continue
            seen.add(path)
            heapq.heappush(candidates, (total, len(path) - 1, path))
        if not candidates:
            break
        total, _, path = heapq.heappop(candidates)
        accepted.append((total, path))

    return [Route(vertices=p, objective=c, gains=graph.path_gains(p))
            for c, p in accepted]


def min_power_route_af(graph: NetworkGraph, source: int, k: int = 10,
                       max_tx_power_w: float | None = None) -> Route:
    """Cheapest amplified route among the top-k SNR paths.

    Each candidate is sized by the common-power chain problem; the route
    with the smallest hops * power product wins.  Candidates that cannot
    meet the rate target under the power cap are skipped.
    """
    cap = graph.max_tx_power_w if max_tx_power_w is None else max_tx_power_w
    if not math.isfinite(cap) or cap <= 0.0:
        raise DomainError("a finite positive transmit power cap is required")
    routes = yen_ksp(graph, source, k)
    best = None
    for route in routes:
        try:
            sol = min_power_af(
                route.gains, graph.target.rate_bps, graph.target.ber, cap,
                graph.optics.eta_t, graph.optics.eta_r,
                graph.noise.noise_power_w, graph.water.wavelength_m,
                graph.optics.eta_d)
        except InfeasibleError:
            continue
        key = (sol.total_power_w, route.hops, route.vertices)
        if best is None or key < best[0]:
            best = (key, route, sol)
    if best is None:
        raise NoRouteError("no candidate path meets the rate target "
                           "under the power cap")
    _, route, sol = best
    return Route(vertices=route.vertices, objective=sol.total_power_w,
                 gains=route.gains, snrs=sol.snrs,
                 powers_w=np.full(route.hops, sol.tx_power_w))
