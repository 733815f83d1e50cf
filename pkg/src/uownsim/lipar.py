"""Location-aided distributed packet forwarding without beam tracking.

Each node knows only the (estimated) locations of its neighborhood and of
the sinks.  A hop is feasible when the candidate sits inside the sender's
communication range for the fixed per-hop rate/error pair, probed with the
narrowest beam (the tightest cone travels farthest), and the divergence
cone required to cover it while aiming at the sink stays within the
transceiver limits.  Among feasible candidates the sender picks the one
maximizing reliability-weighted distance progress, (1 - BER) * distance;
a feasible sink always wins immediately.

Two artifact guards make the greedy rule terminate: nodes already visited
by the packet are excluded (loop freedom), and a hop budget of four times
the deployment size bounds the walk.  Failures are typed: ``DEAD_END``
when no candidate remains, ``HOP_BUDGET`` when the budget runs out.

The decision at every hop reads the current node's candidate view only;
nothing in this module touches the centralized feasibility graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .channel import OpticsConfig, WaterProfile, composite_gain, concentrator_gain
from .errors import DomainError
from .link_budget import (
    LinkTarget,
    NoiseModel,
    hop_ber,
    hop_rate,
    lambert_w0,
    photon_rate,
    required_received_power,
)
from .pointing import NodeState, _no_pat_core, wrap_angle
from .relay_df import e2e_ber_df
from .routing import Route

DEFAULT_HOP_BUDGET_FACTOR = 4


class FailureReason(Enum):
    DEAD_END = "dead_end"
    HOP_BUDGET = "hop_budget"


@dataclass(frozen=True)
class LiparState:
    """Packet-carried forwarding state after some number of hops."""

    current: int
    visited: frozenset
    budget: int
    trace: tuple

    def __post_init__(self):
        if self.budget < 0:
            raise DomainError("hop budget cannot go negative")
        if len(set(self.trace)) != len(self.trace):
            raise DomainError("trace revisits a node")
        if self.visited != frozenset(self.trace):
            raise DomainError("visited set out of sync with the trace")
        if self.trace and self.trace[-1] != self.current:
            raise DomainError("current node must end the trace")


@dataclass(frozen=True)
class LiparResult:
    """Outcome of one packet: a route, or a typed failure with its state."""

    route: Route | None
    failure: FailureReason | None
    state: LiparState

    @property
    def success(self) -> bool:
        return self.route is not None


@dataclass(frozen=True)
class CandidateView:
    """Feasible next hops as seen from one sender, with link metrics."""

    ids: np.ndarray
    distances_m: np.ndarray
    ranges_m: np.ndarray
    gains: np.ndarray
    bers: np.ndarray
    rates_bps: np.ndarray
    is_sink: np.ndarray


def _candidate_view(tx: NodeState, candidates: Sequence[NodeState],
                    sink_est: dict, sink_ids: frozenset, optics: OpticsConfig,
                    water: WaterProfile, noise: NoiseModel, target: LinkTarget,
                    tx_power_w: float,
                    literal_angle_filter: bool = False) -> CandidateView:
    """Vectorized feasibility over all candidates of one sender."""
    empty = CandidateView(*(np.empty(0, dtype=k) for k in
                            (int, float, float, float, float, float, bool)))
    if not candidates:
        return empty
    try:
        aim = np.asarray(sink_est[tx.pointing_target], dtype=float)
    except KeyError:
        raise DomainError(
            f"node {tx.node_id} points at unknown sink {tx.pointing_target}"
        ) from None
    to_aim = aim - tx.est
    if to_aim[0] == 0.0 and to_aim[1] == 0.0:
        return empty
    phi_s = math.atan2(to_aim[1], to_aim[0])

    ids = np.array([c.node_id for c in candidates])
    est = np.array([c.est for c in candidates])
    eps = np.array([c.uncertainty for c in candidates])
    frame = np.array([c.frame_radius for c in candidates])
    is_sink = np.array([c.node_id in sink_ids for c in candidates])

    off = est - tx.est
    d = np.hypot(off[:, 0], off[:, 1])
    valid = d > 0.0
    bearing = np.arctan2(off[:, 1], off[:, 0])

    side = np.array([-math.sin(phi_s), math.cos(phi_s)])
    theta = np.full(ids.shape, -np.inf)
    for origin in (tx.est, tx.est + tx.uncertainty * side,
                   tx.est - tx.uncertainty * side):
        o_off = est - origin
        coincident = (o_off[:, 0] == 0.0) & (o_off[:, 1] == 0.0)
        phi_j = np.arctan2(o_off[:, 1], o_off[:, 0])
        t, ok = _no_pat_core(phi_s, phi_j, tx.uncertainty, eps, frame, d,
                             optics.theta_min_rad)
        theta = np.maximum(theta, t)
        valid &= ok & ~coincident
    theta = np.minimum(theta, math.pi)

    offset = np.abs(wrap_angle(phi_s - bearing))
    valid &= theta <= 2.0 * optics.theta_max_rad
    if literal_angle_filter:
        valid &= (offset >= optics.theta_min_rad) & (offset <= optics.theta_max_rad)
    theta_half = np.maximum(optics.theta_min_rad, theta / 2.0)

    # receiver incidence against each candidate's own sink bearing
    psi = np.zeros(ids.shape)
    for k, c in enumerate(candidates):
        if c.node_id in sink_ids:
            continue
        c_aim = np.asarray(sink_est[c.pointing_target], dtype=float)
        if np.array_equal(c.est, c_aim):
            continue
        normal = math.atan2(c_aim[1] - c.est[1], c_aim[0] - c.est[0])
        psi[k] = abs(wrap_angle(bearing[k] - normal))

    phi = offset
    cos_phi = np.cos(phi)
    xi = concentrator_gain(psi, optics.fov_rad, optics.refractive_index)
    valid &= (phi < math.pi / 2.0) & (cos_phi > 0.0) & (np.asarray(xi) > 0.0)
    if not np.any(valid):
        return empty

    need = required_received_power(target.rate_bps, target.ber,
                                   noise.noise_power_w, water.wavelength_m,
                                   optics.eta_d)
    gain_req = need / (tx_power_w * optics.eta_t * optics.eta_r)
    reach = np.full(ids.shape, np.inf)
    if gain_req > 0.0:
        # reachability is probed with the narrowest beam: the tightest cone
        # travels farthest, and the divergence is widened to cover the
        # chosen forwarder only after the candidate set is known
        cap = 2.0 * math.pi * (1.0 - math.cos(optics.theta_min_rad))
        c_term = gain_req * cap / (optics.aperture_m2 * cos_phi[valid]
                                   * np.asarray(xi)[valid])
        e = water.extinction
        w0 = lambert_w0(e / (2.0 * np.sqrt(c_term) * cos_phi[valid]))
        reach[valid] = (2.0 * cos_phi[valid] / e) * w0 / cos_phi[valid]
    feasible = valid & (reach >= d)
    if not np.any(feasible):
        return empty

    sel = np.nonzero(feasible)[0]
    gain = composite_gain(d[sel] * cos_phi[sel], phi[sel], psi[sel],
                          theta_half[sel], water, optics)
    gain = np.atleast_1d(np.asarray(gain, dtype=float))
    received = tx_power_w * optics.eta_t * optics.eta_r * gain
    p0 = noise.counts_per_slot(target.rate_bps, target.pulse_s)
    p1 = p0 + photon_rate(received, target.rate_bps, target.pulse_s,
                          water.wavelength_m, optics.eta_d)
    bers = np.atleast_1d(np.asarray(hop_ber(p1, p0, target.pulse_s), float))
    rates = np.atleast_1d(np.asarray(
        hop_rate(received, noise, target.ber, water.wavelength_m,
                 optics.eta_d), float))
    return CandidateView(ids=ids[sel], distances_m=d[sel], ranges_m=reach[sel],
                         gains=gain, bers=bers, rates_bps=rates,
                         is_sink=is_sink[sel])


def neighbor_set(node: NodeState, others: Sequence[NodeState],
                 sinks: Sequence[NodeState], optics: OpticsConfig,
                 water: WaterProfile, noise: NoiseModel, target: LinkTarget,
                 tx_power_w: float,
                 literal_angle_filter: bool = False) -> set:
    """Ids of every reachable forwarder for one sender.

    A candidate is reachable when its distance does not exceed the
    narrowest-beam communication range at the per-hop target (boundary
    inclusive) and the sink-aimed cone that covers it fits the divergence
    limits.
    """
    sink_ids = frozenset(s.node_id for s in sinks)
    sink_est = {s.node_id: np.asarray(s.est, dtype=float) for s in sinks}
    candidates = [c for c in others if c.node_id != node.node_id]
    view = _candidate_view(node, candidates, sink_est, sink_ids, optics,
                           water, noise, target, tx_power_w,
                           literal_angle_filter)
    return set(int(i) for i in view.ids)


def select_forwarder(candidate_ids, distances_m, bers) -> int:
    """Forwarder with the best reliability-weighted progress.

    Score is (1 - BER) * distance; ties go to the smaller node id.
    """
    ids = np.asarray(candidate_ids)
    dist = np.asarray(distances_m, dtype=float)
    errs = np.asarray(bers, dtype=float)
    if ids.size == 0:
        raise DomainError("need at least one candidate")
    if ids.shape != dist.shape or ids.shape != errs.shape:
        raise DomainError("candidate arrays must align")
    scores = (1.0 - errs) * dist
    best = min(zip(-scores, ids))
    return int(best[1])


def lipar_route(source: int, nodes: Sequence[NodeState],
                sinks: Sequence[NodeState], optics: OpticsConfig,
                water: WaterProfile, noise: NoiseModel, target: LinkTarget,
                tx_power_w: float, hop_budget: int | None = None,
                literal_angle_filter: bool = False) -> LiparResult:
    """Forward one packet greedily from ``source`` until a sink or failure.

    Visited nodes never re-enter the candidate set, so the trace cannot
    loop; the hop budget (default four times the deployment size) bounds
    the walk unconditionally.
    """
    everyone = list(nodes) + list(sinks)
    by_id = {v.node_id: v for v in everyone}
    if len(by_id) != len(everyone):
        raise DomainError("vertex ids must be unique")
    sink_ids = frozenset(s.node_id for s in sinks)
    if source not in by_id:
        raise DomainError(f"unknown source id {source}")
    if source in sink_ids:
        raise DomainError("the source cannot be a sink")
    sink_est = {s.node_id: np.asarray(s.est, dtype=float) for s in sinks}
    budget = DEFAULT_HOP_BUDGET_FACTOR * len(everyone) \
        if hop_budget is None else hop_budget
    if budget < 1:
        raise DomainError("hop budget must allow at least one hop")

    current = by_id[source]
    visited = {source}
    trace = [source]
    hop_gains: list = []
    hop_bers: list = []
    hop_rates: list = []

    def state() -> LiparState:
        return LiparState(current=trace[-1], visited=frozenset(visited),
                          budget=budget, trace=tuple(trace))

    while budget > 0:
        candidates = [v for v in everyone if v.node_id not in visited]
        view = _candidate_view(current, candidates, sink_est, sink_ids,
                               optics, water, noise, target, tx_power_w,
                               literal_angle_filter)
        if view.ids.size == 0:
            return LiparResult(route=None, failure=FailureReason.DEAD_END,
                               state=state())
        pool = np.nonzero(view.is_sink)[0] if view.is_sink.any() \
            else np.arange(view.ids.size)
        chosen = select_forwarder(view.ids[pool], view.distances_m[pool],
                                  view.bers[pool])
        k = int(np.nonzero(view.ids == chosen)[0][0])
        hop_gains.append(float(view.gains[k]))
        hop_bers.append(float(view.bers[k]))
        hop_rates.append(float(view.rates_bps[k]))
        visited.add(chosen)
        trace.append(chosen)
        budget -= 1
        if chosen in sink_ids:
            bers = np.array(hop_bers)
            route = Route(vertices=tuple(trace), objective=e2e_ber_df(bers),
                          gains=np.array(hop_gains), bers=bers,
                          rates_bps=np.array(hop_rates),
                          powers_w=np.full(len(trace) - 1, tx_power_w))
            return LiparResult(route=route, failure=None, state=state())
        current = by_id[chosen]

    return LiparResult(route=None, failure=FailureReason.HOP_BUDGET,
                       state=state())
