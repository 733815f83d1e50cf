"""Divergence-angle selection for a directed link under three regimes.

Perfect tracking subtends the receiver frame exactly; tracking with
location uncertainty widens the cone to cover the worst-case positions
inside the uncertainty disks; without tracking, every transmitter aims
at its nearest sink and the cone must cover the receiver's disk from all
worst-case transmitter positions, evaluated from the estimated origin
and the two tangent points of the transmitter's own disk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import OpticsConfig
from .errors import DomainError, LinkInfeasibleError


class PointingCase(Enum):
    PERFECT_PAT = 1
    UNCERTAIN_PAT = 2
    NO_PAT = 3


@dataclass(frozen=True)
class NodeState:
    """A deployed node: estimated and actual planar positions plus its disks."""

    node_id: int
    est: np.ndarray
    act: np.ndarray
    frame_radius: float
    uncertainty: float
    pointing_target: int

    def __post_init__(self):
        object.__setattr__(self, "est", np.asarray(self.est, dtype=float))
        object.__setattr__(self, "act", np.asarray(self.act, dtype=float))
        if self.est.shape != (2,) or self.act.shape != (2,):
            raise DomainError("positions must be planar 2-vectors")
        if self.frame_radius <= 0:
            raise DomainError("frame radius must be positive")
        if self.uncertainty < 0:
            raise DomainError("uncertainty radius must be nonnegative")


@dataclass(frozen=True)
class LinkGeometry:
    """Geometry of one directed link as the link budget consumes it."""

    distance_m: float   # estimated Euclidean separation
    phi_rad: float      # beam axis vs. transmitter->receiver trajectory
    psi_rad: float      # arrival direction vs. receiver aperture normal
    theta_half_rad: float
    theta_full_rad: float


def wrap_angle(angle):
    """Reduce an angle to (-pi, pi]; values already in range pass unchanged."""
    a = np.asarray(angle, dtype=float)
    wrapped = np.mod(a + math.pi, 2.0 * math.pi) - math.pi
    wrapped = np.where(wrapped == -math.pi, math.pi, wrapped)
    out = np.where((a > -math.pi) & (a <= math.pi), a, wrapped)
    return float(out) if np.ndim(out) == 0 else out


def _clamped_arcsin(arg, distance_m, theta_min_rad):
    d = np.asarray(distance_m, dtype=float)
    a = np.asarray(arg, dtype=float)
    if np.any(d <= 0):
        raise DomainError("distance must be positive")
    if np.any((a <= 0) | (a > 1)):
        raise DomainError("subtended disk must satisfy 0 < radius <= distance")
    out = np.maximum(theta_min_rad, np.arcsin(a))
    return float(out) if np.ndim(out) == 0 else out


def theta_perfect(frame_radius_m, distance_m, theta_min_rad):
    """Cone angle that exactly subtends the receiver frame under perfect tracking."""
    r = np.asarray(frame_radius_m, dtype=float)
    d = np.asarray(distance_m, dtype=float)
    shape = np.broadcast(r, d).shape
    arg = np.divide(r, d, out=np.full(shape, np.inf), where=d > 0)
    return _clamped_arcsin(arg, d, theta_min_rad)


def theta_uncertain(uncertainty_m, frame_radius_m, distance_m, theta_min_rad):
    """Worst-case cone angle with uncertainty disks at both endpoints."""
    eps = np.asarray(uncertainty_m, dtype=float)
    if np.any(eps < 0):
        raise DomainError("uncertainty radius must be nonnegative")
    r = np.asarray(frame_radius_m, dtype=float)
    d = np.asarray(distance_m, dtype=float)
    arg = np.divide(2.0 * eps + r, d, out=np.full(np.broadcast(eps, r, d).shape, np.inf),
                    where=d > 0)
    return _clamped_arcsin(arg, d, theta_min_rad)


def bearing_angles(origin, receiver, sink):
    """Bearings of the receiver and of the sink as seen from ``origin``."""
    o = np.asarray(origin, dtype=float)
    j = np.asarray(receiver, dtype=float)
    m = np.asarray(sink, dtype=float)
    if np.array_equal(o, j) or np.array_equal(o, m):
        raise DomainError("bearing undefined for coincident points")
    phi_j = math.atan2(j[1] - o[1], j[0] - o[0])
    phi_s = math.atan2(m[1] - o[1], m[0] - o[0])
    return phi_j, phi_s


def _no_pat_core(phi_s, phi_j, eps_tx, eps_rx, r_rx, distance_m, theta_min_rad):
    """Sink-directed cone angle from one origin; vectorized, mask instead of raise.

    Returns (theta, valid).  Piecewise in the offset between the sink
    bearing and the receiver bearing: zero offset reduces to the tracked
    uncertain cone; an axis crossing the receiver disk doubles the wider
    edge offset; otherwise twice the offset plus half the disk angle.
    """
    d = np.asarray(distance_m, dtype=float)
    delta = np.asarray(
        wrap_angle(np.asarray(phi_s, dtype=float) - np.asarray(phi_j, dtype=float)),
        dtype=float,
    )
    num_full = np.asarray(np.add(eps_tx, eps_rx) + r_rx, dtype=float)
    num_disk = np.asarray(np.add(eps_rx, r_rx), dtype=float)
    shape = np.broadcast(delta, d, num_full).shape
    arg_full = np.divide(num_full, d, out=np.full(shape, np.inf), where=d > 0)
    arg_disk = np.divide(num_disk, d, out=np.full(shape, np.inf), where=d > 0)
    valid = (d > 0) & (arg_full > 0) & (arg_full <= 1)
    safe_full = np.where(valid, arg_full, 0.5)
    safe_disk = np.where(valid, arg_disk, 0.5)
    theta_tracked = np.maximum(theta_min_rad, np.arcsin(safe_full))
    theta_disk = np.maximum(theta_min_rad, np.arcsin(safe_disk))
    half_disk = 0.5 * theta_disk
    crossing = 2.0 * np.maximum(np.abs(delta - half_disk), np.abs(delta + half_disk))
    offset = 2.0 * np.abs(delta) + half_disk
    theta = np.where(
        delta == 0.0,
        theta_tracked,
        np.where(np.abs(delta) <= half_disk, crossing, offset),
    )
    theta = np.minimum(np.maximum(theta, theta_min_rad), math.pi)
    return theta, valid


def theta_no_pat_from_origin(phi_s_rad, phi_j_rad, uncertainty_m, frame_radius_m,
                             distance_m, theta_min_rad):
    """Cone angle when the beam is steered at the sink bearing, one origin."""
    theta, valid = _no_pat_core(
        phi_s_rad, phi_j_rad, uncertainty_m, uncertainty_m, frame_radius_m,
        distance_m, theta_min_rad,
    )
    if not np.all(valid):
        raise DomainError("receiver disk does not fit inside the link distance")
    return float(theta) if np.ndim(theta) == 0 else theta


def tangent_origins(position, uncertainty_m, phi_s_rad):
    """Worst-case transmitter positions: tangent points across the sink bearing."""
    if uncertainty_m < 0:
        raise DomainError("uncertainty radius must be nonnegative")
    p = np.asarray(position, dtype=float)
    left = p + uncertainty_m * np.array(
        [math.cos(phi_s_rad + math.pi / 2), math.sin(phi_s_rad + math.pi / 2)]
    )
    right = p + uncertainty_m * np.array(
        [math.cos(phi_s_rad - math.pi / 2), math.sin(phi_s_rad - math.pi / 2)]
    )
    return left, right


def theta_no_pat(tx: NodeState, rx: NodeState, sink_position, theta_min_rad: float):
    """Sink-directed cone angle with uncertainty on both sides.

    Evaluates the one-origin angle from the estimated position and from
    the two tangent origins, recomputing only the receiver bearing in
    each frame; the sink bearing and the link distance stay fixed.
    """
    phi_j, phi_s = bearing_angles(tx.est, rx.est, np.asarray(sink_position, float))
    d = float(np.hypot(*(rx.est - tx.est)))
    origins = [tx.est, *tangent_origins(tx.est, tx.uncertainty, phi_s)]
    thetas = []
    for origin in origins:
        off = rx.est - origin
        if off[0] == 0.0 and off[1] == 0.0:
            raise DomainError("receiver coincides with a worst-case origin")
        phi_j_here = math.atan2(off[1], off[0])
        theta, valid = _no_pat_core(
            phi_s, phi_j_here, tx.uncertainty, rx.uncertainty, rx.frame_radius,
            d, theta_min_rad,
        )
        if not valid:
            raise DomainError("receiver disk does not fit inside the link distance")
        thetas.append(float(theta))
    return min(math.pi, max(thetas))


def _receiver_incidence(tx_est, rx: NodeState, sink_positions) -> float:
    # sinks accept the beam head-on by convention; relays keep their
    # aperture normal on the bearing to their own target sink
    if rx.pointing_target == rx.node_id:
        return 0.0
    target = np.asarray(sink_positions[rx.pointing_target], dtype=float)
    arrival = math.atan2(rx.est[1] - tx_est[1], rx.est[0] - tx_est[0])
    if np.array_equal(rx.est, target):
        return 0.0
    normal = math.atan2(target[1] - rx.est[1], target[0] - rx.est[0])
    return abs(wrap_angle(arrival - normal))


def link_geometry(tx: NodeState, rx: NodeState, sink_positions, case: PointingCase,
                  optics: OpticsConfig) -> LinkGeometry:
    """Distance, beam offset, incidence, and cone size for one directed link.

    ``sink_positions`` maps sink ids to estimated coordinates.  Raises
    LinkInfeasibleError when the geometry has no admissible cone: overlap
    of the disks with the link distance, or a cone wider than twice the
    transceiver maximum.
    """
    d_est = float(np.hypot(*(rx.est - tx.est)))
    if d_est <= 0:
        raise LinkInfeasibleError("transmitter and receiver estimates coincide")
    try:
        if case is PointingCase.PERFECT_PAT:
            d_act = float(np.hypot(*(rx.act - tx.act)))
            theta_full = theta_perfect(rx.frame_radius, d_act, optics.theta_min_rad)
            phi = 0.0
        elif case is PointingCase.UNCERTAIN_PAT:
            arg = (tx.uncertainty + rx.uncertainty + rx.frame_radius) / d_est
            theta_full = _clamped_arcsin(arg, d_est, optics.theta_min_rad)
            phi = 0.0
        elif case is PointingCase.NO_PAT:
            aim = np.asarray(sink_positions[tx.pointing_target], dtype=float)
            theta_full = theta_no_pat(tx, rx, aim, optics.theta_min_rad)
            phi_j, phi_s = bearing_angles(tx.est, rx.est, aim)
            phi = abs(wrap_angle(phi_s - phi_j))
        else:
            raise DomainError(f"unknown pointing case {case!r}")
    except DomainError as exc:
        raise LinkInfeasibleError(str(exc)) from exc
    theta_full = min(theta_full, math.pi)
    if theta_full > 2.0 * optics.theta_max_rad:
        raise LinkInfeasibleError(
            "required cone exceeds the transceiver divergence limit"
        )
    psi = _receiver_incidence(tx.est, rx, sink_positions)
    return LinkGeometry(
        distance_m=d_est,
        phi_rad=phi,
        psi_rad=psi,
        theta_half_rad=max(optics.theta_min_rad, theta_full / 2.0),
        theta_full_rad=theta_full,
    )
