"""Distributed forwarding: neighbor feasibility, greedy choice, termination."""

import inspect
import math

import numpy as np
import pytest

import uownsim.lipar as lipar_module
from uownsim.channel import OpticsConfig, water_preset
from uownsim.errors import DomainError, LinkInfeasibleError
from uownsim.lipar import (
    FailureReason,
    LiparState,
    lipar_route,
    neighbor_set,
    select_forwarder,
)
from uownsim.link_budget import LinkTarget, NoiseModel, comm_range
from uownsim.pointing import NodeState, PointingCase, link_geometry
from uownsim.relay_df import e2e_ber_df

OPTICS = OpticsConfig()
WATER = water_preset("ocean")
NOISE = NoiseModel()
TARGET = LinkTarget(rate_bps=1e9, ber=1e-5, pulse_s=1e-9)
TX_POWER = 0.01


def disk_draw(rng, radius):
    ang = rng.uniform(0.0, 2.0 * math.pi)
    rad = radius * math.sqrt(rng.uniform())
    return np.array([rad * math.cos(ang), rad * math.sin(ang)])


def make_topology(rng, n_nodes=20, n_sinks=2, area=60.0, eps=0.75, frame=0.25):
    sinks = []
    for k in range(n_sinks):
        pos = np.array([area * (k + 1) / (n_sinks + 1), area])
        sinks.append(NodeState(node_id=100 + k, est=pos, act=pos.copy(),
                               frame_radius=frame, uncertainty=0.0,
                               pointing_target=100 + k))
    nodes = []
    for i in range(n_nodes):
        est = np.array([rng.uniform(0.0, area), rng.uniform(0.0, area)])
        target = min(sinks, key=lambda s: float(np.hypot(*(s.est - est))))
        nodes.append(NodeState(node_id=i, est=est, act=est + disk_draw(rng, eps),
                               frame_radius=frame, uncertainty=eps,
                               pointing_target=target.node_id))
    return nodes, sinks


def scalar_reachable(tx, rx, sinks):
    """Per-pair oracle: solved cone geometry plus the closed-form range.

    The range probe always uses the narrowest beam; the solved cone only
    gates whether the candidate can be covered at all.
    """
    sink_est = {s.node_id: s.est for s in sinks}
    try:
        geo = link_geometry(tx, rx, sink_est, PointingCase.NO_PAT, OPTICS)
        reach = comm_range(TX_POWER, TARGET.rate_bps, TARGET.ber,
                           OPTICS.theta_min_rad, geo.phi_rad, geo.psi_rad,
                           OPTICS, WATER, NOISE)
    except LinkInfeasibleError:
        return False
    return reach >= geo.distance_m


def test_neighbor_set_matches_scalar_link_solver():
    rng = np.random.default_rng(711)
    for _ in range(12):
        nodes, sinks = make_topology(rng, n_nodes=14)
        everyone = nodes + sinks
        for tx in nodes:
            got = neighbor_set(tx, everyone, sinks, OPTICS, WATER, NOISE,
                               TARGET, TX_POWER)
            want = {rx.node_id for rx in everyone
                    if rx.node_id != tx.node_id and scalar_reachable(tx, rx, sinks)}
            assert got == want


def test_isolated_node_has_empty_neighbor_set():
    rng = np.random.default_rng(5)
    nodes, sinks = make_topology(rng, n_nodes=6, area=30.0)
    lone = NodeState(node_id=50, est=np.array([5000.0, 5000.0]),
                     act=np.array([5000.0, 5000.0]), frame_radius=0.25,
                     uncertainty=0.75, pointing_target=sinks[0].node_id)
    assert neighbor_set(lone, nodes + sinks, sinks, OPTICS, WATER, NOISE,
                        TARGET, TX_POWER) == set()


def boundary_setup(stretch):
    """Source aiming at an on-axis sink placed at ``stretch`` times its reach."""
    water = water_preset("pure")
    reach = comm_range(TX_POWER, TARGET.rate_bps, TARGET.ber,
                       OPTICS.theta_min_rad, 0.0, 0.0, OPTICS, water, NOISE)
    # keep the covering cone pinned at theta_min so the feasibility gate
    # cannot interfere with the pure range boundary under test
    assert reach > 0.25 / math.sin(OPTICS.theta_min_rad) + 1.0
    d = reach * stretch
    sink = NodeState(node_id=100, est=np.array([d, 0.0]),
                     act=np.array([d, 0.0]), frame_radius=0.25,
                     uncertainty=0.0, pointing_target=100)
    src = NodeState(node_id=0, est=np.array([0.0, 0.0]),
                    act=np.array([0.0, 0.0]), frame_radius=0.25,
                    uncertainty=0.0, pointing_target=100)
    return src, sink, water


def test_range_boundary_is_inclusive():
    src, sink, water = boundary_setup(1.0)
    got = neighbor_set(src, [sink], [sink], OPTICS, water, NOISE, TARGET,
                       TX_POWER)
    assert got == {100}


def test_just_beyond_range_is_excluded():
    src, sink, water = boundary_setup(1.0 + 1e-9)
    got = neighbor_set(src, [sink], [sink], OPTICS, water, NOISE, TARGET,
                       TX_POWER)
    assert got == set()


def test_literal_angle_filter_drops_on_axis_candidates():
    # bearing offset zero falls below theta_min, so the literal reading of
    # the angular window rejects a candidate the physical cone affords
    src, sink, water = boundary_setup(0.5)
    default = neighbor_set(src, [sink], [sink], OPTICS, water, NOISE, TARGET,
                           TX_POWER)
    literal = neighbor_set(src, [sink], [sink], OPTICS, water, NOISE, TARGET,
                           TX_POWER, literal_angle_filter=True)
    assert default == {100}
    assert literal == set()


def test_literal_angle_filter_is_never_looser():
    rng = np.random.default_rng(200)
    for _ in range(8):
        nodes, sinks = make_topology(rng, n_nodes=12)
        everyone = nodes + sinks
        for tx in nodes:
            loose = neighbor_set(tx, everyone, sinks, OPTICS, WATER, NOISE,
                                 TARGET, TX_POWER)
            strict = neighbor_set(tx, everyone, sinks, OPTICS, WATER, NOISE,
                                  TARGET, TX_POWER, literal_angle_filter=True)
            assert strict <= loose


def test_select_forwarder_weighs_distance_and_reliability():
    assert select_forwarder([1, 2], [10.0, 20.0], [0.0, 0.0]) == 2
    assert select_forwarder([1, 2], [10.0, 10.0], [0.2, 0.0]) == 2
    # equal scores: smaller id wins
    assert select_forwarder([7, 3], [10.0, 10.0], [0.1, 0.1]) == 3
    # reliability can overturn raw progress
    assert select_forwarder([1, 2], [30.0, 20.0], [0.5, 0.1]) == 2


def test_select_forwarder_validation():
    with pytest.raises(DomainError):
        select_forwarder([], [], [])
    with pytest.raises(DomainError):
        select_forwarder([1, 2], [1.0], [0.1, 0.2])


def test_single_hop_to_adjacent_sink():
    rng = np.random.default_rng(9)
    nodes, sinks = make_topology(rng, n_nodes=1, n_sinks=1, area=20.0)
    src = NodeState(node_id=0, est=sinks[0].est - np.array([15.0, 0.0]),
                    act=sinks[0].est - np.array([15.0, 0.0]),
                    frame_radius=0.25, uncertainty=0.75,
                    pointing_target=sinks[0].node_id)
    result = lipar_route(0, [src], sinks, OPTICS, WATER, NOISE, TARGET,
                         TX_POWER)
    assert result.success
    assert result.route.vertices == (0, sinks[0].node_id)
    assert result.route.hops == 1
    assert result.failure is None
    assert result.state.trace == result.route.vertices
    assert result.route.objective == e2e_ber_df(result.route.bers)


def test_feasible_sink_preempts_better_scoring_relay():
    # the relay sits past the sink but keeps its aperture usable by
    # pointing at a second, remote sink; raw progress would favor it
    sink_a = NodeState(node_id=100, est=np.array([20.0, 0.0]),
                       act=np.array([20.0, 0.0]), frame_radius=0.25,
                       uncertainty=0.0, pointing_target=100)
    sink_b = NodeState(node_id=101, est=np.array([50.0, 40.0]),
                       act=np.array([50.0, 40.0]), frame_radius=0.25,
                       uncertainty=0.0, pointing_target=101)
    src = NodeState(node_id=0, est=np.array([0.0, 0.0]),
                    act=np.array([0.0, 0.0]), frame_radius=0.25,
                    uncertainty=0.75, pointing_target=100)
    relay = NodeState(node_id=1, est=np.array([24.0, 1.0]),
                      act=np.array([24.0, 1.0]), frame_radius=0.25,
                      uncertainty=0.75, pointing_target=101)
    sinks = [sink_a, sink_b]
    reachable = neighbor_set(src, [relay] + sinks, sinks, OPTICS, WATER,
                             NOISE, TARGET, TX_POWER)
    assert reachable == {1, 100}  # both in play, relay is farther
    result = lipar_route(0, [src, relay], sinks, OPTICS, WATER, NOISE,
                         TARGET, TX_POWER)
    assert result.success
    assert result.route.vertices == (0, 100)


def test_forced_chain_is_followed_in_order():
    # 25 m spacing is reachable, 50 m is not, so the packet must walk
    # the collinear chain node by node
    xs = [0.0, 25.0, 50.0, 75.0]
    sink = NodeState(node_id=100, est=np.array([xs[3], 0.0]),
                     act=np.array([xs[3], 0.0]), frame_radius=0.25,
                     uncertainty=0.0, pointing_target=100)
    nodes = [NodeState(node_id=i, est=np.array([x, 0.0]),
                       act=np.array([x, 0.0]), frame_radius=0.25,
                       uncertainty=0.75, pointing_target=100)
             for i, x in enumerate(xs[:3])]
    hop_ok = neighbor_set(nodes[0], nodes + [sink], [sink], OPTICS, WATER,
                          NOISE, TARGET, TX_POWER)
    assert hop_ok == {1}
    result = lipar_route(0, nodes, [sink], OPTICS, WATER, NOISE, TARGET,
                         TX_POWER)
    assert result.success
    assert result.route.vertices == (0, 1, 2, 100)
    assert result.route.hops == 3
    np.testing.assert_allclose(result.route.powers_w, TX_POWER)


def test_dead_end_failure_is_typed():
    rng = np.random.default_rng(31)
    nodes, sinks = make_topology(rng, n_nodes=3, area=25.0)
    lone = NodeState(node_id=9, est=np.array([4000.0, 4000.0]),
                     act=np.array([4000.0, 4000.0]), frame_radius=0.25,
                     uncertainty=0.75, pointing_target=sinks[0].node_id)
    result = lipar_route(9, nodes + [lone], sinks, OPTICS, WATER, NOISE,
                         TARGET, TX_POWER)
    assert not result.success
    assert result.failure is FailureReason.DEAD_END
    assert result.state.trace == (9,)


def test_hop_budget_failure_is_typed():
    xs = [0.0, 25.0, 50.0, 75.0]
    sink = NodeState(node_id=100, est=np.array([xs[3], 0.0]),
                     act=np.array([xs[3], 0.0]), frame_radius=0.25,
                     uncertainty=0.0, pointing_target=100)
    nodes = [NodeState(node_id=i, est=np.array([x, 0.0]),
                       act=np.array([x, 0.0]), frame_radius=0.25,
                       uncertainty=0.75, pointing_target=100)
             for i, x in enumerate(xs[:3])]
    result = lipar_route(0, nodes, [sink], OPTICS, WATER, NOISE, TARGET,
                         TX_POWER, hop_budget=2)
    assert not result.success
    assert result.failure is FailureReason.HOP_BUDGET
    assert result.state.trace == (0, 1, 2)
    assert result.state.budget == 0


def test_random_walks_terminate_loop_free():
    rng = np.random.default_rng(88)
    outcomes = {True: 0, False: 0}
    for trial in range(150):
        n = int(rng.integers(4, 30))
        nodes, sinks = make_topology(rng, n_nodes=n, area=80.0)
        src = int(rng.integers(0, n))
        result = lipar_route(src, nodes, sinks, OPTICS, WATER, NOISE,
                             TARGET, TX_POWER)
        trace = result.state.trace
        assert len(set(trace)) == len(trace)  # loop freedom
        assert trace[0] == src
        sink_ids = {s.node_id for s in sinks}
        if result.success:
            assert result.failure is None
            assert result.route.vertices == trace
            assert trace[-1] in sink_ids
            assert not any(v in sink_ids for v in trace[:-1])
            assert result.route.objective == e2e_ber_df(result.route.bers)
        else:
            assert result.route is None
            assert result.failure in (FailureReason.DEAD_END,
                                      FailureReason.HOP_BUDGET)
            assert trace[-1] not in sink_ids
        outcomes[result.success] += 1
    assert outcomes[True] > 0 and outcomes[False] > 0


def test_denser_deployments_fail_less():
    rng = np.random.default_rng(404)
    fails = {}
    for n in (5, 40):
        bad = 0
        for _ in range(40):
            nodes, sinks = make_topology(rng, n_nodes=n, area=80.0)
            result = lipar_route(0, nodes, sinks, OPTICS, WATER, NOISE,
                                 TARGET, TX_POWER)
            bad += 0 if result.success else 1
        fails[n] = bad / 40.0
    assert fails[40] < fails[5]


def test_state_invariants_are_enforced():
    with pytest.raises(DomainError):
        LiparState(current=2, visited=frozenset({1, 2}), budget=3,
                   trace=(1, 2, 1))
    with pytest.raises(DomainError):
        LiparState(current=2, visited=frozenset({1}), budget=3, trace=(1, 2))
    with pytest.raises(DomainError):
        LiparState(current=1, visited=frozenset({1, 2}), budget=3,
                   trace=(1, 2))
    with pytest.raises(DomainError):
        LiparState(current=2, visited=frozenset({1, 2}), budget=-1,
                   trace=(1, 2))


def test_route_input_validation():
    rng = np.random.default_rng(2)
    nodes, sinks = make_topology(rng, n_nodes=3)
    with pytest.raises(DomainError):
        lipar_route(77, nodes, sinks, OPTICS, WATER, NOISE, TARGET, TX_POWER)
    with pytest.raises(DomainError):
        lipar_route(sinks[0].node_id, nodes, sinks, OPTICS, WATER, NOISE,
                    TARGET, TX_POWER)
    with pytest.raises(DomainError):
        lipar_route(0, nodes, sinks, OPTICS, WATER, NOISE, TARGET, TX_POWER,
                    hop_budget=0)
    twin = [nodes[0], nodes[0]] + nodes[1:]
    with pytest.raises(DomainError):
        lipar_route(0, twin, sinks, OPTICS, WATER, NOISE, TARGET, TX_POWER)


def test_decisions_read_only_local_state():
    # the forwarding logic must not consult the centralized graph
    src = inspect.getsource(lipar_module)
    for name in ("NetworkGraph", "build_graph", "dijkstra", "yen_ksp"):
        assert name not in src
