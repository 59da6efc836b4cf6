import itertools
import random

import networkx as nx
import pytest

from mcqf import (
    InvalidParams,
    Network,
    NodeKind,
    NodeNotFound,
    generate_topology,
    k_shortest_paths,
)


def test_ring_counts(ring4):
    assert len(ring4.nodes) == 8
    assert len(ring4.links) == 8
    assert len(ring4.switches()) == 4
    assert len(ring4.end_stations()) == 4


def test_erg_is_connected_switch_graph(erg10):
    assert len(erg10.switches()) == 10
    assert nx.is_connected(erg10.graph)
    assert all(l.bw_bps == 10**8 for l in erg10.links)


def test_rrg_degree_on_switches():
    net = generate_topology("rrg", link_bw_bps=10**8, seed=1, n=8, d=4)
    switches = set(net.switches())
    for sw in switches:
        peers = [v for v in net.graph.neighbors(sw) if v in switches]
        assert len(peers) == 4


def test_bag_edge_count():
    net = generate_topology("bag", link_bw_bps=10**8, seed=2, n=10, m=2, hosts_per_switch=0)
    # Barabasi-Albert with m=2 on 10 nodes has (10-2)*2 edges.
    assert len(net.links) == 16


def test_generate_is_deterministic():
    a = generate_topology("erg", link_bw_bps=10**8, seed=5, n=10, p=0.3)
    b = generate_topology("erg", link_bw_bps=10**8, seed=5, n=10, p=0.3)
    assert a.to_json_dict() == b.to_json_dict()


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n=1, p=0.3),
        dict(n=10, p=0.0),
        dict(n=10, p=1.5),
    ],
)
def test_erg_param_validation(kwargs):
    with pytest.raises(InvalidParams):
        generate_topology("erg", link_bw_bps=10**8, seed=1, **kwargs)


def test_rrg_param_validation():
    with pytest.raises(InvalidParams):
        generate_topology("rrg", link_bw_bps=10**8, seed=1, n=5, d=3)  # n*d odd
    with pytest.raises(InvalidParams):
        generate_topology("rrg", link_bw_bps=10**8, seed=1, n=4, d=4)  # d >= n


def test_ring_param_validation():
    with pytest.raises(InvalidParams):
        generate_topology("ring", link_bw_bps=10**8, seed=1, switches=2)


def test_json_round_trip(ring4, tmp_path):
    path = tmp_path / "net.json"
    ring4.save(path)
    loaded = Network.load(path)
    assert loaded.to_json_dict() == ring4.to_json_dict()
    assert loaded.bandwidth_bps == ring4.bandwidth_bps


def test_ring_adjacent_pair_has_two_simple_paths(ring4):
    routes = k_shortest_paths(ring4, 0, 1, 3)
    assert [r.hops for r in routes] == [1, 3]
    assert routes[0].nodes == (0, 1)


def test_k1_is_shortest_path(erg10):
    stations = erg10.end_stations()
    for src, dst in itertools.islice(itertools.combinations(stations, 2), 6):
        (route,) = k_shortest_paths(erg10, src, dst, 1)
        assert route.hops == nx.shortest_path_length(erg10.graph, src, dst)


def test_k_shortest_matches_exhaustive_enumeration(erg10):
    # Oracle: enumerate every simple path, order by (hops, node sequence).
    src, dst = erg10.end_stations()[0], erg10.end_stations()[-1]
    all_paths = sorted(
        (tuple(p) for p in nx.all_simple_paths(erg10.graph, src, dst)),
        key=lambda p: (len(p), p),
    )
    for k in (1, 2, 4, 7):
        routes = k_shortest_paths(erg10, src, dst, k)
        assert len(routes) == min(k, len(all_paths))
        assert [r.nodes for r in routes] == list(all_paths[: len(routes)])


def test_k_shortest_route_invariants(erg10):
    rng = random.Random(0)
    stations = erg10.end_stations()
    for _ in range(10):
        src, dst = rng.sample(stations, 2)
        routes = k_shortest_paths(erg10, src, dst, 4)
        assert len(routes) <= 4
        hops = [r.hops for r in routes]
        assert hops == sorted(hops)
        for route in routes:
            assert route.nodes[0] == src and route.nodes[-1] == dst
            assert len(set(route.nodes)) == len(route.nodes)
            rebuilt = erg10.make_route(route.nodes)  # replays adjacency
            assert rebuilt.switch_count == route.switch_count
            interior_sw = sum(
                1 for n in route.nodes[1:-1] if erg10.kind(n) is NodeKind.SWITCH
            )
            assert route.switch_count == interior_sw
        # deterministic for fixed inputs
        assert [r.nodes for r in k_shortest_paths(erg10, src, dst, 4)] == [
            r.nodes for r in routes
        ]


def test_k_shortest_errors(ring4):
    with pytest.raises(InvalidParams):
        k_shortest_paths(ring4, 0, 0, 2)
    with pytest.raises(NodeNotFound):
        k_shortest_paths(ring4, 0, 999, 2)
