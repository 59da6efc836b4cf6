"""TSN topology model: switches, end stations, links, and candidate routes.

Networks are undirected graphs of end stations (ES) and switches (SW) with a
uniform link bandwidth.  Flow routing uses loop-free k-shortest paths ordered
by hop count with a lexicographic tie-break, so route tables are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator

import networkx as nx

from .errors import DisconnectedGraph, InvalidParams, NodeNotFound, NoPath


class NodeKind(str, Enum):
    END_STATION = "ES"
    SWITCH = "SW"


@dataclass(frozen=True)
class Node:
    id: int
    kind: NodeKind


@dataclass(frozen=True)
class Link:
    """Undirected link between two nodes; endpoints are stored normalized (a < b)."""

    a: int
    b: int
    bw_bps: int

    def __post_init__(self):
        if self.a == self.b:
            raise InvalidParams(f"link endpoints must differ, got ({self.a}, {self.b})")
        if self.bw_bps <= 0:
            raise InvalidParams(f"link bandwidth must be > 0, got {self.bw_bps}")
        if self.a > self.b:
            lo, hi = self.b, self.a
            object.__setattr__(self, "a", lo)
            object.__setattr__(self, "b", hi)

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass(frozen=True)
class Route:
    """Simple path from a flow's source to its destination.

    ``switch_count`` is the number of switch nodes strictly between the
    endpoints; hop count is ``len(nodes) - 1``.
    """

    nodes: tuple[int, ...]
    switch_count: int

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    def links(self) -> list[tuple[int, int]]:
        seq = self.nodes
        return [tuple(sorted((seq[i], seq[i + 1]))) for i in range(len(seq) - 1)]


class Network:
    """Immutable undirected network of end stations and switches."""

    def __init__(self, nodes: Iterable[Node], links: Iterable[Link]):
        self._nodes: tuple[Node, ...] = tuple(sorted(nodes, key=lambda n: n.id))
        self._links: tuple[Link, ...] = tuple(sorted(links, key=lambda l: (l.a, l.b)))
        ids = [n.id for n in self._nodes]
        if len(set(ids)) != len(ids):
            raise InvalidParams("duplicate node ids")
        id_set = set(ids)
        pairs = set()
        for link in self._links:
            if link.a not in id_set or link.b not in id_set:
                raise NodeNotFound(f"link ({link.a}, {link.b}) references unknown node")
            if (link.a, link.b) in pairs:
                raise InvalidParams(f"duplicate link ({link.a}, {link.b})")
            pairs.add((link.a, link.b))
        bws = {l.bw_bps for l in self._links}
        if len(bws) > 1:
            raise InvalidParams("all links must share one bandwidth value")
        self._kind = {n.id: n.kind for n in self._nodes}
        g = nx.Graph()
        g.add_nodes_from(ids)
        g.add_edges_from((l.a, l.b) for l in self._links)
        if len(ids) > 1 and not nx.is_connected(g):
            raise DisconnectedGraph("network graph is not connected")
        self._graph = g
        self._link_index = {(l.a, l.b): i for i, l in enumerate(self._links)}

    @property
    def nodes(self) -> tuple[Node, ...]:
        return self._nodes

    @property
    def links(self) -> tuple[Link, ...]:
        return self._links

    @property
    def bandwidth_bps(self) -> int:
        return self._links[0].bw_bps

    @property
    def graph(self) -> nx.Graph:
        return self._graph

    def kind(self, node_id: int) -> NodeKind:
        try:
            return self._kind[node_id]
        except KeyError:
            raise NodeNotFound(f"node {node_id} not in network") from None

    def end_stations(self) -> list[int]:
        return [n.id for n in self._nodes if n.kind is NodeKind.END_STATION]

    def switches(self) -> list[int]:
        return [n.id for n in self._nodes if n.kind is NodeKind.SWITCH]

    def link_index(self, a: int, b: int) -> int:
        key = (a, b) if a <= b else (b, a)
        try:
            return self._link_index[key]
        except KeyError:
            raise NodeNotFound(f"no link between {a} and {b}") from None

    def make_route(self, node_seq: Iterable[int]) -> Route:
        """Build a Route from a node sequence, validating adjacency and simplicity."""
        seq = tuple(node_seq)
        if len(seq) < 2:
            raise InvalidParams("route needs at least two nodes")
        if len(set(seq)) != len(seq):
            raise InvalidParams("route revisits a node")
        for u, v in zip(seq, seq[1:]):
            if not self._graph.has_edge(u, v):
                raise NoPath(f"nodes {u} and {v} are not adjacent")
        sw = sum(1 for nid in seq[1:-1] if self._kind[nid] is NodeKind.SWITCH)
        return Route(seq, sw)

    # ------------------------------------------------------------------
    # JSON serialization
    # ------------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "kind": n.kind.value} for n in self._nodes],
            "links": [{"a": l.a, "b": l.b, "bw_bps": l.bw_bps} for l in self._links],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "Network":
        nodes = [Node(int(n["id"]), NodeKind(n["kind"])) for n in data["nodes"]]
        links = [Link(int(l["a"]), int(l["b"]), int(l["bw_bps"])) for l in data["links"]]
        return cls(nodes, links)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "Network":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


class TopologyKind(str, Enum):
    ERG = "erg"
    RRG = "rrg"
    BAG = "bag"
    RING = "ring"


_RETRY_CAP = 50


def generate_topology(
    kind: TopologyKind | str,
    *,
    link_bw_bps: int,
    seed: int,
    n: int | None = None,
    p: float | None = None,
    d: int | None = None,
    m: int | None = None,
    switches: int | None = None,
    hosts_per_switch: int = 1,
) -> Network:
    """Generate a connected topology of switches with end stations attached.

    ERG(n, p): Erdos-Renyi switch graph; RRG(n, d): random d-regular;
    BAG(n, m): Barabasi-Albert; Ring(switches): cycle of switches.  Each
    switch gets ``hosts_per_switch`` end stations so flows have ES endpoints.
    Random graph kinds are regenerated until connected, up to a retry cap.
    """
    kind = TopologyKind(kind)
    if link_bw_bps <= 0:
        raise InvalidParams("link bandwidth must be > 0")
    if hosts_per_switch < 0:
        raise InvalidParams("hosts_per_switch must be >= 0")

    if kind is TopologyKind.RING:
        n_sw = switches if switches is not None else n
        if n_sw is None or n_sw < 3:
            raise InvalidParams("ring needs at least 3 switches")
        sw_graph = nx.cycle_graph(n_sw)
    elif kind is TopologyKind.ERG:
        if n is None or n < 2 or p is None or not 0 < p <= 1:
            raise InvalidParams("ERG needs n >= 2 and 0 < p <= 1")
        sw_graph = _connected_random_graph(
            lambda s: nx.erdos_renyi_graph(n, p, seed=s), seed
        )
    elif kind is TopologyKind.RRG:
        if n is None or d is None or d >= n or (n * d) % 2 != 0:
            raise InvalidParams("RRG needs d < n and n*d even")
        sw_graph = _connected_random_graph(
            lambda s: nx.random_regular_graph(d, n, seed=s), seed
        )
    else:  # BAG
        if n is None or m is None or not 1 <= m < n:
            raise InvalidParams("BAG needs 1 <= m < n")
        sw_graph = _connected_random_graph(
            lambda s: nx.barabasi_albert_graph(n, m, seed=s), seed
        )

    n_sw = sw_graph.number_of_nodes()
    nodes = [Node(i, NodeKind.SWITCH) for i in range(n_sw)]
    links = [Link(u, v, link_bw_bps) for u, v in sw_graph.edges()]
    next_id = n_sw
    for sw in range(n_sw):
        for _ in range(hosts_per_switch):
            nodes.append(Node(next_id, NodeKind.END_STATION))
            links.append(Link(sw, next_id, link_bw_bps))
            next_id += 1
    return Network(nodes, links)


def _connected_random_graph(factory, seed: int) -> nx.Graph:
    for attempt in range(_RETRY_CAP):
        g = factory(seed + 10_007 * attempt)
        if g.number_of_nodes() > 0 and nx.is_connected(g):
            return g
    raise DisconnectedGraph(f"no connected graph after {_RETRY_CAP} attempts")


def k_shortest_paths(net: Network, src: int, dst: int, k: int) -> list[Route]:
    """Up to k loop-free routes ordered by hop count, then node sequence.

    The first entry is always a shortest path.  Enumeration collects every
    path tied with the k-th shortest length before sorting, so the result is
    independent of the underlying generator's tie order.
    """
    if k < 1:
        raise InvalidParams("k must be >= 1")
    if src == dst:
        raise InvalidParams("src and dst must differ")
    for node in (src, dst):
        if node not in net._kind:
            raise NodeNotFound(f"node {node} not in network")
    try:
        generator: Iterator[list[int]] = nx.shortest_simple_paths(net.graph, src, dst)
        collected: list[list[int]] = []
        kth_len: int | None = None
        for path in generator:
            hops = len(path) - 1
            if kth_len is not None and hops > kth_len:
                break
            collected.append(path)
            if kth_len is None and len(collected) == k:
                kth_len = hops
    except nx.NetworkXNoPath:
        raise NoPath(f"no path between {src} and {dst}") from None
    if not collected:
        raise NoPath(f"no path between {src} and {dst}")
    collected.sort(key=lambda path: (len(path), tuple(path)))
    return [net.make_route(path) for path in collected[:k]]
