#!/usr/bin/env python3
"""
Routing Module

Computes, per router and destination, the legal output ports of a network:

  - destination_tag: classic self-routing of delta networks (and the second
    half of a Beneš network), one port chosen by a digit of the destination.
  - adaptive_minimal: every output port that starts a forward path to the
    destination. The simulator picks among these by congestion.

A forward path only uses channels of increasing dimension, so the channel
dependence graph is acyclic and wormhole routing cannot deadlock.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Tuple

import networkx as nx

from topology import (
    DELTA_KINDS,
    TERMINAL_DIMENSION,
    Network,
    NetworkKind,
)

logger = logging.getLogger(__name__)


class RoutingError(ValueError):
    """Raised for malformed routing queries."""


class UnsupportedPolicyError(RoutingError):
    """Raised when a routing policy does not apply to a network or stage."""


class RoutingPolicy(Enum):
    DESTINATION_TAG = "destination_tag"
    ADAPTIVE_MINIMAL = "adaptive_minimal"


@dataclass(frozen=True)
class RouteQuery:
    """
    Where a head flit sits and where it is going.

    ``in_dim`` is the dimension of the channel the flit arrived on
    (TERMINAL_DIMENSION when it came straight from a terminal).
    """

    network: Network = field(repr=False)
    router_id: int
    dst: int
    in_dim: int = TERMINAL_DIMENSION

    def __post_init__(self):
        if not 0 <= self.router_id < len(self.network.routers):
            raise RoutingError(
                f"Router {self.router_id} does not belong to {self.network.label}"
            )
        if not 0 <= self.dst < self.network.n_terminals:
            raise RoutingError(
                f"Destination {self.dst} out of range for N={self.network.n_terminals}"
            )


@dataclass(frozen=True)
class RouteCandidates:
    ports: Tuple[int, ...]
    policy: RoutingPolicy


def _digit(value: int, position: int, radix: int) -> int:
    return (value // radix**position) % radix


def destination_tag(q: RouteQuery) -> RouteCandidates:
    """
    Self-routing port choice.

    At stage t of an s-stage radix-k delta network the port is base-k digit
    s-1-t of the destination (most significant digit first). In a Beneš
    network of 2n-1 stages the same rule holds from the middle stage on, with
    digit 2n-2-t at stage t.

    Raises:
        UnsupportedPolicyError: on merged networks, Clos networks and the first
            half of a Beneš network, where the route is not a function of the
            destination alone.
    """
    net = q.network
    stage = net.routers[q.router_id].stage
    if net.kind in DELTA_KINDS:
        port = _digit(q.dst, net.n_stages - 1 - stage, net.radix)
    elif net.kind == NetworkKind.BENES:
        middle = (net.n_stages - 1) // 2
        if stage < middle:
            raise UnsupportedPolicyError(
                f"Destination-tag routing does not apply to Beneš stage {stage} "
                f"(first half); use adaptive_minimal"
            )
        port = _digit(q.dst, net.n_stages - 1 - stage, 2)
    else:
        raise UnsupportedPolicyError(
            f"Destination-tag routing is not defined for {net.label} networks"
        )
    return RouteCandidates((port,), RoutingPolicy.DESTINATION_TAG)


def adaptive_candidates(q: RouteQuery) -> RouteCandidates:
    """All output ports, ascending, that begin a forward path to ``q.dst``."""
    reach = q.network.port_reach[q.router_id][:, q.dst]
    dims = q.network.port_dimensions[q.router_id]
    ports = tuple(
        p for p, ok in enumerate(reach) if ok and dims[p] > q.in_dim
    )
    return RouteCandidates(ports, RoutingPolicy.ADAPTIVE_MINIMAL)


def route(q: RouteQuery, policy: RoutingPolicy) -> RouteCandidates:
    if RoutingPolicy(policy) == RoutingPolicy.DESTINATION_TAG:
        return destination_tag(q)
    return adaptive_candidates(q)


# ------------------------------------------------------------------------------
# Precomputed tables
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RoutingTable:
    """
    Dense adaptive routing table.

    ``candidates[router][dst]`` lists the ports that reach ``dst`` when the
    flit arrived from a terminal; :meth:`lookup` narrows that to the ports
    usable after arriving on a channel of a given dimension.
    """

    network: Network = field(repr=False)
    candidates: Tuple[Tuple[Tuple[int, ...], ...], ...]
    by_in_dim: Dict[Tuple[int, int], Tuple[Tuple[int, ...], ...]] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.candidates) * self.network.n_terminals

    def lookup(
        self, router_id: int, dst: int, in_dim: int = TERMINAL_DIMENSION
    ) -> Tuple[int, ...]:
        row = self.by_in_dim.get((router_id, in_dim))
        if row is None:
            return adaptive_candidates(
                RouteQuery(self.network, router_id, dst, in_dim)
            ).ports
        return row[dst]

    def dump(self) -> str:
        """Plain-text listing for debugging; the layout is not a stable format."""
        lines = [f"# routing table for {self.network.label}, N={self.network.n_terminals}"]
        for (router_id, in_dim), row in sorted(self.by_in_dim.items()):
            for dst, ports in enumerate(row):
                listed = " ".join(str(p) for p in ports) or "-"
                lines.append(f"router {router_id} in_dim {in_dim} dst {dst}: {listed}")
        return "\n".join(lines) + "\n"


def precompute_tables(net: Network) -> RoutingTable:
    """Build the routing table once; every lookup afterwards is a tuple index."""
    n = net.n_terminals
    all_ports: List[Tuple[Tuple[int, ...], ...]] = []
    by_in_dim: Dict[Tuple[int, int], Tuple[Tuple[int, ...], ...]] = {}

    for router in net.routers:
        reach = net.port_reach[router.id]
        dims = net.port_dimensions[router.id]
        per_dst = tuple(
            tuple(p for p in range(router.n_out) if reach[p, dst]) for dst in range(n)
        )
        all_ports.append(per_dst)

        arrivals = {
            ch.dimension for ch in net.in_channels[router.id] if ch is not None
        }
        if any(ch is None for ch in net.in_channels[router.id]):
            arrivals.add(TERMINAL_DIMENSION)
        for in_dim in arrivals:
            by_in_dim[(router.id, in_dim)] = tuple(
                tuple(p for p in ports if dims[p] > in_dim) for ports in per_dst
            )

    table = RoutingTable(net, tuple(all_ports), by_in_dim)
    logger.debug(
        f"Routing table for {net.label}: {table.size} entries, "
        f"{len(by_in_dim)} (router, arrival dimension) rows"
    )
    return table


# ------------------------------------------------------------------------------
# Deadlock analysis
# ------------------------------------------------------------------------------


def channel_dependence_graph(net: Network) -> nx.DiGraph:
    """
    Channel dependence graph of adaptive forward routing.

    An edge c1 -> c2 means a message holding c1 may wait for c2: c2 leaves the
    router c1 enters, has a larger dimension and leads to some destination.
    """
    graph = nx.DiGraph()
    graph.add_nodes_from(ch.id for ch in net.channels)
    for ch in net.channels:
        rid = ch.dst.router_id
        for port, nxt in enumerate(net.out_channels[rid]):
            if nxt is None or nxt.dimension <= ch.dimension:
                continue
            if net.port_reach[rid][port].any():
                graph.add_edge(ch.id, nxt.id)
    return graph


def check_deadlock_freedom(net: Network) -> bool:
    graph = channel_dependence_graph(net)
    acyclic = nx.is_directed_acyclic_graph(graph)
    if not acyclic:
        cycle = nx.find_cycle(graph)
        logger.warning(
            f"{net.label}: channel dependence cycle through channels "
            f"{[edge[0] for edge in cycle]}"
        )
    return acyclic
