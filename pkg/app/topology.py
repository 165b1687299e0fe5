#!/usr/bin/env python3
"""
Topology Module

Builds multistage interconnection networks (Omega, Butterfly, Baseline,
Generalized Cube, Beneš and Clos) as explicit, immutable graphs of routers,
channels and terminals, and derives flattened and meta-flattened variants
from them.

Every builder works on "wire indices": output port p of the router in row r
of a stage built at radix k is wire r*k + p, and the wiring between two
stages is a permutation of wire indices. The delta networks differ only in
those permutations.

Each channel remembers the stage transition it was created for
(its ``dimension``). A forward path through any network built or transformed
here uses channels of strictly increasing dimension, which keeps routing
stage-monotone even after stages have been merged.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
# Errors
# ------------------------------------------------------------------------------


class TopologyError(ValueError):
    """Raised when a network cannot be built or transformed as requested."""


class InvalidSizeError(TopologyError):
    """Raised when a terminal count does not fit the requested network family."""


# ------------------------------------------------------------------------------
# Domain Types
# ------------------------------------------------------------------------------


class Side(Enum):
    INPUT = "input"
    OUTPUT = "output"


class ChannelKind(Enum):
    INTER_STAGE = "inter_stage"
    INTRA_STAGE = "intra_stage"
    TERMINAL_IN = "terminal_in"
    TERMINAL_OUT = "terminal_out"


class NetworkKind(Enum):
    """Supported network families."""

    OMEGA = "omega"
    BUTTERFLY = "butterfly"
    BASELINE = "baseline"
    GENERALIZED_CUBE = "generalized_cube"
    BENES = "benes"
    CLOS = "clos"
    FLATTENED = "flattened"
    MF_GROUPED = "mf_grouped"
    MF_FULL = "mf_full"


class FlattenMethod(Enum):
    """Ways of merging the intermediate stages of a meta-flattened network."""

    GROUPED_PAIRS = "grouped_pairs"
    ALL_INTERMEDIATE = "all_intermediate"


DELTA_KINDS = frozenset(
    {
        NetworkKind.OMEGA,
        NetworkKind.BUTTERFLY,
        NetworkKind.BASELINE,
        NetworkKind.GENERALIZED_CUBE,
    }
)
MERGED_KINDS = frozenset(
    {NetworkKind.FLATTENED, NetworkKind.MF_GROUPED, NetworkKind.MF_FULL}
)

# Dimension of the channel a packet "arrives on" when it enters from a terminal.
TERMINAL_DIMENSION = -1


@dataclass(frozen=True)
class PortRef:
    router_id: int
    side: Side
    port: int


@dataclass(frozen=True)
class Channel:
    """
    A unidirectional wire between an output port and an input port.

    Terminal channels have no router on their terminal end: ``src`` is None
    for TERMINAL_IN and ``dst`` is None for TERMINAL_OUT, and ``terminal``
    holds the terminal index.
    """

    id: int
    src: Optional[PortRef]
    dst: Optional[PortRef]
    kind: ChannelKind
    dimension: int
    terminal: Optional[int] = None


@dataclass(frozen=True)
class Router:
    id: int
    stage: int
    row: int
    n_in: int
    n_out: int

    @property
    def degree(self) -> int:
        return self.n_in + self.n_out


@dataclass(frozen=True)
class ClosParams:
    """
    Three-stage Clos parameters.

    Attributes:
        n: inputs per first-stage switch (and outputs per last-stage switch)
        m: number of middle-stage switches
        r: number of first-stage (and last-stage) switches
    """

    n: int
    m: int
    r: int

    def __post_init__(self):
        for name in ("n", "m", "r"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise TopologyError(
                    f"Clos parameter {name} must be a positive integer (got {value!r})"
                )

    @property
    def n_terminals(self) -> int:
        return self.n * self.r

    @property
    def strictly_nonblocking(self) -> bool:
        return self.m >= 2 * self.n - 1

    @property
    def rearrangeable(self) -> bool:
        return self.m >= self.n


@dataclass(frozen=True)
class Network:
    """
    An immutable staged router/channel graph with terminal bindings.

    ``channels`` holds router-to-router channels only; terminal attachments are
    described by ``input_terminals`` / ``output_terminals`` and materialized on
    demand by :meth:`terminal_channels`.
    """

    kind: NetworkKind
    n_terminals: int
    radix: int
    stages: Tuple[Tuple[int, ...], ...]
    routers: Tuple[Router, ...]
    channels: Tuple[Channel, ...]
    input_terminals: Tuple[PortRef, ...]
    output_terminals: Tuple[PortRef, ...]
    parent: Optional[NetworkKind] = None
    clos: Optional[ClosParams] = None

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    @property
    def label(self) -> str:
        """Short human-readable name, e.g. ``omega`` or ``mf_butterfly``."""
        if self.kind == NetworkKind.FLATTENED:
            return f"flattened_{self.parent.value}"
        if self.kind == NetworkKind.MF_FULL:
            return f"mf_{self.parent.value}"
        if self.kind == NetworkKind.MF_GROUPED:
            return f"mf_{self.parent.value}_pairs"
        return self.kind.value

    @cached_property
    def out_channels(self) -> Tuple[Tuple[Optional[Channel], ...], ...]:
        """out_channels[router][port] -> Channel, or None for a terminal output."""
        table = [[None] * r.n_out for r in self.routers]
        for ch in self.channels:
            table[ch.src.router_id][ch.src.port] = ch
        return tuple(tuple(row) for row in table)

    @cached_property
    def in_channels(self) -> Tuple[Tuple[Optional[Channel], ...], ...]:
        """in_channels[router][port] -> Channel, or None for a terminal input."""
        table = [[None] * r.n_in for r in self.routers]
        for ch in self.channels:
            table[ch.dst.router_id][ch.dst.port] = ch
        return tuple(tuple(row) for row in table)

    @cached_property
    def output_terminal_at(self) -> Dict[Tuple[int, int], int]:
        """(router, output port) -> output terminal index."""
        return {(p.router_id, p.port): j for j, p in enumerate(self.output_terminals)}

    @cached_property
    def input_terminal_at(self) -> Dict[Tuple[int, int], int]:
        """(router, input port) -> input terminal index."""
        return {(p.router_id, p.port): i for i, p in enumerate(self.input_terminals)}

    @cached_property
    def exit_dimension(self) -> int:
        """Dimension assigned to terminal-out hops (above every channel)."""
        return max((ch.dimension for ch in self.channels), default=-1) + 1

    @cached_property
    def port_dimensions(self) -> Tuple[Tuple[int, ...], ...]:
        """port_dimensions[router][port]: dimension of the hop through that port."""
        exit_dim = self.exit_dimension
        return tuple(
            tuple(exit_dim if ch is None else ch.dimension for ch in ports)
            for ports in self.out_channels
        )

    @cached_property
    def port_reach(self) -> Tuple[np.ndarray, ...]:
        """
        port_reach[router][port, dst] is True when a forward path leaving the
        router through ``port`` can reach output terminal ``dst``.
        """
        reach = [np.zeros((r.n_out, self.n_terminals), dtype=bool) for r in self.routers]
        for (rid, port), j in self.output_terminal_at.items():
            reach[rid][port, j] = True
        dims = [np.array(d, dtype=int) for d in self.port_dimensions]
        # successors always carry a larger dimension, so walk dimensions downwards
        for ch in sorted(self.channels, key=lambda c: c.dimension, reverse=True):
            nxt = ch.dst.router_id
            usable = dims[nxt] > ch.dimension
            reach[ch.src.router_id][ch.src.port] = reach[nxt][usable].any(axis=0)
        for table in reach:
            table.flags.writeable = False
        return tuple(reach)

    @cached_property
    def channel_graph(self) -> nx.DiGraph:
        """
        Directed acyclic graph of legal hop sequences.

        Nodes are ``("in", i)`` terminals, ``("ch", id)`` channels and
        ``("out", j)`` terminals. An edge joins two channels when the second
        leaves the router the first enters and has a larger dimension.
        """
        graph = nx.DiGraph()
        by_router: Dict[int, List[Channel]] = {r.id: [] for r in self.routers}
        for ch in self.channels:
            by_router[ch.src.router_id].append(ch)
        exits: Dict[int, List[int]] = {r.id: [] for r in self.routers}
        for j, ref in enumerate(self.output_terminals):
            exits[ref.router_id].append(j)

        for i, ref in enumerate(self.input_terminals):
            node = ("in", i)
            graph.add_node(node, router=ref.router_id)
            for ch in by_router[ref.router_id]:
                graph.add_edge(node, ("ch", ch.id))
            for j in exits[ref.router_id]:
                graph.add_edge(node, ("out", j))
        for ch in self.channels:
            node = ("ch", ch.id)
            graph.add_node(node, router=ch.dst.router_id)
            for nxt in by_router[ch.dst.router_id]:
                if nxt.dimension > ch.dimension:
                    graph.add_edge(node, ("ch", nxt.id))
            for j in exits[ch.dst.router_id]:
                graph.add_edge(node, ("out", j))
        for j, ref in enumerate(self.output_terminals):
            graph.add_node(("out", j), router=ref.router_id)
        return graph

    def terminal_channels(self) -> List[Channel]:
        """Materialize terminal channels, numbered after the router channels."""
        base = len(self.channels)
        result = []
        for i, ref in enumerate(self.input_terminals):
            result.append(
                Channel(
                    base + i,
                    None,
                    ref,
                    ChannelKind.TERMINAL_IN,
                    TERMINAL_DIMENSION,
                    terminal=i,
                )
            )
        for j, ref in enumerate(self.output_terminals):
            result.append(
                Channel(
                    base + self.n_terminals + j,
                    ref,
                    None,
                    ChannelKind.TERMINAL_OUT,
                    self.exit_dimension,
                    terminal=j,
                )
            )
        return result

    def to_dict(self) -> Dict:
        """Structured, JSON-ready description (routers, channels, terminals)."""

        def port(ref: Optional[PortRef]):
            if ref is None:
                return None
            return {"router": ref.router_id, "side": ref.side.value, "port": ref.port}

        return {
            "kind": self.kind.value,
            "label": self.label,
            "parent": self.parent.value if self.parent else None,
            "n_terminals": self.n_terminals,
            "radix": self.radix,
            "clos": (
                {"n": self.clos.n, "m": self.clos.m, "r": self.clos.r}
                if self.clos
                else None
            ),
            "stages": [list(stage) for stage in self.stages],
            "routers": [
                {
                    "id": r.id,
                    "stage": r.stage,
                    "row": r.row,
                    "n_in": r.n_in,
                    "n_out": r.n_out,
                }
                for r in self.routers
            ],
            "channels": [
                {
                    "id": ch.id,
                    "kind": ch.kind.value,
                    "dimension": ch.dimension,
                    "src": port(ch.src),
                    "dst": port(ch.dst),
                }
                for ch in self.channels
            ],
            "input_terminals": [port(ref) for ref in self.input_terminals],
            "output_terminals": [port(ref) for ref in self.output_terminals],
        }


# ------------------------------------------------------------------------------
# Digit arithmetic on wire indices
# ------------------------------------------------------------------------------


def stages_for(n_terminals: int, radix: int) -> int:
    """Return s such that n_terminals == radix**s, or raise InvalidSizeError."""
    if not isinstance(radix, int) or radix < 2:
        raise InvalidSizeError(f"Radix must be an integer >= 2 (got {radix!r})")
    if not isinstance(n_terminals, int) or n_terminals < radix:
        raise InvalidSizeError(
            f"N must be a power of radix {radix} (got N={n_terminals})"
        )
    s, size = 0, 1
    while size < n_terminals:
        size *= radix
        s += 1
    if size != n_terminals:
        raise InvalidSizeError(
            f"N must be a power of radix {radix} (got N={n_terminals})"
        )
    return s


def _digit(value: int, position: int, radix: int) -> int:
    return (value // radix**position) % radix


def _swap_digits(value: int, a: int, b: int, radix: int) -> int:
    if a == b:
        return value
    da, db = _digit(value, a, radix), _digit(value, b, radix)
    return value + (db - da) * radix**a + (da - db) * radix**b


def _rotate_left_low(value: int, width: int, radix: int) -> int:
    """Rotate the lowest ``width`` digits left by one."""
    span = radix**width
    low = value % span
    return value - low + (low * radix) % span + low // (span // radix)


def _rotate_right_low(value: int, width: int, radix: int) -> int:
    """Rotate the lowest ``width`` digits right by one."""
    span = radix**width
    low = value % span
    return value - low + low // radix + (low % radix) * (span // radix)


def perfect_shuffle(i: int, n_terminals: int, radix: int = 2) -> int:
    """
    k-ary perfect shuffle: rotate the base-k digit string of ``i`` left by one.

    Examples:
      perfect_shuffle(1, 8, 2) -> 2   (001 -> 010)
      perfect_shuffle(5, 8, 2) -> 3   (101 -> 011)
    """
    s = stages_for(n_terminals, radix)
    if not 0 <= i < n_terminals:
        raise InvalidSizeError(f"Index {i} out of range for N={n_terminals}")
    return _rotate_left_low(i, s, radix)


# ------------------------------------------------------------------------------
# Generic staged assembly
# ------------------------------------------------------------------------------

# (rows, n_in, n_out) for every router of a stage
StageShape = Tuple[int, int, int]
# (stage, row, output port) -> (row, input port) in the next stage
WireFn = Callable[[int, int, int], Tuple[int, int]]
# terminal index -> (row, port) in the first / last stage
TerminalFn = Callable[[int], Tuple[int, int]]


def _assemble(
    kind: NetworkKind,
    n_terminals: int,
    radix: int,
    shapes: Sequence[StageShape],
    wire: WireFn,
    terminal_in: TerminalFn,
    terminal_out: TerminalFn,
    clos: Optional[ClosParams] = None,
) -> Network:
    """Number routers stage-major, then row; channels by (source router, port)."""
    routers: List[Router] = []
    stages: List[Tuple[int, ...]] = []
    base: List[int] = []
    for t, (rows, n_in, n_out) in enumerate(shapes):
        base.append(len(routers))
        ids = []
        for row in range(rows):
            ids.append(len(routers))
            routers.append(Router(len(routers), t, row, n_in, n_out))
        stages.append(tuple(ids))

    channels: List[Channel] = []
    for t in range(len(shapes) - 1):
        rows, _, n_out = shapes[t]
        for row in range(rows):
            for p in range(n_out):
                dst_row, dst_port = wire(t, row, p)
                channels.append(
                    Channel(
                        len(channels),
                        PortRef(base[t] + row, Side.OUTPUT, p),
                        PortRef(base[t + 1] + dst_row, Side.INPUT, dst_port),
                        ChannelKind.INTER_STAGE,
                        t,
                    )
                )

    last = len(shapes) - 1
    inputs = []
    outputs = []
    for i in range(n_terminals):
        row, port = terminal_in(i)
        inputs.append(PortRef(base[0] + row, Side.INPUT, port))
        row, port = terminal_out(i)
        outputs.append(PortRef(base[last] + row, Side.OUTPUT, port))

    return Network(
        kind=kind,
        n_terminals=n_terminals,
        radix=radix,
        stages=tuple(stages),
        routers=tuple(routers),
        channels=tuple(channels),
        input_terminals=tuple(inputs),
        output_terminals=tuple(outputs),
        clos=clos,
    )


def _build_from_permutations(
    kind: NetworkKind,
    n_terminals: int,
    radix: int,
    n_stages: int,
    between: Callable[[int, int], int],
    first: Callable[[int], int] = lambda w: w,
) -> Network:
    """
    Build a uniform radix-k MIN from wire permutations.

    ``first`` maps an input terminal to a first-stage input wire and
    ``between(t, w)`` maps output wire w of stage t to an input wire of
    stage t + 1. Last-stage output wire j is output terminal j.
    """
    k = radix

    def wire(t: int, row: int, port: int) -> Tuple[int, int]:
        return divmod(between(t, row * k + port), k)

    def terminal_in(i: int) -> Tuple[int, int]:
        return divmod(first(i), k)

    def terminal_out(j: int) -> Tuple[int, int]:
        return divmod(j, k)

    shapes = [(n_terminals // k, k, k)] * n_stages
    net = _assemble(kind, n_terminals, k, shapes, wire, terminal_in, terminal_out)
    logger.debug(
        f"Built {kind.value}(N={n_terminals}, k={k}): {n_stages} stages, "
        f"{len(net.routers)} routers, {len(net.channels)} channels"
    )
    return net


# ------------------------------------------------------------------------------
# Builders
# ------------------------------------------------------------------------------


def build_omega(n_terminals: int, radix: int = 2) -> Network:
    """Omega network: a perfect shuffle in front of every stage."""
    s = stages_for(n_terminals, radix)
    return _build_from_permutations(
        NetworkKind.OMEGA,
        n_terminals,
        radix,
        s,
        between=lambda t, w: _rotate_left_low(w, s, radix),
        first=lambda i: _rotate_left_low(i, s, radix),
    )


def build_butterfly(n_terminals: int, radix: int = 2) -> Network:
    """Butterfly network: transition t exchanges digit 0 with digit s-1-t."""
    s = stages_for(n_terminals, radix)
    return _build_from_permutations(
        NetworkKind.BUTTERFLY,
        n_terminals,
        radix,
        s,
        between=lambda t, w: _swap_digits(w, 0, s - 1 - t, radix),
    )


def build_baseline(n_terminals: int, radix: int = 2) -> Network:
    """Baseline network: transition t unshuffles the lowest s-t digits."""
    s = stages_for(n_terminals, radix)
    return _build_from_permutations(
        NetworkKind.BASELINE,
        n_terminals,
        radix,
        s,
        between=lambda t, w: _rotate_right_low(w, s - t, radix),
    )


def build_generalized_cube(n_terminals: int, radix: int = 2) -> Network:
    """
    Generalized Cube network.

    Stage t exchanges along cube digit s-1-t. Links are labelled by their cube
    address; the permutation before stage t brings digit s-1-t into the
    switch-local position 0 and the next permutation restores it.
    """
    s = stages_for(n_terminals, radix)

    def to_local(t: int, w: int) -> int:
        return _swap_digits(w, 0, s - 1 - t, radix)

    return _build_from_permutations(
        NetworkKind.GENERALIZED_CUBE,
        n_terminals,
        radix,
        s,
        between=lambda t, w: to_local(t + 1, to_local(t, w)),
        first=lambda i: to_local(0, i),
    )


def build_benes(n_terminals: int) -> Network:
    """
    Beneš network at N = 2^n: a baseline followed by its mirror image.

    The two halves share the middle stage, giving 2n-1 stages of N/2 2x2
    routers.
    """
    try:
        n = stages_for(n_terminals, 2)
    except InvalidSizeError:
        raise InvalidSizeError(
            f"Beneš networks need N to be a power of 2 (got N={n_terminals})"
        )

    def between(t: int, w: int) -> int:
        if t <= n - 2:
            return _rotate_right_low(w, n - t, 2)
        return _rotate_left_low(w, t - n + 3, 2)

    return _build_from_permutations(
        NetworkKind.BENES, n_terminals, 2, 2 * n - 1, between=between
    )


def default_clos_params(n_terminals: int) -> ClosParams:
    """
    Default Clos parameters for N = 2^q (q >= 2).

    n = 2^floor(q/2), r = N/n and m = n*(q-1). The middle-stage count gives the
    Clos network the same port and channel budget as the Beneš network of the
    same size and keeps it strict-sense non-blocking for N >= 8.
    """
    try:
        q = stages_for(n_terminals, 2)
    except InvalidSizeError:
        raise InvalidSizeError(
            f"Default Clos parameters need N to be a power of 2 (got N={n_terminals})"
        )
    if q < 2:
        raise InvalidSizeError(f"Clos networks need N >= 4 (got N={n_terminals})")
    n = 2 ** (q // 2)
    return ClosParams(n=n, m=n * (q - 1), r=n_terminals // n)


def build_clos(params: ClosParams, n_terminals: Optional[int] = None) -> Network:
    """
    Three-stage Clos network: r n×m switches, m r×r switches, r m×n switches.

    Output j of first-stage switch i feeds input i of middle switch j, and
    output i of middle switch j feeds input j of last-stage switch i.
    """
    if n_terminals is not None and n_terminals != params.n_terminals:
        raise TopologyError(
            f"Clos parameters n={params.n}, r={params.r} give N={params.n_terminals}, "
            f"not {n_terminals}"
        )
    n, m, r = params.n, params.m, params.r
    shapes = [(r, n, m), (m, r, r), (r, m, n)]

    def wire(t: int, row: int, port: int) -> Tuple[int, int]:
        return port, row

    def terminal(i: int) -> Tuple[int, int]:
        return divmod(i, n)

    net = _assemble(
        NetworkKind.CLOS,
        params.n_terminals,
        n,
        shapes,
        wire,
        terminal,
        terminal,
        clos=params,
    )
    logger.debug(
        f"Built clos(n={n}, m={m}, r={r}): strictly non-blocking="
        f"{params.strictly_nonblocking}"
    )
    return net


BUILDERS: Dict[NetworkKind, Callable[[int, int], Network]] = {
    NetworkKind.OMEGA: build_omega,
    NetworkKind.BUTTERFLY: build_butterfly,
    NetworkKind.BASELINE: build_baseline,
    NetworkKind.GENERALIZED_CUBE: build_generalized_cube,
}


# ------------------------------------------------------------------------------
# Flattening
# ------------------------------------------------------------------------------


def _merge_stage_groups(
    net: Network, groups: Sequence[Sequence[int]], kind: NetworkKind
) -> Network:
    """
    Merge the routers of each stage group row-wise into one router per row.

    A merged router keeps, in order, the input ports of its group's first
    stage and the output ports of its group's last stage; cross-row channels
    inside the group are appended as intra-stage ports, same-row channels
    inside the group disappear into the merged crossbar.
    """
    stage_of_group: Dict[int, int] = {}
    for g, group in enumerate(groups):
        rows = {len(net.stages[t]) for t in group}
        if len(rows) != 1:
            raise TopologyError(
                f"Cannot merge stages {list(group)} with different router counts"
            )
        for t in group:
            stage_of_group[t] = g

    # merged (group, row) -> new router id, stage-major then row
    new_id: Dict[Tuple[int, int], int] = {}
    for g, group in enumerate(groups):
        for row in range(len(net.stages[group[0]])):
            new_id[(g, row)] = len(new_id)

    def merged(router_id: int) -> int:
        r = net.routers[router_id]
        return new_id[(stage_of_group[r.stage], r.row)]

    n_in = [0] * len(new_id)
    n_out = [0] * len(new_id)
    in_map: Dict[Tuple[int, int], PortRef] = {}
    out_map: Dict[Tuple[int, int], PortRef] = {}

    for g, group in enumerate(groups):
        for row, old_first in enumerate(net.stages[group[0]]):
            rid = new_id[(g, row)]
            for q in range(net.routers[old_first].n_in):
                in_map[(old_first, q)] = PortRef(rid, Side.INPUT, q)
            n_in[rid] = net.routers[old_first].n_in
        for row, old_last in enumerate(net.stages[group[-1]]):
            rid = new_id[(g, row)]
            for p in range(net.routers[old_last].n_out):
                out_map[(old_last, p)] = PortRef(rid, Side.OUTPUT, p)
            n_out[rid] = net.routers[old_last].n_out

    pending: List[Tuple[PortRef, PortRef, ChannelKind, int]] = []
    elided = 0
    for ch in net.channels:
        a, b = ch.src.router_id, ch.dst.router_id
        same_group = stage_of_group[net.routers[a].stage] == stage_of_group[
            net.routers[b].stage
        ]
        if not same_group:
            pending.append(
                (
                    out_map[(a, ch.src.port)],
                    in_map[(b, ch.dst.port)],
                    ChannelKind.INTER_STAGE,
                    ch.dimension,
                )
            )
            continue
        ma, mb = merged(a), merged(b)
        if ma == mb:
            elided += 1
            continue
        src = PortRef(ma, Side.OUTPUT, n_out[ma])
        dst = PortRef(mb, Side.INPUT, n_in[mb])
        n_out[ma] += 1
        n_in[mb] += 1
        pending.append((src, dst, ChannelKind.INTRA_STAGE, ch.dimension))

    pending.sort(key=lambda item: (item[0].router_id, item[0].port))
    channels = tuple(
        Channel(i, src, dst, ch_kind, dim)
        for i, (src, dst, ch_kind, dim) in enumerate(pending)
    )

    routers = []
    stages = []
    for g, group in enumerate(groups):
        ids = []
        for row in range(len(net.stages[group[0]])):
            rid = new_id[(g, row)]
            routers.append(Router(rid, g, row, n_in[rid], n_out[rid]))
            ids.append(rid)
        stages.append(tuple(ids))

    result = Network(
        kind=kind,
        n_terminals=net.n_terminals,
        radix=net.radix,
        stages=tuple(stages),
        routers=tuple(routers),
        channels=channels,
        input_terminals=tuple(
            in_map[(ref.router_id, ref.port)] for ref in net.input_terminals
        ),
        output_terminals=tuple(
            out_map[(ref.router_id, ref.port)] for ref in net.output_terminals
        ),
        parent=net.parent or net.kind,
        clos=net.clos,
    )
    logger.debug(
        f"Merged {net.label} into {result.label}: {result.n_stages} stages, "
        f"{len(routers)} routers, {elided} same-row channels absorbed"
    )
    return result


def full_flatten(net: Network) -> Network:
    """
    Merge all stages of a delta network row-wise into a single stage.

    Each merged router keeps its row's terminal inputs and outputs; every
    former inter-stage channel between different rows becomes an intra-stage
    channel (parallel channels are kept).

    Raises:
        TopologyError: if the network is already flattened, is not a delta
            network, or has a single stage.
    """
    if net.kind in MERGED_KINDS:
        raise TopologyError(f"Network {net.label} is already flattened")
    if net.kind not in DELTA_KINDS:
        raise TopologyError(
            f"full_flatten expects a delta network, got {net.kind.value}"
        )
    if net.n_stages < 2:
        raise TopologyError("full_flatten needs at least two stages to merge")
    return _merge_stage_groups(
        net, [list(range(net.n_stages))], NetworkKind.FLATTENED
    )


def meta_flatten(
    net: Network, method: FlattenMethod = FlattenMethod.ALL_INTERMEDIATE
) -> Network:
    """
    Keep the first and last stages and flatten the intermediate ones.

    Args:
        net: an unflattened network with at least three stages
        method: ALL_INTERMEDIATE merges every intermediate stage into one;
            GROUPED_PAIRS merges them two at a time (even count required)

    Returns:
        The meta-flattened network (kind MF_FULL or MF_GROUPED).
    """
    method = FlattenMethod(method)
    if net.kind in MERGED_KINDS:
        raise TopologyError(f"Network {net.label} is already flattened")
    s = net.n_stages
    if s < 3:
        raise TopologyError(
            f"meta_flatten needs at least 3 stages (network has {s})"
        )
    middle = list(range(1, s - 1))
    if method == FlattenMethod.ALL_INTERMEDIATE:
        groups = [[0], middle, [s - 1]]
        kind = NetworkKind.MF_FULL
    else:
        if len(middle) % 2:
            raise TopologyError(
                f"grouped_pairs needs an even number of intermediate stages "
                f"(network has {len(middle)})"
            )
        groups = [[0]] + [middle[i : i + 2] for i in range(0, len(middle), 2)]
        groups.append([s - 1])
        kind = NetworkKind.MF_GROUPED
    return _merge_stage_groups(net, groups, kind)


# ------------------------------------------------------------------------------
# Paths and structure
# ------------------------------------------------------------------------------


def enumerate_paths(
    net: Network, src: int, dst: int, limit: Optional[int] = None
) -> List[Tuple[int, ...]]:
    """
    List forward paths from input terminal ``src`` to output terminal ``dst``.

    A forward path uses channels of strictly increasing dimension. Paths are
    returned as router-id sequences, de-duplicated (parallel channels give the
    same sequence) and sorted lexicographically; at most ``limit`` are kept.
    """
    if not 0 <= src < net.n_terminals or not 0 <= dst < net.n_terminals:
        raise TopologyError(
            f"Terminal pair ({src}, {dst}) out of range for N={net.n_terminals}"
        )
    if limit is not None and limit < 1:
        raise TopologyError(f"limit must be >= 1 (got {limit})")
    graph = net.channel_graph
    routes = set()
    for node_path in nx.all_simple_paths(graph, ("in", src), ("out", dst)):
        routes.add(tuple(graph.nodes[node]["router"] for node in node_path[:-1]))
    ordered = sorted(routes)
    return ordered if limit is None else ordered[:limit]


def reachability(net: Network) -> List[frozenset]:
    """For each input terminal, the set of output terminals it can reach."""
    graph = net.channel_graph
    result = []
    for i in range(net.n_terminals):
        reached = nx.descendants(graph, ("in", i))
        result.append(frozenset(node[1] for node in reached if node[0] == "out"))
    return result


def path_diversity(net: Network) -> Dict:
    """
    Per-pair forward path counts and a summary of them.

    Returns:
        {"counts": N x N list, "min": int, "max": int, "mean": float,
         "multi_path_fraction": share of pairs with two or more paths}
    """
    n = net.n_terminals
    counts = [[len(enumerate_paths(net, i, j)) for j in range(n)] for i in range(n)]
    flat = [c for row in counts for c in row]
    return {
        "counts": counts,
        "min": min(flat),
        "max": max(flat),
        "mean": sum(flat) / len(flat),
        "multi_path_fraction": sum(1 for c in flat if c >= 2) / len(flat),
    }


def degree_profile(net: Network) -> Dict[int, Counter]:
    """Per stage, how many routers have each (n_in, n_out) shape."""
    profile: Dict[int, Counter] = {}
    for r in net.routers:
        profile.setdefault(r.stage, Counter())[(r.n_in, r.n_out)] += 1
    return profile


def to_networkx(net: Network) -> nx.MultiDiGraph:
    """Router-level multigraph (one edge per channel), for drawing and comparison."""
    graph = nx.MultiDiGraph()
    for r in net.routers:
        graph.add_node(r.id, stage=r.stage, row=r.row, n_in=r.n_in, n_out=r.n_out)
    for ch in net.channels:
        graph.add_edge(
            ch.src.router_id,
            ch.dst.router_id,
            key=ch.id,
            kind=ch.kind.value,
            dimension=ch.dimension,
        )
    return graph


# ------------------------------------------------------------------------------
# Validation
# ------------------------------------------------------------------------------


@dataclass
class ValidationReport:
    """Outcome of :func:`validate_network`; ``violations`` is empty on success."""

    network: str
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, message: str) -> None:
        self.violations.append(message)


def validate_network(net: Network) -> ValidationReport:
    """
    Check the structural invariants of a network and its full-access property.

    Never raises; every failure is recorded in the returned report.
    """
    report = ValidationReport(net.label)
    n = net.n_terminals

    if len(net.input_terminals) != n or len(net.output_terminals) != n:
        report.add(
            f"terminal count mismatch: {len(net.input_terminals)} inputs, "
            f"{len(net.output_terminals)} outputs, N={n}"
        )

    for index, r in enumerate(net.routers):
        if r.id != index:
            report.add(f"router {index} carries id {r.id}")
        if r.n_in < 1 or r.n_out < 1:
            report.add(f"router {r.id} has {r.n_in} inputs and {r.n_out} outputs")

    def port_ok(ref: PortRef, side: Side, what: str) -> bool:
        if ref.side != side:
            report.add(f"{what}: expected {side.value} side, got {ref.side.value}")
            return False
        if not 0 <= ref.router_id < len(net.routers):
            report.add(f"{what}: router {ref.router_id} does not exist")
            return False
        router = net.routers[ref.router_id]
        count = router.n_in if side == Side.INPUT else router.n_out
        if not 0 <= ref.port < count:
            report.add(f"{what}: port {ref.port} out of range on router {router.id}")
            return False
        return True

    attached_in: Counter = Counter()
    attached_out: Counter = Counter()
    for ch in net.channels:
        if ch.src is None or ch.dst is None:
            report.add(f"channel {ch.id} lacks an endpoint")
            continue
        if port_ok(ch.src, Side.OUTPUT, f"channel {ch.id} source"):
            attached_out[(ch.src.router_id, ch.src.port)] += 1
        if port_ok(ch.dst, Side.INPUT, f"channel {ch.id} destination"):
            attached_in[(ch.dst.router_id, ch.dst.port)] += 1
        if ch.kind == ChannelKind.INTRA_STAGE and net.kind not in MERGED_KINDS:
            report.add(f"channel {ch.id} is intra-stage in an unflattened network")
    for i, ref in enumerate(net.input_terminals):
        if port_ok(ref, Side.INPUT, f"input terminal {i}"):
            attached_in[(ref.router_id, ref.port)] += 1
    for j, ref in enumerate(net.output_terminals):
        if port_ok(ref, Side.OUTPUT, f"output terminal {j}"):
            attached_out[(ref.router_id, ref.port)] += 1

    for r in net.routers:
        for side, count, attached in (
            ("input", r.n_in, attached_in),
            ("output", r.n_out, attached_out),
        ):
            for p in range(count):
                uses = attached[(r.id, p)]
                if uses == 0:
                    report.add(f"port unattached: router {r.id} {side} {p}")
                elif uses > 1:
                    report.add(
                        f"port attached {uses} times: router {r.id} {side} {p}"
                    )

    if net.kind in DELTA_KINDS:
        try:
            s = stages_for(n, net.radix)
        except InvalidSizeError as e:
            report.add(str(e))
        else:
            if net.n_stages != s or any(
                len(stage) != n // net.radix for stage in net.stages
            ):
                report.add(f"delta network should have {s} stages of {n // net.radix}")
            if any(
                r.n_in != net.radix or r.n_out != net.radix for r in net.routers
            ):
                report.add(f"delta routers should all be {net.radix}x{net.radix}")
    elif net.kind == NetworkKind.BENES:
        try:
            q = stages_for(n, 2)
        except InvalidSizeError as e:
            report.add(str(e))
        else:
            if net.n_stages != 2 * q - 1 or any(
                len(stage) != n // 2 for stage in net.stages
            ):
                report.add(f"Beneš network should have {2 * q - 1} stages of {n // 2}")

    if report.ok:
        for i, reached in enumerate(reachability(net)):
            missing = set(range(n)) - reached
            if missing:
                report.add(
                    f"input {i} cannot reach outputs {sorted(missing)[:8]}"
                    + (" ..." if len(missing) > 8 else "")
                )

    if report.ok:
        logger.debug(f"Validated {net.label}: N={n}, {len(net.routers)} routers")
    else:
        logger.debug(f"{net.label} failed validation: {len(report.violations)} issues")
    return report
