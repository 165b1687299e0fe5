#!/usr/bin/env python3
"""
Simulation Engine

Deterministic, cycle-level wormhole-switching simulation of a Network under a
workload.

Model:
  - every router input port has a FIFO of ``buffer_depth`` flits; terminals
    feed the first-stage input ports through one injection link each and
    unbounded source queues
  - one hop (router plus link) per cycle, one flit per channel per cycle
  - a head flit reserves an output port; body flits follow it and the tail
    releases the reservation as it leaves
  - a flit that arrives in cycle c can be allocated or moved from cycle c+1

Each cycle runs four phases: injection, allocation, traversal, ejection.
Allocation and traversal decide from the state at the start of their phase,
so the order in which ports are visited never changes the outcome.
"""

import dataclasses
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, List, NamedTuple, Optional, Sequence, Tuple

from metrics import SimStats, aggregate
from routing import RoutingTable, check_deadlock_freedom, precompute_tables
from topology import TERMINAL_DIMENSION, ChannelKind, Network
from workload import TraceRecord, WorkloadKind, WorkloadSpec, generate

logger = logging.getLogger(__name__)


# ------------------------------------------------------------------------------
# Errors and Configuration
# ------------------------------------------------------------------------------


class SimulationError(RuntimeError):
    """Raised when a simulation cannot be set up or cannot make progress."""


class InvariantViolation(SimulationError):
    """Raised by the opt-in per-cycle checks when a wormhole rule is broken."""


class SimConfigError(ValueError):
    """Raised for invalid simulation parameters."""


class DrainPolicy(Enum):
    CYCLE_BUDGET = "cycle_budget"
    FULL_DRAIN = "full_drain"


class SelectionPolicy(Enum):
    """How a head flit picks among its free candidate output ports."""

    LEAST_OCCUPIED = "least_occupied"
    LOWEST_INDEX = "lowest_index"


@dataclass
class SimConfig:
    """
    Simulation parameters.

    ``seed``, when set, replaces the workload's seed. ``records`` supplies an
    explicit message stream and bypasses workload generation. ``drain``
    defaults to FULL_DRAIN for trace workloads and CYCLE_BUDGET otherwise.
    """

    network: Network
    workload: WorkloadSpec
    buffer_depth: int = 2
    warmup_cycles: int = 10000
    measure_cycles: int = 50000
    drain: Optional[DrainPolicy] = None
    seed: Optional[int] = None
    selection: SelectionPolicy = SelectionPolicy.LEAST_OCCUPIED
    check_invariants: bool = False
    max_drain_cycles: int = 1_000_000
    records: Optional[List[TraceRecord]] = field(default=None, repr=False)

    def __post_init__(self):
        if self.buffer_depth < 1:
            raise SimConfigError(f"buffer_depth must be >= 1 (got {self.buffer_depth})")
        if self.measure_cycles <= 0:
            raise SimConfigError(f"measure_cycles must be > 0 (got {self.measure_cycles})")
        if self.warmup_cycles < 0:
            raise SimConfigError(f"warmup_cycles must be >= 0 (got {self.warmup_cycles})")
        if self.max_drain_cycles < 0:
            raise SimConfigError("max_drain_cycles must be >= 0")
        if self.workload.n_terminals != self.network.n_terminals:
            raise SimConfigError(
                f"Workload is for {self.workload.n_terminals} nodes but "
                f"{self.network.label} has {self.network.n_terminals} terminals"
            )
        try:
            self.selection = SelectionPolicy(self.selection)
            if self.drain is None:
                self.drain = (
                    DrainPolicy.FULL_DRAIN
                    if self.workload.kind == WorkloadKind.TRACE
                    else DrainPolicy.CYCLE_BUDGET
                )
            self.drain = DrainPolicy(self.drain)
        except ValueError as e:
            raise SimConfigError(str(e))
        if self.seed is not None and self.seed != self.workload.seed:
            self.workload = dataclasses.replace(self.workload, seed=self.seed)

    @property
    def horizon(self) -> int:
        return self.warmup_cycles + self.measure_cycles


# ------------------------------------------------------------------------------
# Messages and Flits
# ------------------------------------------------------------------------------


class FlitKind(Enum):
    HEAD = "head"
    BODY = "body"
    TAIL = "tail"
    HEAD_TAIL = "head_tail"


class Flit(NamedTuple):
    msg_id: int
    kind: FlitKind
    seq: int
    arrived: int

    @property
    def is_head(self) -> bool:
        return self.kind in (FlitKind.HEAD, FlitKind.HEAD_TAIL)

    @property
    def is_tail(self) -> bool:
        return self.kind in (FlitKind.TAIL, FlitKind.HEAD_TAIL)


def flit_kind(seq: int, n_flits: int) -> FlitKind:
    if n_flits == 1:
        return FlitKind.HEAD_TAIL
    if seq == 0:
        return FlitKind.HEAD
    return FlitKind.TAIL if seq == n_flits - 1 else FlitKind.BODY


@dataclass
class Message:
    """
    One message and its timestamps.

    ``t_inject`` is the cycle its head entered the network, ``t_eject`` the
    cycle after its tail left it, so ``t_eject - t_gen`` is the latency.
    ``path`` lists the routers traversed; ``stages`` counts distinct stages.
    """

    id: int
    src: int
    dst: int
    n_flits: int
    t_gen: int
    t_inject: Optional[int] = None
    t_eject: Optional[int] = None
    path: List[int] = field(default_factory=list)
    intra_hops: int = 0
    ejected_flits: int = 0
    last_out: Optional[int] = field(default=None, repr=False)

    @property
    def hops(self) -> int:
        return len(self.path)

    @property
    def stages(self) -> int:
        return len(self.path) - self.intra_hops

    @property
    def latency(self) -> Optional[int]:
        return None if self.t_eject is None else self.t_eject - self.t_gen

    @property
    def delivered(self) -> bool:
        return self.t_eject is not None

    def log_row(self) -> Dict[str, object]:
        return {
            "msg_id": self.id,
            "src": self.src,
            "dst": self.dst,
            "t_gen": self.t_gen,
            "t_inject": "" if self.t_inject is None else self.t_inject,
            "t_eject": "" if self.t_eject is None else self.t_eject,
            "hops": self.hops,
        }


MESSAGE_LOG_FIELDS = ["msg_id", "src", "dst", "t_gen", "t_inject", "t_eject", "hops"]


# ------------------------------------------------------------------------------
# State
# ------------------------------------------------------------------------------


@dataclass
class SimCounters:
    injected_flits: int = 0
    ejected_flits: int = 0
    generated_messages: int = 0
    delivered_messages: int = 0
    max_occupancy: int = 0
    # measurement-window only
    attempts: int = 0
    denials: int = 0

    def in_flight(self) -> int:
        return self.injected_flits - self.ejected_flits


@dataclass
class SimState:
    """
    Mutable simulation state, indexed by global port ids.

    ``route[in_port]`` is the output port granted to the message at the front
    of that input FIFO; ``reserved[out_port]`` is the id of the message holding
    that output.
    """

    buffers: List[Deque[Flit]]
    route: List[Optional[int]]
    reserved: List[Optional[int]]
    rr_pointer: List[int]
    sources: List[Deque[int]]
    injecting: List[Optional[Tuple[int, int]]]
    cycle: int = 0
    next_record: int = 0

    def in_flight_flits(self) -> int:
        return sum(len(buf) for buf in self.buffers)


@dataclass
class SimResult:
    stats: SimStats
    messages: List[Message]
    counters: SimCounters
    window: Tuple[int, int]

    def message_log(self) -> List[Dict[str, object]]:
        return [m.log_row() for m in self.messages]


# ------------------------------------------------------------------------------
# Simulator
# ------------------------------------------------------------------------------


class Simulator:
    """Runs one SimConfig; call :meth:`step` per cycle or :meth:`run` once."""

    def __init__(self, config: SimConfig, table: Optional[RoutingTable] = None):
        self.config = config
        net = self.net = config.network
        if not check_deadlock_freedom(net):
            raise SimulationError(
                f"{net.label}: routing has a cyclic channel dependence graph"
            )
        self.table = table or precompute_tables(net)
        self.depth = config.buffer_depth
        self._check = config.check_invariants

        self.in_base, self.out_base = [], []
        n_in = n_out = 0
        for r in net.routers:
            self.in_base.append(n_in)
            self.out_base.append(n_out)
            n_in += r.n_in
            n_out += r.n_out

        self.in_router = [0] * n_in
        self.in_dim = [TERMINAL_DIMENSION] * n_in
        for r in net.routers:
            for q, ch in enumerate(net.in_channels[r.id]):
                g = self.in_base[r.id] + q
                self.in_router[g] = r.id
                if ch is not None:
                    self.in_dim[g] = ch.dimension

        # output port -> downstream input port, or -1 for an ejection port
        self.out_router = [0] * n_out
        self.out_next = [-1] * n_out
        self.out_terminal = [-1] * n_out
        self.out_intra = [False] * n_out
        for r in net.routers:
            for p, ch in enumerate(net.out_channels[r.id]):
                go = self.out_base[r.id] + p
                self.out_router[go] = r.id
                if ch is None:
                    self.out_terminal[go] = net.output_terminal_at[(r.id, p)]
                else:
                    self.out_next[go] = self.in_base[ch.dst.router_id] + ch.dst.port
                    self.out_intra[go] = ch.kind == ChannelKind.INTRA_STAGE

        self.terminal_port = [
            self.in_base[ref.router_id] + ref.port for ref in net.input_terminals
        ]

        self.state = SimState(
            buffers=[deque() for _ in range(n_in)],
            route=[None] * n_in,
            reserved=[None] * n_out,
            rr_pointer=[0] * n_out,
            sources=[deque() for _ in range(net.n_terminals)],
            injecting=[None] * net.n_terminals,
        )
        self.counters = SimCounters()
        self.messages: List[Message] = []
        if config.records is not None:
            self.records: Sequence[TraceRecord] = config.records
        else:
            self.records = generate(config.workload, config.horizon)
        logger.debug(
            f"Simulator for {net.label}: {n_in} input ports, {n_out} output ports, "
            f"{len(self.records)} messages scheduled"
        )

    # --------------------------------------------------------------------------

    def _measuring(self, cycle: int) -> bool:
        if cycle < self.config.warmup_cycles:
            return False
        return self.config.drain == DrainPolicy.FULL_DRAIN or cycle < self.config.horizon

    def _admit(self, cycle: int) -> None:
        state = self.state
        records = self.records
        while state.next_record < len(records) and records[state.next_record].cycle <= cycle:
            rec = records[state.next_record]
            msg = Message(len(self.messages), rec.src, rec.dst, rec.n_flits, rec.cycle)
            self.messages.append(msg)
            state.sources[rec.src].append(msg.id)
            state.next_record += 1
            self.counters.generated_messages += 1

    def _inject(self, cycle: int) -> None:
        state = self.state
        for terminal, port in enumerate(self.terminal_port):
            current = state.injecting[terminal]
            if current is None:
                if not state.sources[terminal]:
                    continue
                current = (state.sources[terminal].popleft(), 0)
            msg_id, seq = current
            buf = state.buffers[port]
            if len(buf) >= self.depth:
                state.injecting[terminal] = current
                continue
            msg = self.messages[msg_id]
            buf.append(Flit(msg_id, flit_kind(seq, msg.n_flits), seq, cycle))
            if seq == 0:
                msg.t_inject = cycle
            self.counters.injected_flits += 1
            seq += 1
            state.injecting[terminal] = None if seq == msg.n_flits else (msg_id, seq)

    def _allocate(self, cycle: int) -> None:
        state = self.state
        buffers, reserved = state.buffers, state.reserved
        least_occupied = self.config.selection == SelectionPolicy.LEAST_OCCUPIED
        measuring = self._measuring(cycle)
        requests: Dict[int, List[int]] = {}

        for g, buf in enumerate(buffers):
            if not buf or state.route[g] is not None:
                continue
            flit = buf[0]
            if flit.arrived >= cycle:
                continue
            if not flit.is_head:
                raise InvariantViolation(
                    f"cycle {cycle}: {flit.kind.value} flit of message {flit.msg_id} "
                    f"at input port {g} has no route"
                )
            router = self.in_router[g]
            dst = self.messages[flit.msg_id].dst
            candidates = self.table.lookup(router, dst, self.in_dim[g])
            if not candidates:
                raise SimulationError(
                    f"cycle {cycle}: no route from router {router} to terminal {dst}"
                )
            if measuring:
                self.counters.attempts += 1

            best, best_key = None, None
            for p in candidates:
                go = self.out_base[router] + p
                if reserved[go] is not None:
                    continue
                nxt = self.out_next[go]
                occupancy = 0 if nxt < 0 else len(buffers[nxt])
                if occupancy >= self.depth:
                    continue
                key = (occupancy, p) if least_occupied else (p,)
                if best_key is None or key < best_key:
                    best, best_key = go, key
            if best is None:
                if measuring:
                    self.counters.denials += 1
                continue
            requests.setdefault(best, []).append(g)

        for go, contenders in requests.items():
            router = self.out_router[go]
            base = self.in_base[router]
            width = self.net.routers[router].n_in
            pointer = state.rr_pointer[go]
            winner = min(contenders, key=lambda g: (g - base - pointer) % width)
            state.route[winner] = go
            reserved[go] = buffers[winner][0].msg_id
            state.rr_pointer[go] = (winner - base + 1) % width
            if measuring:
                self.counters.denials += len(contenders) - 1

    def _traverse(self, cycle: int) -> List[Tuple[Flit, int]]:
        """Move flits one hop; return the flits that left through ejection ports."""
        state = self.state
        buffers = state.buffers
        moves = []
        for g, go in enumerate(state.route):
            if go is None:
                continue
            buf = buffers[g]
            if not buf or buf[0].arrived >= cycle:
                continue
            nxt = self.out_next[go]
            if nxt >= 0 and len(buffers[nxt]) >= self.depth:
                continue
            moves.append((g, go, nxt))

        if self._check:
            used = [go for _, go, _ in moves]
            if len(used) != len(set(used)):
                raise InvariantViolation(f"cycle {cycle}: output port used twice")

        ejected = []
        for g, go, nxt in moves:
            flit = buffers[g].popleft()
            if self._check and state.reserved[go] != flit.msg_id:
                raise InvariantViolation(
                    f"cycle {cycle}: flit {flit.seq} of message {flit.msg_id} left "
                    f"through output {go} reserved by {state.reserved[go]}"
                )
            if flit.is_head:
                msg = self.messages[flit.msg_id]
                router = self.in_router[g]
                if self._check and msg.path:
                    if msg.last_out is None or self.out_next[msg.last_out] != g:
                        raise InvariantViolation(
                            f"cycle {cycle}: message {msg.id} path broken at router {router}"
                        )
                msg.path.append(router)
                msg.last_out = go
                if self.out_intra[go]:
                    msg.intra_hops += 1
            if nxt >= 0:
                buffers[nxt].append(flit._replace(arrived=cycle))
            else:
                ejected.append((flit, self.out_terminal[go]))
            if flit.is_tail:
                state.route[g] = None
                state.reserved[go] = None
        return ejected

    def _eject(self, cycle: int, ejected: List[Tuple[Flit, int]]) -> None:
        for flit, terminal in ejected:
            msg = self.messages[flit.msg_id]
            if self._check:
                if terminal != msg.dst:
                    raise InvariantViolation(
                        f"cycle {cycle}: message {msg.id} for {msg.dst} ejected at {terminal}"
                    )
                if flit.seq != msg.ejected_flits:
                    raise InvariantViolation(
                        f"cycle {cycle}: message {msg.id} flit {flit.seq} out of order"
                    )
            msg.ejected_flits += 1
            self.counters.ejected_flits += 1
            if flit.is_tail:
                msg.t_eject = cycle + 1
                self.counters.delivered_messages += 1

    def _check_state(self, cycle: int) -> None:
        state = self.state
        occupancy = 0
        for g, buf in enumerate(state.buffers):
            if len(buf) > self.depth:
                raise InvariantViolation(
                    f"cycle {cycle}: input port {g} holds {len(buf)} flits (> {self.depth})"
                )
            occupancy += len(buf)
        if self.counters.injected_flits != self.counters.ejected_flits + occupancy:
            raise InvariantViolation(
                f"cycle {cycle}: flit conservation broken "
                f"(injected {self.counters.injected_flits}, ejected "
                f"{self.counters.ejected_flits}, in flight {occupancy})"
            )
        self.counters.max_occupancy = max(self.counters.max_occupancy, occupancy)

    def step(self) -> None:
        """Advance the simulation by one cycle."""
        cycle = self.state.cycle
        self._admit(cycle)
        self._inject(cycle)
        self._allocate(cycle)
        self._eject(cycle, self._traverse(cycle))
        if self._check:
            self._check_state(cycle)
        self.state.cycle = cycle + 1

    def idle(self) -> bool:
        state = self.state
        return (
            state.next_record >= len(self.records)
            and not any(state.sources)
            and all(current is None for current in state.injecting)
            and self.counters.injected_flits == self.counters.ejected_flits
        )

    def run(self) -> SimResult:
        config = self.config
        end = config.horizon
        while self.state.cycle < end:
            self.step()

        if config.drain == DrainPolicy.FULL_DRAIN:
            cap = end + config.max_drain_cycles
            while not self.idle() and self.state.cycle < cap:
                self.step()
            if not self.idle():
                logger.warning(
                    f"{self.net.label}: drain cap of {config.max_drain_cycles} cycles "
                    f"reached with {self.counters.in_flight()} flits in flight"
                )
            end = max(end, self.state.cycle)

        window = (config.warmup_cycles, end)
        stats = aggregate(
            self.messages,
            window,
            self.net.n_terminals,
            attempts=self.counters.attempts,
            denials=self.counters.denials,
        )
        logger.debug(
            f"{self.net.label}/{config.workload.name} rate {config.workload.rate}: "
            f"{self.counters.delivered_messages}/{self.counters.generated_messages} "
            f"messages delivered in {self.state.cycle} cycles"
        )
        return SimResult(stats, self.messages, self.counters, window)


def run(config: SimConfig) -> SimResult:
    """Simulate ``config`` from an empty network and return stats and the message log."""
    return Simulator(config).run()
