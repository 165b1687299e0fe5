#!/usr/bin/env python3
"""
Workload Module

Synthetic traffic generators (uniform, exponential, normal and weighted
hotspot proxies of trace-driven workloads), the plain-text trace format and
node-frequency histograms.

Injection rates are in flits per node per cycle. A synthetic message is
``msg_flits`` flits long, so a node starts a message with probability
rate / msg_flits per cycle. Every generator is driven by a single
``numpy.random.Generator`` seeded from the spec, so the same spec and horizon
always give the same record list.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from export_utils import atomic_write_text, write_csv

logger = logging.getLogger(__name__)

# Cycles generated per numpy batch. Part of the output contract: changing it
# changes the generated streams.
CHUNK_CYCLES = 4096

# Node count the hotspot presets are described for.
PRESET_NODES = 32

TRACE_HEADER = "# cycle,src,dst,n_flits"


# ------------------------------------------------------------------------------
# Errors and Types
# ------------------------------------------------------------------------------


class WorkloadError(ValueError):
    """Raised for invalid workload parameters."""


class TraceFormatError(WorkloadError):
    """Raised for malformed trace files; carries the file and line."""

    def __init__(self, message: str, path: str, line: int):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line


class WorkloadKind(Enum):
    UNIFORM = "uniform"
    EXPONENTIAL = "exponential"
    NORMAL = "normal"
    HOTSPOT = "hotspot"
    TRACE = "trace"


SYNTHETIC_KINDS = frozenset(
    {
        WorkloadKind.UNIFORM,
        WorkloadKind.EXPONENTIAL,
        WorkloadKind.NORMAL,
        WorkloadKind.HOTSPOT,
    }
)


class TraceRecord(NamedTuple):
    cycle: int
    src: int
    dst: int
    n_flits: int


# (hot sources, hot destinations) on a 32-node system
HOTSPOT_PRESETS: Dict[str, Tuple[Tuple[int, ...], Tuple[int, ...]]] = {
    "fft_proxy": ((15, 24), (0, 1, 2, 3)),
    "waternsq_proxy": ((16, 23), (16, 23)),
    "waterspatial_proxy": ((4, 12, 20, 28), (4, 12, 20, 28)),
}


def hotspot_preset(
    name: str,
    n_terminals: int = PRESET_NODES,
    factor: float = 4.0,
    hot_nodes: Optional[Sequence[int]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Source and destination weight vectors of a named hotspot preset.

    Hot nodes get weight ``factor``, every other node weight 1. Preset node
    indices are given for 32 nodes and scaled by N/32 on other sizes.
    ``hot_nodes`` (already in the target numbering) replaces both hot sets,
    which is how the waterspatial proxy is configured.
    """
    if name not in HOTSPOT_PRESETS:
        raise WorkloadError(
            f"Unknown hotspot preset '{name}'. "
            f"Valid presets: {', '.join(sorted(HOTSPOT_PRESETS))}"
        )
    if factor <= 0:
        raise WorkloadError(f"Hotspot factor must be positive (got {factor})")

    if hot_nodes is not None:
        hot_src = hot_dst = tuple(hot_nodes)
    else:
        hot_src, hot_dst = (
            tuple(sorted({node * n_terminals // PRESET_NODES for node in nodes}))
            for nodes in HOTSPOT_PRESETS[name]
        )

    weights = []
    for hot in (hot_src, hot_dst):
        for node in hot:
            if not 0 <= node < n_terminals:
                raise WorkloadError(
                    f"Hot node {node} out of range for N={n_terminals}"
                )
        w = np.ones(n_terminals)
        w[list(hot)] = factor
        weights.append(w)
    return weights[0], weights[1]


@dataclass
class WorkloadSpec:
    """
    Everything needed to reproduce a workload.

    Attributes:
        kind: generator family
        rate: offered load in flits per node per cycle (synthetic kinds)
        msg_flits: flits per synthetic message
        seed: PRNG seed
        n_terminals: number of nodes
        sigma: Gaussian spread of the normal workload (default N/8)
        preset: hotspot preset name
        hot_factor: weight of hot nodes in presets
        hot_nodes: explicit hot node list for presets
        src_weights / dst_weights: explicit hotspot weights (override preset)
        trace_path: trace file of a trace workload
    """

    kind: WorkloadKind
    rate: float = 0.0
    msg_flits: int = 2
    seed: int = 1
    n_terminals: int = 32
    sigma: Optional[float] = None
    preset: Optional[str] = None
    hot_factor: float = 4.0
    hot_nodes: Optional[List[int]] = None
    src_weights: Optional[List[float]] = None
    dst_weights: Optional[List[float]] = None
    trace_path: Optional[str] = None
    _weights: Optional[Tuple[np.ndarray, np.ndarray]] = field(
        default=None, init=False, repr=False, compare=False
    )

    def __post_init__(self):
        try:
            self.kind = WorkloadKind(self.kind)
        except ValueError:
            raise WorkloadError(
                f"Unknown workload kind '{self.kind}'. "
                f"Valid kinds: {', '.join(k.value for k in WorkloadKind)}"
            )
        if self.n_terminals < 1:
            raise WorkloadError(f"n_terminals must be >= 1 (got {self.n_terminals})")
        if self.msg_flits < 1:
            raise WorkloadError(f"msg_flits must be >= 1 (got {self.msg_flits})")
        if self.kind in SYNTHETIC_KINDS and not 0.0 <= self.rate <= 1.0:
            raise WorkloadError(
                f"Injection rate must be within [0, 1] flits/node/cycle (got {self.rate})"
            )
        if self.kind == WorkloadKind.NORMAL and self.sigma is not None and self.sigma <= 0:
            raise WorkloadError(f"Normal workload needs sigma > 0 (got {self.sigma})")
        if self.kind == WorkloadKind.HOTSPOT:
            self._weights = self._resolve_weights()
        if self.kind == WorkloadKind.TRACE and not self.trace_path:
            raise WorkloadError("Trace workload needs a trace path")

    def _resolve_weights(self) -> Tuple[np.ndarray, np.ndarray]:
        n = self.n_terminals
        if self.preset:
            src, dst = hotspot_preset(self.preset, n, self.hot_factor, self.hot_nodes)
        elif self.src_weights is None and self.dst_weights is None:
            raise WorkloadError("Hotspot workload needs a preset or explicit weights")
        else:
            src = dst = np.ones(n)
        if self.src_weights is not None:
            src = np.asarray(self.src_weights, dtype=float)
        if self.dst_weights is not None:
            dst = np.asarray(self.dst_weights, dtype=float)
        for side, w in (("source", src), ("destination", dst)):
            if w.shape != (n,):
                raise WorkloadError(
                    f"Hotspot {side} weights need {n} entries (got {w.size})"
                )
            if np.any(w <= 0):
                raise WorkloadError(f"Hotspot {side} weights must all be positive")
        return src / src.sum(), dst / dst.sum()

    @property
    def effective_sigma(self) -> float:
        return self.sigma if self.sigma is not None else self.n_terminals / 8

    @property
    def weights(self) -> Tuple[np.ndarray, np.ndarray]:
        """Normalized (source, destination) probabilities of a hotspot workload."""
        if self._weights is None:
            raise WorkloadError(f"{self.kind.value} workloads have no hotspot weights")
        return self._weights

    @property
    def name(self) -> str:
        if self.kind == WorkloadKind.HOTSPOT and self.preset:
            return self.preset
        if self.kind == WorkloadKind.TRACE:
            return f"trace:{Path(self.trace_path).stem}"
        return self.kind.value


# ------------------------------------------------------------------------------
# Generators
# ------------------------------------------------------------------------------


def _require(spec: WorkloadSpec, kind: WorkloadKind) -> None:
    if spec.kind != kind:
        raise WorkloadError(f"Expected a {kind.value} workload, got {spec.kind.value}")


def _to_records(
    cycles: np.ndarray, srcs: np.ndarray, dsts: np.ndarray, n_flits: int
) -> List[TraceRecord]:
    return [
        TraceRecord(int(c), int(s), int(d), n_flits)
        for c, s, d in zip(cycles.tolist(), srcs.tolist(), dsts.tolist())
    ]


def _bernoulli_starts(
    rng: np.random.Generator, n: int, p: float, horizon: int
):
    """Yield (cycles, sources) of message starts, chunk by chunk, cycle-sorted."""
    for start in range(0, horizon, CHUNK_CYCLES):
        span = min(CHUNK_CYCLES, horizon - start)
        cycles, srcs = np.nonzero(rng.random((span, n)) < p)
        yield cycles + start, srcs


def gen_uniform(spec: WorkloadSpec, horizon: int) -> List[TraceRecord]:
    """Bernoulli injection per node and cycle, destinations uniform over all nodes."""
    _require(spec, WorkloadKind.UNIFORM)
    if spec.rate == 0 or horizon <= 0:
        return []
    rng = np.random.default_rng(spec.seed)
    n = spec.n_terminals
    records: List[TraceRecord] = []
    for cycles, srcs in _bernoulli_starts(rng, n, spec.rate / spec.msg_flits, horizon):
        dsts = rng.integers(0, n, size=srcs.size)
        records.extend(_to_records(cycles, srcs, dsts, spec.msg_flits))
    return records


def gen_normal(spec: WorkloadSpec, horizon: int) -> List[TraceRecord]:
    """Bernoulli injection; destination = round(Normal(src, sigma)) mod N."""
    _require(spec, WorkloadKind.NORMAL)
    if spec.rate == 0 or horizon <= 0:
        return []
    rng = np.random.default_rng(spec.seed)
    n = spec.n_terminals
    sigma = spec.effective_sigma
    records: List[TraceRecord] = []
    for cycles, srcs in _bernoulli_starts(rng, n, spec.rate / spec.msg_flits, horizon):
        dsts = np.rint(rng.normal(srcs, sigma)).astype(np.int64) % n
        records.extend(_to_records(cycles, srcs, dsts, spec.msg_flits))
    return records


def gen_exponential(spec: WorkloadSpec, horizon: int) -> List[TraceRecord]:
    """
    Poisson arrivals per node: exponential gaps of mean msg_flits / rate
    cycles, floored to whole cycles. Destinations are uniform.
    """
    _require(spec, WorkloadKind.EXPONENTIAL)
    if spec.rate == 0 or horizon <= 0:
        return []
    rng = np.random.default_rng(spec.seed)
    n = spec.n_terminals
    mean_gap = spec.msg_flits / spec.rate
    batch = int(horizon / mean_gap * 1.1) + 16

    all_cycles, all_srcs = [], []
    for node in range(n):
        times = np.cumsum(rng.exponential(mean_gap, size=batch))
        while times[-1] < horizon:
            more = np.cumsum(rng.exponential(mean_gap, size=batch)) + times[-1]
            times = np.concatenate([times, more])
        cycles = np.floor(times[times < horizon]).astype(np.int64)
        all_cycles.append(cycles)
        all_srcs.append(np.full(cycles.size, node, dtype=np.int64))

    cycles = np.concatenate(all_cycles)
    srcs = np.concatenate(all_srcs)
    order = np.lexsort((srcs, cycles))
    cycles, srcs = cycles[order], srcs[order]
    dsts = rng.integers(0, n, size=srcs.size)
    return _to_records(cycles, srcs, dsts, spec.msg_flits)


def gen_hotspot(spec: WorkloadSpec, horizon: int) -> List[TraceRecord]:
    """
    Weighted hotspot traffic.

    The number of new messages per cycle is Binomial(N, rate / msg_flits), so
    the offered load matches the other synthetic kinds; sources and
    destinations are drawn from the spec's categorical weights.
    """
    _require(spec, WorkloadKind.HOTSPOT)
    if spec.rate == 0 or horizon <= 0:
        return []
    rng = np.random.default_rng(spec.seed)
    n = spec.n_terminals
    src_p, dst_p = spec.weights
    p = spec.rate / spec.msg_flits
    records: List[TraceRecord] = []
    for start in range(0, horizon, CHUNK_CYCLES):
        span = min(CHUNK_CYCLES, horizon - start)
        counts = rng.binomial(n, p, size=span)
        cycles = np.repeat(np.arange(start, start + span), counts)
        srcs = rng.choice(n, size=cycles.size, p=src_p)
        dsts = rng.choice(n, size=cycles.size, p=dst_p)
        order = np.lexsort((srcs, cycles))
        records.extend(
            _to_records(cycles[order], srcs[order], dsts[order], spec.msg_flits)
        )
    return records


def generate(spec: WorkloadSpec, horizon: int) -> List[TraceRecord]:
    """Records of any workload kind; trace workloads ignore ``horizon``."""
    generators = {
        WorkloadKind.UNIFORM: gen_uniform,
        WorkloadKind.EXPONENTIAL: gen_exponential,
        WorkloadKind.NORMAL: gen_normal,
        WorkloadKind.HOTSPOT: gen_hotspot,
    }
    if spec.kind == WorkloadKind.TRACE:
        return load_trace(spec.trace_path, spec.n_terminals)
    records = generators[spec.kind](spec, horizon)
    logger.debug(
        f"Generated {len(records)} {spec.name} messages over {horizon} cycles "
        f"(rate {spec.rate}, seed {spec.seed})"
    )
    return records


def offered_load(records: Sequence[TraceRecord], n_terminals: int, horizon: int) -> float:
    """Flits per node per cycle carried by ``records`` over ``horizon`` cycles."""
    if horizon <= 0 or n_terminals <= 0:
        return 0.0
    return sum(r.n_flits for r in records) / (n_terminals * horizon)


# ------------------------------------------------------------------------------
# Trace Files
# ------------------------------------------------------------------------------


def load_trace(path, n_terminals: Optional[int] = None) -> List[TraceRecord]:
    """
    Read a trace file: one "cycle,src,dst,n_flits" record per line, blank lines
    and lines starting with '#' ignored.

    Args:
        path: trace file
        n_terminals: when given, node indices must be below it

    Returns:
        Records sorted by cycle (input order kept among equal cycles).

    Raises:
        TraceFormatError: for undecodable or unparsable lines, negative cycles,
            empty messages or out-of-range nodes, reported as file:line.
    """
    path = str(path)
    records: List[TraceRecord] = []
    with open(path, "rb") as f:
        for lineno, raw in enumerate(f, start=1):
            try:
                line = raw.decode("utf-8").strip()
            except UnicodeDecodeError as e:
                raise TraceFormatError(f"not valid UTF-8 ({e.reason})", path, lineno) from e
            if not line or line.startswith("#"):
                continue
            fields = [part.strip() for part in line.split(",")]
            if len(fields) != 4:
                raise TraceFormatError(
                    f"expected 4 comma-separated fields, found {len(fields)}",
                    path,
                    lineno,
                )
            try:
                cycle, src, dst, n_flits = (int(value) for value in fields)
            except ValueError:
                raise TraceFormatError(f"non-integer field in '{line}'", path, lineno)
            if cycle < 0:
                raise TraceFormatError(f"negative cycle {cycle}", path, lineno)
            if n_flits < 1:
                raise TraceFormatError(f"message needs >= 1 flit (got {n_flits})", path, lineno)
            for role, node in (("source", src), ("destination", dst)):
                if node < 0 or (n_terminals is not None and node >= n_terminals):
                    raise TraceFormatError(
                        f"{role} node {node} out of range for N={n_terminals}",
                        path,
                        lineno,
                    )
            records.append(TraceRecord(cycle, src, dst, n_flits))

    if any(a.cycle > b.cycle for a, b in zip(records, records[1:])):
        logger.warning(f"Trace {path} is not sorted by cycle; sorting it")
        records.sort(key=lambda r: r.cycle)
    logger.debug(f"Loaded {len(records)} records from {path}")
    return records


def save_trace(records: Sequence[TraceRecord], path) -> None:
    """Write records in the format read by :func:`load_trace`."""
    lines = [TRACE_HEADER]
    lines.extend(f"{r.cycle},{r.src},{r.dst},{r.n_flits}" for r in records)
    atomic_write_text(path, "\n".join(lines) + "\n")


# ------------------------------------------------------------------------------
# Histograms
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class Histogram:
    """Per-node message counts as source and as destination."""

    src_counts: Tuple[int, ...]
    dst_counts: Tuple[int, ...]

    @property
    def total(self) -> int:
        return sum(self.src_counts)

    def hottest(self, side: str = "src", top: int = 1) -> List[int]:
        """Node indices with the highest counts, ties broken by lower index."""
        counts = self.src_counts if side == "src" else self.dst_counts
        return sorted(range(len(counts)), key=lambda i: (-counts[i], i))[:top]

    def rows(self) -> List[Dict[str, int]]:
        return [
            {"node": i, "src_count": s, "dst_count": d}
            for i, (s, d) in enumerate(zip(self.src_counts, self.dst_counts))
        ]


def histogram(records: Sequence[TraceRecord], n_terminals: int) -> Histogram:
    srcs = np.fromiter((r.src for r in records), dtype=np.int64, count=len(records))
    dsts = np.fromiter((r.dst for r in records), dtype=np.int64, count=len(records))
    return Histogram(
        tuple(int(c) for c in np.bincount(srcs, minlength=n_terminals)),
        tuple(int(c) for c in np.bincount(dsts, minlength=n_terminals)),
    )


def save_histogram(hist: Histogram, path) -> None:
    """CSV with columns node,src_count,dst_count."""
    write_csv(path, ["node", "src_count", "dst_count"], hist.rows())
