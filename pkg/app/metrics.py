#!/usr/bin/env python3
"""
Metrics Module

Turns simulation message logs into comparison quantities (latency,
throughput, blocking, hop counts), computes the static power/cost proxy of a
topology and renders comparison tables.

Units: latency in cycles, rates and throughput in flits per terminal per
cycle.
"""

import logging
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from export_utils import csv_text
from format_utils import DEFAULT_LOCALE, format_number, format_ratio, render_table
from topology import ChannelKind, Network

logger = logging.getLogger(__name__)


class MetricsError(ValueError):
    """Raised for invalid aggregation windows or proxy weights."""


# ------------------------------------------------------------------------------
# Simulation Statistics
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class SimStats:
    """
    Aggregated results of one simulation window.

    A message counts when its tail leaves the network inside the window.
    ``accepted_rate`` is the load the network took in (heads injected in the
    window), ``throughput`` the load it delivered. ``empty`` marks windows in
    which no message completed; every mean is then 0.
    """

    n_messages: int
    avg_latency: float
    max_latency: int
    latency_histogram: Tuple[Tuple[int, int], ...]
    throughput: float
    offered_rate: float
    accepted_rate: float
    blocking_rate: float
    avg_hops: float
    avg_stages: float
    avg_intra_hops: float
    window_start: int
    window_end: int
    empty: bool = False

    @property
    def window(self) -> int:
        return self.window_end - self.window_start

    def to_row(self) -> Dict[str, object]:
        """Scalar fields for CSV tables, rounded so reruns compare byte for byte."""
        row = asdict(self)
        row.pop("latency_histogram")
        for key, value in row.items():
            if isinstance(value, float):
                row[key] = round(value, 6)
        return row


STATS_FIELDS = [
    "n_messages",
    "avg_latency",
    "max_latency",
    "throughput",
    "offered_rate",
    "accepted_rate",
    "blocking_rate",
    "avg_hops",
    "avg_stages",
    "avg_intra_hops",
    "window_start",
    "window_end",
    "empty",
]


def aggregate(
    messages: Sequence,
    window: Tuple[int, int],
    n_terminals: int,
    attempts: int = 0,
    denials: int = 0,
) -> SimStats:
    """
    Aggregate a message log over ``window`` = (first cycle, end cycle).

    Args:
        messages: objects with src/dst/n_flits/t_gen/t_inject/t_eject and
            hops/stages/intra_hops (simengine.Message)
        window: measurement cycles [start, end)
        n_terminals: terminal count used to normalize rates
        attempts / denials: allocation attempts and refusals in the window

    Returns:
        SimStats; ``empty`` is set when no message finished in the window.
    """
    start, end = window
    length = end - start
    if length <= 0:
        raise MetricsError(f"Empty measurement window {window}")
    if n_terminals <= 0:
        raise MetricsError(f"n_terminals must be positive (got {n_terminals})")
    capacity = length * n_terminals

    offered = sum(m.n_flits for m in messages if start <= m.t_gen < end)
    accepted = sum(
        m.n_flits
        for m in messages
        if m.t_inject is not None and start <= m.t_inject < end
    )
    # t_eject is the cycle after the tail left
    done = [
        m for m in messages if m.t_eject is not None and start < m.t_eject <= end
    ]
    blocking = denials / attempts if attempts else 0.0

    if not done:
        return SimStats(
            n_messages=0,
            avg_latency=0.0,
            max_latency=0,
            latency_histogram=(),
            throughput=0.0,
            offered_rate=offered / capacity,
            accepted_rate=accepted / capacity,
            blocking_rate=blocking,
            avg_hops=0.0,
            avg_stages=0.0,
            avg_intra_hops=0.0,
            window_start=start,
            window_end=end,
            empty=True,
        )

    latencies = [m.t_eject - m.t_gen for m in done]
    count = len(done)
    return SimStats(
        n_messages=count,
        avg_latency=sum(latencies) / count,
        max_latency=max(latencies),
        latency_histogram=tuple(sorted(Counter(latencies).items())),
        throughput=sum(m.n_flits for m in done) / capacity,
        offered_rate=offered / capacity,
        accepted_rate=accepted / capacity,
        blocking_rate=blocking,
        avg_hops=sum(m.hops for m in done) / count,
        avg_stages=sum(m.stages for m in done) / count,
        avg_intra_hops=sum(m.intra_hops for m in done) / count,
        window_start=start,
        window_end=end,
    )


def saturation_throughput(curve: Sequence[Tuple[float, float]]) -> float:
    """Highest delivered throughput along a (rate, throughput) sweep curve."""
    return max((throughput for _, throughput in curve), default=0.0)


# ------------------------------------------------------------------------------
# Power / Cost Proxy
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class ProxyWeights:
    """proxy_score = ports*total_ports + crosspoints*crosspoints + channels*channel_count"""

    ports: float = 1.0
    crosspoints: float = 0.0
    channels: float = 0.0

    def __post_init__(self):
        values = (self.ports, self.crosspoints, self.channels)
        if any(w < 0 for w in values) or not any(values):
            raise MetricsError(
                f"Proxy weights must be non-negative and not all zero (got {values})"
            )


@dataclass(frozen=True)
class PowerProxyReport:
    network: str
    n_terminals: int
    n_stages: int
    router_count: int
    total_ports: int
    crosspoints: int
    channel_count: int
    intra_channel_count: int
    proxy_score: float

    def to_row(self) -> Dict[str, object]:
        return asdict(self)


PROXY_FIELDS = [
    "network",
    "n_terminals",
    "n_stages",
    "router_count",
    "total_ports",
    "crosspoints",
    "channel_count",
    "intra_channel_count",
    "proxy_score",
]


def power_proxy(net: Network, weights: Optional[ProxyWeights] = None) -> PowerProxyReport:
    """
    Static power/cost proxy of a topology.

    Counts routers, router ports, crosspoints (sum of n_in*n_out) and
    router-to-router channels, and combines them with ``weights`` (by default
    the port count alone).
    """
    weights = weights or ProxyWeights()
    total_ports = sum(r.n_in + r.n_out for r in net.routers)
    crosspoints = sum(r.n_in * r.n_out for r in net.routers)
    channels = len(net.channels)
    intra = sum(1 for ch in net.channels if ch.kind == ChannelKind.INTRA_STAGE)
    score = (
        weights.ports * total_ports
        + weights.crosspoints * crosspoints
        + weights.channels * channels
    )
    return PowerProxyReport(
        network=net.label,
        n_terminals=net.n_terminals,
        n_stages=net.n_stages,
        router_count=len(net.routers),
        total_ports=total_ports,
        crosspoints=crosspoints,
        channel_count=channels,
        intra_channel_count=intra,
        proxy_score=float(score),
    )


def proxy_table(reports: Sequence[PowerProxyReport]) -> List[PowerProxyReport]:
    """Reports ordered by descending proxy score, then network name."""
    return sorted(reports, key=lambda r: (-r.proxy_score, r.network))


# ------------------------------------------------------------------------------
# Comparison
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class RunSummary:
    """One simulated point of an experiment."""

    network: str
    workload: str
    rate: float
    seed: int
    stats: SimStats
    n_terminals: int
    buffer_depth: int
    parent: Optional[str] = None

    def to_row(self) -> Dict[str, object]:
        row = {
            "network": self.network,
            "workload": self.workload,
            "rate": self.rate,
            "seed": self.seed,
        }
        row.update(self.stats.to_row())
        return row


COMPARISON_FIELDS = ["network", "workload", "rate", "seed"] + STATS_FIELDS

TEXT_COLUMNS = (
    ("network", "network"),
    ("workload", "workload"),
    ("rate", "rate"),
    ("avg_latency", "latency"),
    ("throughput", "throughput"),
    ("accepted_rate", "accepted"),
    ("blocking_rate", "blocking"),
    ("avg_hops", "hops"),
    ("avg_stages", "stages"),
    ("n_messages", "messages"),
)


@dataclass
class ComparisonTable:
    rows: List[RunSummary]
    flags: List[str] = field(default_factory=list)

    def to_csv(self) -> str:
        return csv_text(COMPARISON_FIELDS, (r.to_row() for r in self.rows))

    def to_text(self, locale: str = DEFAULT_LOCALE) -> str:
        body = []
        for summary in self.rows:
            row = summary.to_row()
            cells = []
            for key, _ in TEXT_COLUMNS:
                value = row[key]
                if isinstance(value, str):
                    cells.append(value)
                elif key == "blocking_rate":
                    cells.append(format_ratio(value, locale))
                else:
                    cells.append(format_number(value, locale))
            body.append(cells)
        text = render_table([title for _, title in TEXT_COLUMNS], body)
        if self.flags:
            text += "".join(f"! {flag}\n" for flag in self.flags)
        return text


def compare(summaries: Sequence[RunSummary]) -> ComparisonTable:
    """
    Tabulate runs, one row per (network, workload, rate, seed), sorted.

    Runs whose terminal count, buffer depth or window length differ from the
    first run are flagged; they are still listed.
    """
    if not summaries:
        raise MetricsError("compare needs at least one run")
    rows = sorted(summaries, key=lambda s: (s.network, s.workload, s.rate, s.seed))
    table = ComparisonTable(rows)
    ref = rows[0]
    for s in rows[1:]:
        for attr, mine, theirs in (
            ("N", s.n_terminals, ref.n_terminals),
            ("buffer depth", s.buffer_depth, ref.buffer_depth),
            ("window", s.stats.window, ref.stats.window),
        ):
            if mine != theirs:
                table.flags.append(
                    f"{s.network}/{s.workload}@{s.rate}: {attr} {mine} differs from {theirs}"
                )
    for flag in table.flags:
        logger.warning(f"Mismatched comparison: {flag}")
    return table


IMPROVEMENT_FIELDS = [
    "network",
    "parent",
    "workload",
    "rate",
    "throughput",
    "parent_throughput",
    "throughput_gain",
    "latency",
    "parent_latency",
    "latency_change",
]


def improvement_report(summaries: Sequence[RunSummary]) -> List[Dict[str, object]]:
    """
    Relative throughput and latency of each meta-flattened network against its
    parent network, per workload and rate, averaged over seeds.
    """
    grouped: Dict[Tuple[str, str, float], List[SimStats]] = {}
    parents: Dict[str, str] = {}
    for s in summaries:
        grouped.setdefault((s.network, s.workload, s.rate), []).append(s.stats)
        if s.parent and s.network.startswith("mf_"):
            parents[s.network] = s.parent

    def mean(stats: List[SimStats], attr: str) -> float:
        return sum(getattr(st, attr) for st in stats) / len(stats)

    rows = []
    for (network, workload, rate), stats in sorted(grouped.items()):
        parent = parents.get(network)
        base = grouped.get((parent, workload, rate)) if parent else None
        if not base:
            continue
        thr, base_thr = mean(stats, "throughput"), mean(base, "throughput")
        lat, base_lat = mean(stats, "avg_latency"), mean(base, "avg_latency")
        rows.append(
            {
                "network": network,
                "parent": parent,
                "workload": workload,
                "rate": rate,
                "throughput": round(thr, 6),
                "parent_throughput": round(base_thr, 6),
                "throughput_gain": round(thr / base_thr - 1, 6) if base_thr else "",
                "latency": round(lat, 6),
                "parent_latency": round(base_lat, 6),
                "latency_change": round(lat / base_lat - 1, 6) if base_lat else "",
            }
        )
    return rows


def markdown_report(
    table: ComparisonTable,
    proxies: Sequence[PowerProxyReport],
    improvements: Sequence[Dict[str, object]],
    locale: str = DEFAULT_LOCALE,
) -> str:
    """Markdown summary used for the job output of the GitHub Action."""
    lines = ["## MinWeave report", ""]
    if proxies:
        lines += [
            "### Power proxy",
            "",
            "| Network | Routers | Ports | Crosspoints | Channels | Score |",
            "|---|---|---|---|---|---|",
        ]
        for r in proxy_table(proxies):
            lines.append(
                f"| {r.network} | {r.router_count} | {r.total_ports} | "
                f"{r.crosspoints} | {r.channel_count} | "
                f"{format_number(r.proxy_score, locale, 1)} |"
            )
        lines.append("")
    if improvements:
        lines += [
            "### Meta-flattened vs parent",
            "",
            "| Network | Parent | Workload | Rate | Throughput gain | Latency change |",
            "|---|---|---|---|---|---|",
        ]
        for row in improvements:
            gain = row["throughput_gain"]
            change = row["latency_change"]
            lines.append(
                f"| {row['network']} | {row['parent']} | {row['workload']} | "
                f"{row['rate']} | {format_ratio(gain, locale) if gain != '' else '-'} | "
                f"{format_ratio(change, locale) if change != '' else '-'} |"
            )
        lines.append("")
    lines += ["### Runs", "", "```", table.to_text(locale).rstrip("\n"), "```", ""]
    return "\n".join(lines)
