#!/usr/bin/env python3
"""
MinWeave

Builds multistage interconnection networks and their meta-flattened variants,
simulates them under synthetic and trace workloads, and writes comparison
tables (latency, throughput, power proxy).

Commands:
  build       build, validate and export one topology (JSON, DOT, GraphML)
  sim         run each configured network and workload once
  sweep       run every network x workload x rate x seed and write curves
  compare     sweep, then add the power-proxy table and a text/markdown report
  histogram   write node-frequency histograms of the configured workloads

Exit codes: 0 ok, 1 usage, 2 configuration/parameter/trace error, 3 runtime error.
"""

import argparse
import json
import logging
import os
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from export_utils import atomic_write_text, export_network, write_csv
from metrics import (
    COMPARISON_FIELDS,
    IMPROVEMENT_FIELDS,
    PROXY_FIELDS,
    MetricsError,
    ProxyWeights,
    RunSummary,
    compare,
    improvement_report,
    markdown_report,
    power_proxy,
    proxy_table,
    saturation_throughput,
)
from plot_utils import plot_curves, plot_histogram
from simengine import MESSAGE_LOG_FIELDS, SimConfig, Simulator, SimulationError
from topology import (
    BUILDERS,
    DELTA_KINDS,
    ClosParams,
    FlattenMethod,
    Network,
    NetworkKind,
    TopologyError,
    build_benes,
    build_clos,
    default_clos_params,
    full_flatten,
    meta_flatten,
    validate_network,
)
from trace_utils import discover_traces
from workload import (
    WorkloadError,
    WorkloadSpec,
    generate,
    histogram,
    save_histogram,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SEED_ENV = "MINWEAVE_SEED"
BUILD_OUT_DIR = "topologies"
DEFAULT_RATES = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]


# ------------------------------------------------------------------------------
# Logging
# ------------------------------------------------------------------------------


def configure_logging(trace: bool) -> None:
    """Configure the root logger once for every module."""
    log_level = logging.DEBUG if trace else logging.INFO
    formatter = logging.Formatter("%(asctime)s [%(levelname)s] %(message)s")

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    if not root_logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(formatter)
        root_logger.addHandler(handler)
    else:
        for existing_handler in root_logger.handlers:
            existing_handler.setFormatter(formatter)

    logger.setLevel(log_level)


# ------------------------------------------------------------------------------
# Network Recipes
# ------------------------------------------------------------------------------


class ConfigError(ValueError):
    """Invalid experiment configuration, reported as file:line when known."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if path:
            location = f"{path}:{line}: " if line else f"{path}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


BASE_KINDS = {
    "omega": NetworkKind.OMEGA,
    "butterfly": NetworkKind.BUTTERFLY,
    "baseline": NetworkKind.BASELINE,
    "generalized_cube": NetworkKind.GENERALIZED_CUBE,
    "gcube": NetworkKind.GENERALIZED_CUBE,
    "cube": NetworkKind.GENERALIZED_CUBE,
    "benes": NetworkKind.BENES,
    "clos": NetworkKind.CLOS,
}

METHOD_ALIASES = {
    "all": FlattenMethod.ALL_INTERMEDIATE,
    "all_intermediate": FlattenMethod.ALL_INTERMEDIATE,
    "pairs": FlattenMethod.GROUPED_PAIRS,
    "grouped_pairs": FlattenMethod.GROUPED_PAIRS,
}


@dataclass(frozen=True)
class NetworkRecipe:
    """
    How to build one network of an experiment.

    ``transform`` is "", "flattened" or "mf"; ``clos`` holds explicit (n, m, r).
    """

    base: NetworkKind
    transform: str = ""
    radix: int = 2
    method: FlattenMethod = FlattenMethod.ALL_INTERMEDIATE
    clos: Optional[Tuple[int, int, int]] = None


def parse_recipe(
    kind: str,
    radix: int = 2,
    method: Optional[str] = None,
    clos: Optional[Sequence[int]] = None,
) -> NetworkRecipe:
    """
    Parse a network name such as 'omega', 'mf-butterfly' or
    'flattened_baseline' (hyphens and underscores are interchangeable).
    """
    name = str(kind).strip().lower().replace("-", "_")
    transform = ""
    for prefix in ("flattened_", "mf_"):
        if name.startswith(prefix):
            transform = prefix.rstrip("_")
            name = name[len(prefix):]
    if name not in BASE_KINDS:
        raise ConfigError(
            f"Unknown network kind '{kind}'. Valid kinds: {', '.join(sorted(BASE_KINDS))}, "
            f"optionally prefixed with 'mf-' or 'flattened-'"
        )
    base = BASE_KINDS[name]
    if transform == "flattened" and base not in DELTA_KINDS:
        raise ConfigError(f"Only delta networks can be fully flattened (got '{kind}')")

    chosen = FlattenMethod.ALL_INTERMEDIATE
    if method is not None:
        key = str(method).strip().lower().replace("-", "_")
        if key not in METHOD_ALIASES:
            raise ConfigError(
                f"Unknown flatten method '{method}'. Valid methods: {', '.join(sorted(METHOD_ALIASES))}"
            )
        chosen = METHOD_ALIASES[key]

    if clos is not None:
        if base != NetworkKind.CLOS:
            raise ConfigError(f"Clos parameters given for a {base.value} network")
        if len(clos) != 3:
            raise ConfigError(f"Clos parameters must be n,m,r (got {clos})")
        clos = tuple(int(v) for v in clos)
    if not isinstance(radix, int) or radix < 2:
        raise ConfigError(f"Radix must be an integer >= 2 (got {radix!r})")
    return NetworkRecipe(base, transform, radix, chosen, clos)


@lru_cache(maxsize=None)
def build_network(recipe: NetworkRecipe, n_terminals: int) -> Network:
    """Build (and cache per process) the network a recipe describes."""
    if recipe.base == NetworkKind.CLOS:
        params = ClosParams(*recipe.clos) if recipe.clos else default_clos_params(n_terminals)
        net = build_clos(params, n_terminals)
    elif recipe.base == NetworkKind.BENES:
        if recipe.radix != 2:
            raise TopologyError("Beneš networks are built from 2x2 routers (radix 2)")
        net = build_benes(n_terminals)
    else:
        net = BUILDERS[recipe.base](n_terminals, recipe.radix)

    if recipe.transform == "flattened":
        net = full_flatten(net)
    elif recipe.transform == "mf":
        net = meta_flatten(net, recipe.method)
    return net


# ------------------------------------------------------------------------------
# Experiment Configuration
# ------------------------------------------------------------------------------

CONFIG_KEYS = {
    "n_terminals",
    "networks",
    "workloads",
    "rates",
    "rate",
    "seed",
    "seeds",
    "warmup_cycles",
    "measure_cycles",
    "buffer_depth",
    "drain",
    "selection",
    "max_drain_cycles",
    "proxy_weights",
    "report_locale",
    "out",
    "jobs",
}
NETWORK_KEYS = {"kind", "radix", "method", "n", "m", "r", "name"}
WORKLOAD_KEYS = {
    "kind",
    "rate",
    "msg_flits",
    "sigma",
    "preset",
    "hot_factor",
    "hot_nodes",
    "src_weights",
    "dst_weights",
    "path",
    "include",
    "name",
}

PRESETS: Dict[str, Dict[str, Any]] = {
    "paper32": {
        "n_terminals": 32,
        "networks": [
            "omega",
            "butterfly",
            "baseline",
            "generalized_cube",
            "benes",
            "clos",
            "mf_butterfly",
            "mf_baseline",
        ],
        "workloads": [
            {"kind": "uniform"},
            {"kind": "exponential"},
            {"kind": "normal"},
            {"kind": "hotspot", "preset": "waterspatial_proxy"},
            {"kind": "hotspot", "preset": "fft_proxy"},
            {"kind": "hotspot", "preset": "waternsq_proxy"},
        ],
        "rates": DEFAULT_RATES,
    },
    "smoke": {
        "n_terminals": 16,
        "networks": ["omega", "butterfly", "benes", "mf_butterfly"],
        "workloads": [{"kind": "uniform"}, {"kind": "hotspot", "preset": "fft_proxy"}],
        "rates": [0.05, 0.2],
        "warmup_cycles": 200,
        "measure_cycles": 1000,
    },
}
# older name of the full 32-terminal comparison
PRESETS["study32"] = PRESETS["paper32"]


@dataclass
class ExperimentConfig:
    networks: List[NetworkRecipe]
    workloads: List[Dict[str, Any]]
    n_terminals: int = 32
    rates: List[float] = field(default_factory=lambda: list(DEFAULT_RATES))
    rate: Optional[float] = None
    seeds: List[int] = field(default_factory=lambda: [1])
    warmup_cycles: int = 10000
    measure_cycles: int = 50000
    buffer_depth: int = 2
    drain: Optional[str] = None
    selection: str = "least_occupied"
    max_drain_cycles: int = 1_000_000
    proxy_weights: ProxyWeights = field(default_factory=ProxyWeights)
    report_locale: str = "en_US"
    out: str = "results"
    jobs: int = 1
    base_dir: str = "."

    def __post_init__(self):
        if not self.networks:
            raise ConfigError("Configuration lists no networks")
        if not self.workloads:
            raise ConfigError("Configuration lists no workloads")
        if not self.rates:
            raise ConfigError("Configuration lists no rates")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1 (got {self.jobs})")
        if not self.seeds:
            raise ConfigError("Configuration lists no seeds")

    @property
    def single_rate(self) -> float:
        return self.rate if self.rate is not None else self.rates[0]


def _line_of(text: Optional[str], key: str) -> Optional[int]:
    if not text:
        return None
    match = re.search(rf'"{re.escape(key)}"\s*:', text)
    return text.count("\n", 0, match.start()) + 1 if match else None


def _recipe_from_entry(entry: Any) -> NetworkRecipe:
    if isinstance(entry, str):
        return parse_recipe(entry)
    if not isinstance(entry, dict) or "kind" not in entry:
        raise ConfigError(f"Network entry needs a 'kind': {entry!r}")
    unknown = set(entry) - NETWORK_KEYS
    if unknown:
        raise ConfigError(f"Unknown network keys: {', '.join(sorted(unknown))}")
    clos = None
    if any(key in entry for key in ("n", "m", "r")):
        try:
            clos = (entry["n"], entry["m"], entry["r"])
        except KeyError as e:
            raise ConfigError(f"Clos entry is missing {e}")
    return parse_recipe(entry["kind"], entry.get("radix", 2), entry.get("method"), clos)


def make_workload(
    entry: Dict[str, Any], rate: float, seed: int, n_terminals: int, base_dir: str = "."
) -> WorkloadSpec:
    """WorkloadSpec for one configured workload at one rate and seed."""
    path = entry.get("path")
    if path is not None and not os.path.isabs(path):
        path = os.path.join(base_dir, path)
    return WorkloadSpec(
        kind=entry.get("kind", "uniform"),
        rate=entry.get("rate", rate),
        msg_flits=entry.get("msg_flits", 2),
        seed=seed,
        n_terminals=n_terminals,
        sigma=entry.get("sigma"),
        preset=entry.get("preset"),
        hot_factor=entry.get("hot_factor", 4.0),
        hot_nodes=entry.get("hot_nodes"),
        src_weights=entry.get("src_weights"),
        dst_weights=entry.get("dst_weights"),
        trace_path=path,
    )


def expand_workloads(entries: List[Dict[str, Any]], base_dir: str) -> List[Dict[str, Any]]:
    """Replace trace workloads that point at a directory by one entry per trace file."""
    expanded = []
    for entry in entries:
        path = entry.get("path")
        if entry.get("kind") == "trace" and path:
            full = path if os.path.isabs(path) else os.path.join(base_dir, path)
            if os.path.isdir(full):
                files = discover_traces(full, entry.get("include"))
                if not files:
                    raise ConfigError(f"No trace files matched in {full}")
                expanded.extend(dict(entry, path=str(f)) for f in files)
                continue
        expanded.append(entry)
    return expanded


def config_from_dict(
    data: Dict[str, Any], path: Optional[str] = None, text: Optional[str] = None
) -> ExperimentConfig:
    """
    Validate a configuration mapping.

    Raises:
        ConfigError: pointing at the offending key's line when ``text`` is given.
    """
    if not isinstance(data, dict):
        raise ConfigError("Configuration must be a JSON object", path, 1)
    for key in data:
        if key not in CONFIG_KEYS:
            raise ConfigError(f"Unknown configuration key '{key}'", path, _line_of(text, key))

    def fail(key: str, error: Exception) -> ConfigError:
        return ConfigError(str(error), path, _line_of(text, key))

    base_dir = os.path.dirname(os.path.abspath(path)) if path else "."
    n = data.get("n_terminals", 32)
    try:
        networks = [_recipe_from_entry(e) for e in data.get("networks", [])]
        for recipe in networks:
            build_network(recipe, n)
    except (ConfigError, TopologyError) as e:
        raise fail("networks", e)

    raw_workloads = data.get("workloads", [])
    try:
        for entry in raw_workloads:
            if not isinstance(entry, dict):
                raise ConfigError(f"Workload entry must be an object: {entry!r}")
            unknown = set(entry) - WORKLOAD_KEYS
            if unknown:
                raise ConfigError(f"Unknown workload keys: {', '.join(sorted(unknown))}")
        workloads = expand_workloads(raw_workloads, base_dir)
        rates = [float(r) for r in data.get("rates", DEFAULT_RATES)]
        for entry in workloads:
            for rate in rates:
                make_workload(entry, rate, 1, n, base_dir)
    except (ConfigError, WorkloadError, NotADirectoryError, TypeError, ValueError) as e:
        raise fail("workloads", e)

    seeds = data.get("seeds", [data.get("seed", 1)])
    try:
        weights = ProxyWeights(**data.get("proxy_weights", {}))
    except (TypeError, MetricsError) as e:
        raise fail("proxy_weights", e)

    try:
        return ExperimentConfig(
            networks=networks,
            workloads=workloads,
            n_terminals=n,
            rates=rates,
            rate=data.get("rate"),
            seeds=[int(s) for s in seeds],
            warmup_cycles=int(data.get("warmup_cycles", 10000)),
            measure_cycles=int(data.get("measure_cycles", 50000)),
            buffer_depth=int(data.get("buffer_depth", 2)),
            drain=data.get("drain"),
            selection=data.get("selection", "least_occupied"),
            max_drain_cycles=int(data.get("max_drain_cycles", 1_000_000)),
            proxy_weights=weights,
            report_locale=data.get("report_locale", "en_US"),
            out=data.get("out", "results"),
            jobs=int(data.get("jobs", 1)),
            base_dir=base_dir,
        )
    except ConfigError as e:
        raise ConfigError(str(e), path)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid value: {e}", path)


def load_config(path: Optional[str], preset: Optional[str] = None) -> ExperimentConfig:
    """Load a JSON config on top of an optional preset."""
    data: Dict[str, Any] = {}
    if preset:
        if preset not in PRESETS:
            raise ConfigError(
                f"Unknown preset '{preset}'. Valid presets: {', '.join(sorted(PRESETS))}"
            )
        data.update(json.loads(json.dumps(PRESETS[preset])))
    text = None
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"Cannot read config: {e.strerror}", path)
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(e.msg, path, e.lineno)
        if not isinstance(loaded, dict):
            raise ConfigError("Configuration must be a JSON object", path, 1)
        data.update(loaded)
    if not path and not preset:
        raise ConfigError("Provide --config or --preset")
    return config_from_dict(data, path, text)


# ------------------------------------------------------------------------------
# Sweep Execution
# ------------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepPoint:
    recipe: NetworkRecipe
    workload: Tuple[Tuple[str, Any], ...]
    rate: float
    seed: int
    n_terminals: int
    warmup_cycles: int
    measure_cycles: int
    buffer_depth: int
    drain: Optional[str]
    selection: str
    max_drain_cycles: int
    base_dir: str
    points_dir: Optional[str] = None
    log_dir: Optional[str] = None


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", text)


def sweep_points(config: ExperimentConfig, rates: Sequence[float], out: Optional[Path]) -> List[SweepPoint]:
    points = []
    for recipe in config.networks:
        for entry in config.workloads:
            trace = entry.get("kind") == "trace"
            for rate in [0.0] if trace else rates:
                for seed in config.seeds:
                    points.append(
                        SweepPoint(
                            recipe=recipe,
                            workload=tuple(sorted(entry.items(), key=lambda kv: kv[0])),
                            rate=float(rate),
                            seed=seed,
                            n_terminals=config.n_terminals,
                            warmup_cycles=0 if trace else config.warmup_cycles,
                            measure_cycles=config.measure_cycles,
                            buffer_depth=config.buffer_depth,
                            drain=config.drain,
                            selection=config.selection,
                            max_drain_cycles=config.max_drain_cycles,
                            base_dir=config.base_dir,
                            points_dir=str(out / "points") if out else None,
                        )
                    )
    return points


def run_point(point: SweepPoint) -> RunSummary:
    """Simulate one sweep point; module-level so worker processes can pickle it."""
    entry = dict(point.workload)
    for key in ("hot_nodes", "src_weights", "dst_weights"):
        if isinstance(entry.get(key), tuple):
            entry[key] = list(entry[key])
    net = build_network(point.recipe, point.n_terminals)
    spec = make_workload(entry, point.rate, point.seed, point.n_terminals, point.base_dir)
    config = SimConfig(
        network=net,
        workload=spec,
        buffer_depth=point.buffer_depth,
        warmup_cycles=point.warmup_cycles,
        measure_cycles=point.measure_cycles,
        drain=point.drain,
        selection=point.selection,
        max_drain_cycles=point.max_drain_cycles,
    )
    result = Simulator(config).run()
    summary = RunSummary(
        network=net.label,
        workload=spec.name,
        rate=point.rate,
        seed=point.seed,
        stats=result.stats,
        n_terminals=net.n_terminals,
        buffer_depth=point.buffer_depth,
        parent=net.parent.value if net.parent else None,
    )
    stem = _slug(f"{net.label}__{spec.name}__r{point.rate:g}__s{point.seed}")
    if point.points_dir:
        write_csv(Path(point.points_dir) / f"{stem}.csv", COMPARISON_FIELDS, [summary.to_row()])
    if point.log_dir:
        write_csv(
            Path(point.log_dir) / f"messages_{stem}.csv",
            MESSAGE_LOG_FIELDS,
            result.message_log(),
        )
    logger.info(
        f"{net.label} / {spec.name} @ {point.rate:g} (seed {point.seed}): "
        f"latency {result.stats.avg_latency:.2f}, throughput {result.stats.throughput:.4f}"
    )
    return summary


def execute(points: List[SweepPoint], jobs: int) -> List[RunSummary]:
    """Run points on up to ``jobs`` processes; results come back sorted."""
    if jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            summaries = list(pool.map(run_point, points))
    else:
        summaries = [run_point(p) for p in points]
    return sorted(summaries, key=lambda s: (s.network, s.workload, s.rate, s.seed))


def write_sweep_outputs(summaries: List[RunSummary], out: Path) -> List[Dict[str, object]]:
    """Merged table, per-curve CSVs and figures, saturation and improvement reports."""
    table = compare(summaries)
    atomic_write_text(out / "sweep.csv", table.to_csv())

    curves: Dict[Tuple[str, str], Dict[float, List]] = {}
    for s in summaries:
        curves.setdefault((s.network, s.workload), {}).setdefault(s.rate, []).append(s.stats)

    saturation_rows = []
    for (network, workload), by_rate in sorted(curves.items()):
        rows = []
        for rate in sorted(by_rate):
            stats = by_rate[rate]
            rows.append(
                {
                    "rate": rate,
                    "avg_latency": round(sum(st.avg_latency for st in stats) / len(stats), 6),
                    "throughput": round(sum(st.throughput for st in stats) / len(stats), 6),
                    "accepted_rate": round(sum(st.accepted_rate for st in stats) / len(stats), 6),
                    "blocking_rate": round(sum(st.blocking_rate for st in stats) / len(stats), 6),
                }
            )
        write_csv(
            out / "curves" / f"{_slug(network)}__{_slug(workload)}.csv",
            ["rate", "avg_latency", "throughput", "accepted_rate", "blocking_rate"],
            rows,
        )
        saturation_rows.append(
            {
                "network": network,
                "workload": workload,
                "saturation_throughput": saturation_throughput(
                    [(row["rate"], row["throughput"]) for row in rows]
                ),
            }
        )
    plot_curves(out / "curves", out / "plots")
    write_csv(out / "saturation.csv", ["network", "workload", "saturation_throughput"], saturation_rows)

    improvements = improvement_report(summaries)
    write_csv(out / "improvement.csv", IMPROVEMENT_FIELDS, improvements)
    return improvements


# ------------------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------------------


def cmd_build(args) -> int:
    clos = None
    if args.clos:
        try:
            clos = [int(v) for v in args.clos.split(",")]
        except ValueError:
            raise ConfigError(f"--clos expects n,m,r (got '{args.clos}')")
    recipe = parse_recipe(args.kind, args.k, args.method, clos)
    net = build_network(recipe, args.n)
    report = validate_network(net)
    if not report.ok:
        for violation in report.violations:
            logger.error(f"{net.label}: {violation}")
        return EXIT_RUNTIME
    written = export_network(net, args.out or BUILD_OUT_DIR)
    print(
        f"{net.label}: N={net.n_terminals}, {net.n_stages} stages, "
        f"{len(net.routers)} routers, {len(net.channels)} channels"
    )
    for path in written:
        print(f"  {path}")
    return EXIT_OK


def cmd_sim(config: ExperimentConfig, out: Path) -> int:
    points = sweep_points(config, [config.single_rate], out)
    points = [replace(p, points_dir=None, log_dir=str(out / "messages")) for p in points]
    summaries = execute(points, config.jobs)
    table = compare(summaries)
    atomic_write_text(out / "sim_stats.csv", table.to_csv())
    print(table.to_text(config.report_locale), end="")
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, out: Path) -> Tuple[int, str]:
    summaries = execute(sweep_points(config, config.rates, out), config.jobs)
    improvements = write_sweep_outputs(summaries, out)
    table = compare(summaries)
    print(table.to_text(config.report_locale), end="")
    return EXIT_OK, markdown_report(table, [], improvements, config.report_locale)


def cmd_compare(config: ExperimentConfig, out: Path) -> Tuple[int, str]:
    proxies = [
        power_proxy(build_network(recipe, config.n_terminals), config.proxy_weights)
        for recipe in config.networks
    ]
    write_csv(out / "table1.csv", PROXY_FIELDS, [r.to_row() for r in proxy_table(proxies)])

    summaries = execute(sweep_points(config, config.rates, out), config.jobs)
    improvements = write_sweep_outputs(summaries, out)
    table = compare(summaries)
    atomic_write_text(out / "comparison.csv", table.to_csv())
    atomic_write_text(out / "comparison.txt", table.to_text(config.report_locale))
    report = markdown_report(table, proxies, improvements, config.report_locale)
    atomic_write_text(out / "report.md", report)
    print(table.to_text(config.report_locale), end="")
    return EXIT_OK, report


def cmd_histogram(config: ExperimentConfig, out: Path) -> int:
    horizon = config.warmup_cycles + config.measure_cycles
    for entry in config.workloads:
        spec = make_workload(
            entry, config.single_rate, config.seeds[0], config.n_terminals, config.base_dir
        )
        records = generate(spec, horizon)
        hist = histogram(records, config.n_terminals)
        target = out / f"histogram_{_slug(spec.name)}.csv"
        save_histogram(hist, target)
        plot_histogram(target)
        print(
            f"{spec.name}: {hist.total} messages, hottest sources "
            f"{hist.hottest('src', 2)}, hottest destinations {hist.hottest('dst', 4)} -> {target}"
        )
    return EXIT_OK


# ------------------------------------------------------------------------------
# Entry Point
# ------------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Experiment configuration (JSON)")
    common.add_argument("--preset", choices=sorted(PRESETS), help="Start from a named preset")
    common.add_argument("--seed", type=int, help=f"Seed override (falls back to ${SEED_ENV})")
    common.add_argument("--out", help="Output directory (overrides the config)")
    common.add_argument("--jobs", type=int, help="Parallel worker processes")
    common.add_argument("--log-trace", action="store_true", help="Enable debug logging")

    parser = _Parser(description="Multistage interconnection network toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    build = sub.add_parser("build", help="Build, validate and export a topology")
    build.add_argument("kind", help="e.g. omega, benes, clos, mf-butterfly, flattened-baseline")
    build.add_argument("--n", type=int, default=32, help="Number of terminals (default 32)")
    build.add_argument("--k", type=int, default=2, help="Router radix (default 2)")
    build.add_argument("--method", default=None, help="Meta-flatten method: all | pairs")
    build.add_argument("--clos", default=None, help="Clos parameters n,m,r")
    build.add_argument("--out", default=BUILD_OUT_DIR, help="Output directory")
    build.add_argument("--log-trace", action="store_true", help="Enable debug logging")

    for name, text in (
        ("sim", "Run each network and workload once"),
        ("sweep", "Sweep injection rates"),
        ("compare", "Sweep and emit comparison and power-proxy tables"),
        ("histogram", "Node-frequency histograms of the configured workloads"),
    ):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _args_from_environment() -> argparse.Namespace:
    """Parameters of a GitHub Actions run (INPUT_* variables)."""

    def env(name: str, default: Optional[str] = None) -> Optional[str]:
        value = os.environ.get(f"INPUT_{name}", "")
        return value.strip() or default

    def env_int(name: str) -> Optional[int]:
        value = env(name)
        if value is None:
            return None
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"INPUT_{name} must be an integer (got '{value}')")

    command = env("COMMAND", "compare").lower()
    return argparse.Namespace(
        command=command,
        config=env("CONFIG"),
        preset=env("PRESET"),
        seed=env_int("SEED"),
        out=env("OUT", BUILD_OUT_DIR if command == "build" else None),
        jobs=env_int("JOBS"),
        log_trace=env("LOG_TRACE", "false").lower() == "true",
        kind=env("NETWORK", "omega"),
        n=env_int("N") or 32,
        k=env_int("RADIX") or 2,
        method=env("METHOD"),
        clos=env("CLOS"),
    )


def _resolve_seed(cli_seed: Optional[int]) -> Optional[int]:
    if cli_seed is not None:
        return cli_seed
    raw = os.environ.get(SEED_ENV, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer (got '{raw}')")


def _publish_report(report: str) -> None:
    if "GITHUB_OUTPUT" not in os.environ:
        return
    with open(os.environ["GITHUB_OUTPUT"], "a", encoding="utf-8") as f:
        delimiter = "EOF_MINWEAVE_REPORT_4c1f0e2b"
        print(f"report<<{delimiter}", file=f)
        print(report, file=f)
        print(delimiter, file=f)


def run_cli(argv: Optional[List[str]] = None) -> int:
    """Run one command and return its exit code."""
    is_github = os.environ.get("GITHUB_ACTIONS", "false").lower() == "true"
    try:
        if is_github and argv is None:
            args = _args_from_environment()
            startup_message_prefix = "Running with parameters from environment variables."
        else:
            args = build_parser().parse_args(argv)
            startup_message_prefix = "Running with command-line parameters."
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE
    except ConfigError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    configure_logging(args.log_trace)

    try:
        if args.command == "build":
            print(
                f"{startup_message_prefix} Command: build, Kind: {args.kind}, "
                f"N: {args.n}, Radix: {args.k}, Method: {args.method}, Out: {args.out}"
            )
            return cmd_build(args)

        if args.command not in ("sim", "sweep", "compare", "histogram"):
            logger.error(f"Unknown command '{args.command}'")
            return EXIT_USAGE

        config = load_config(args.config, args.preset)
        seed = _resolve_seed(args.seed)
        if seed is not None:
            config.seeds = [seed]
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError(f"--jobs must be >= 1 (got {args.jobs})")
            config.jobs = args.jobs
        out = Path(args.out or config.out)
        print(
            f"{startup_message_prefix} Command: {args.command}, Config: {args.config}, "
            f"Preset: {args.preset}, Seeds: {config.seeds}, Jobs: {config.jobs}, Out: {out}"
        )
        logger.info(
            f"{len(config.networks)} networks, {len(config.workloads)} workloads, "
            f"N={config.n_terminals}"
        )

        if args.command == "sim":
            return cmd_sim(config, out)
        if args.command == "histogram":
            return cmd_histogram(config, out)
        handler = cmd_sweep if args.command == "sweep" else cmd_compare
        code, report = handler(config, out)
        _publish_report(report)
        return code
    except (ValueError, OSError) as e:
        logger.error(f"Error: {e}")
        return EXIT_CONFIG
    except (SimulationError, RuntimeError) as e:
        logger.error(f"Simulation failed: {e}")
        return EXIT_RUNTIME


def main() -> None:
    """Entry point for the command line and the GitHub Action."""
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
