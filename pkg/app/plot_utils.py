#!/usr/bin/env python3
"""
Plot Utilities

Renders the CSV results of a sweep as PNG figures: latency and throughput
against offered load, one figure per workload with a line per network, and
bar charts of per-node source and destination counts. Figures are drawn with
the non-interactive Agg backend and written atomically like every other
MinWeave output.
"""

import io
import logging
import math
from pathlib import Path
from typing import Dict, List, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from export_utils import atomic_write_bytes, read_csv  # noqa: E402

logger = logging.getLogger(__name__)

FIGURE_DPI = 120
CURVE_SEPARATOR = "__"


def _float(value: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        return math.nan


def _save(fig, path) -> Path:
    buffer = io.BytesIO()
    fig.tight_layout()
    fig.savefig(buffer, format="png", dpi=FIGURE_DPI)
    plt.close(fig)
    written = atomic_write_bytes(path, buffer.getvalue())
    logger.debug(f"Rendered {written}")
    return written


# ------------------------------------------------------------------------------
# Load Curves
# ------------------------------------------------------------------------------


def load_curves(curve_dir) -> Dict[str, Dict[str, List[Tuple[float, float, float]]]]:
    """
    Read ``{network}__{workload}.csv`` curve files.

    Returns:
        workload -> network -> [(rate, avg_latency, throughput), ...] sorted by rate.
    """
    curves: Dict[str, Dict[str, List[Tuple[float, float, float]]]] = {}
    for path in sorted(Path(curve_dir).glob(f"*{CURVE_SEPARATOR}*.csv")):
        network, workload = path.stem.split(CURVE_SEPARATOR, 1)
        points = [
            (_float(row["rate"]), _float(row["avg_latency"]), _float(row["throughput"]))
            for row in read_csv(path)
        ]
        curves.setdefault(workload, {})[network] = sorted(points)
    return curves


def plot_curves(curve_dir, out_dir) -> List[Path]:
    """
    Draw ``{workload}.png`` in ``out_dir`` for every workload found in
    ``curve_dir``: average latency (left) and throughput (right) against
    offered load.
    """
    written = []
    for workload, by_network in sorted(load_curves(curve_dir).items()):
        fig, (latency_ax, throughput_ax) = plt.subplots(1, 2, figsize=(11, 4.5))
        for network, points in sorted(by_network.items()):
            rates = [p[0] for p in points]
            latency_ax.plot(rates, [p[1] for p in points], marker="o", label=network)
            throughput_ax.plot(rates, [p[2] for p in points], marker="o", label=network)
        latency_ax.set_xlabel("offered load (flits/node/cycle)")
        latency_ax.set_ylabel("average latency (cycles)")
        throughput_ax.set_xlabel("offered load (flits/node/cycle)")
        throughput_ax.set_ylabel("throughput (flits/node/cycle)")
        throughput_ax.legend(fontsize="small")
        fig.suptitle(workload)
        written.append(_save(fig, Path(out_dir) / f"{workload}.png"))
    if written:
        logger.info(f"Rendered {len(written)} curve figure(s) in {out_dir}")
    return written


# ------------------------------------------------------------------------------
# Node Histograms
# ------------------------------------------------------------------------------


def plot_histogram(csv_path, out_path=None) -> Path:
    """Bar chart of a ``node,src_count,dst_count`` file; defaults to a sibling .png."""
    csv_path = Path(csv_path)
    rows = read_csv(csv_path)
    nodes = [int(row["node"]) for row in rows]
    fig, ax = plt.subplots(figsize=(max(6.0, 0.25 * len(nodes)), 4))
    ax.bar([n - 0.2 for n in nodes], [int(row["src_count"]) for row in rows], 0.4, label="source")
    ax.bar([n + 0.2 for n in nodes], [int(row["dst_count"]) for row in rows], 0.4, label="destination")
    ax.set_xlabel("node")
    ax.set_ylabel("messages")
    ax.set_title(csv_path.stem)
    ax.legend()
    return _save(fig, out_path or csv_path.with_suffix(".png"))
