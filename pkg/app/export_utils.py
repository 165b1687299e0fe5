#!/usr/bin/env python3
"""
Export Utilities

Writers for every file MinWeave produces: CSV tables, JSON documents and
topology drawings (Graphviz DOT and GraphML). All files are written to a
temporary sibling and moved into place with os.replace, so a reader never
sees a half-written result even when several sweep workers share a directory.
"""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from lxml import etree

logger = logging.getLogger(__name__)

GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"


# ------------------------------------------------------------------------------
# Atomic Writes
# ------------------------------------------------------------------------------


def atomic_write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=str(path.parent))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    logger.debug(f"Wrote {path}")
    return path


def atomic_write_text(path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


# ------------------------------------------------------------------------------
# Tables and Documents
# ------------------------------------------------------------------------------


def csv_text(fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> str:
    """Render rows as CSV with a header and '\\n' line endings."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(fieldnames), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buffer.getvalue()


def write_csv(path, fieldnames: Sequence[str], rows: Iterable[Dict[str, Any]]) -> Path:
    return atomic_write_text(path, csv_text(fieldnames, rows))


def read_csv(path) -> List[Dict[str, str]]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


def write_json(path, document: Any) -> Path:
    return atomic_write_text(path, json.dumps(document, indent=2, sort_keys=True) + "\n")


# ------------------------------------------------------------------------------
# Topology Drawings
# ------------------------------------------------------------------------------


def network_to_dot(net) -> str:
    """
    Graphviz rendering: one cluster per stage, terminals as small boxes,
    intra-stage channels dashed.
    """
    lines = [f'digraph "{net.label}" {{', "  rankdir=LR;", "  node [shape=box];"]
    for i in range(net.n_terminals):
        lines.append(f'  in{i} [label="{i}", shape=plaintext];')
    for stage, ids in enumerate(net.stages):
        lines.append(f"  subgraph cluster_stage{stage} {{")
        lines.append(f'    label="stage {stage}";')
        for rid in ids:
            r = net.routers[rid]
            lines.append(f'    r{rid} [label="r{rid}\\n{r.n_in}x{r.n_out}"];')
        lines.append("  }")
    for j in range(net.n_terminals):
        lines.append(f'  out{j} [label="{j}", shape=plaintext];')

    for i, ref in enumerate(net.input_terminals):
        lines.append(f"  in{i} -> r{ref.router_id};")
    for ch in net.channels:
        style = ", style=dashed" if ch.kind.value == "intra_stage" else ""
        lines.append(
            f'  r{ch.src.router_id} -> r{ch.dst.router_id} '
            f'[label="{ch.src.port}:{ch.dst.port}"{style}];'
        )
    for j, ref in enumerate(net.output_terminals):
        lines.append(f"  r{ref.router_id} -> out{j};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def network_to_graphml(net) -> bytes:
    """GraphML document with router, terminal and channel attributes."""
    root = etree.Element(f"{{{GRAPHML_NS}}}graphml", nsmap={None: GRAPHML_NS})
    keys = (
        ("node", "role", "string"),
        ("node", "stage", "int"),
        ("node", "row", "int"),
        ("node", "n_in", "int"),
        ("node", "n_out", "int"),
        ("edge", "kind", "string"),
        ("edge", "dimension", "int"),
    )
    for domain, name, kind in keys:
        etree.SubElement(
            root,
            f"{{{GRAPHML_NS}}}key",
            id=f"{domain[0]}_{name}",
            attrib={"for": domain, "attr.name": name, "attr.type": kind},
        )
    graph = etree.SubElement(
        root, f"{{{GRAPHML_NS}}}graph", id=net.label, edgedefault="directed"
    )

    def add_data(element, key: str, value) -> None:
        data = etree.SubElement(element, f"{{{GRAPHML_NS}}}data", key=key)
        data.text = str(value)

    def add_node(node_id: str, **attrs) -> None:
        node = etree.SubElement(graph, f"{{{GRAPHML_NS}}}node", id=node_id)
        for name, value in attrs.items():
            add_data(node, f"n_{name}", value)

    def add_edge(edge_id: str, src: str, dst: str, kind: str, dimension: int) -> None:
        edge = etree.SubElement(
            graph, f"{{{GRAPHML_NS}}}edge", id=edge_id, source=src, target=dst
        )
        add_data(edge, "e_kind", kind)
        add_data(edge, "e_dimension", dimension)

    for i in range(net.n_terminals):
        add_node(f"in{i}", role="input_terminal")
    for r in net.routers:
        add_node(f"r{r.id}", role="router", stage=r.stage, row=r.row, n_in=r.n_in, n_out=r.n_out)
    for j in range(net.n_terminals):
        add_node(f"out{j}", role="output_terminal")

    for ch in net.channels:
        add_edge(f"c{ch.id}", f"r{ch.src.router_id}", f"r{ch.dst.router_id}", ch.kind.value, ch.dimension)
    for ch in net.terminal_channels():
        if ch.src is None:
            add_edge(f"c{ch.id}", f"in{ch.terminal}", f"r{ch.dst.router_id}", ch.kind.value, ch.dimension)
        else:
            add_edge(f"c{ch.id}", f"r{ch.src.router_id}", f"out{ch.terminal}", ch.kind.value, ch.dimension)

    return etree.tostring(root, encoding="utf-8", xml_declaration=True, pretty_print=True)


def export_network(net, out_dir, stem: Optional[str] = None) -> List[Path]:
    """Write <stem>.json, <stem>.dot and <stem>.graphml into ``out_dir``."""
    out_dir = Path(out_dir)
    stem = stem or f"{net.label}_{net.n_terminals}"
    written = [
        write_json(out_dir / f"{stem}.json", net.to_dict()),
        atomic_write_text(out_dir / f"{stem}.dot", network_to_dot(net)),
        atomic_write_bytes(out_dir / f"{stem}.graphml", network_to_graphml(net)),
    ]
    logger.info(f"Exported {net.label} (N={net.n_terminals}) to {out_dir}")
    return written
