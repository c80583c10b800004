# src/data/graph_io.py
from __future__ import annotations

import logging
from pathlib import Path

from src.data.events import EntityType, EventType, escape_value, unescape_value
from src.data.graph import Edge, Node, ProvenanceGraph, _freeze
from src.errors import GraphFormatError

logger = logging.getLogger(__name__)

GRAPH_FORMAT = "provgraph"
GRAPH_VERSION = 1


def dump_graph(graph: ProvenanceGraph, path: str | Path) -> None:
    """
    Write a graph checkpoint:

        #provgraph v1
        [nodes] <n>
        <id> TAB <type> TAB <first_seen> TAB <attr>
        [edges] <m>
        <src> TAB <dst> TAB <timestamp> TAB <EVENT,EVENT,...>
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#{GRAPH_FORMAT} v{GRAPH_VERSION}\n")
        fh.write(f"[nodes] {graph.num_nodes}\n")
        for nid, node in graph.nodes.items():
            fh.write(
                f"{escape_value(nid)}\t{node.type.value}\t{node.first_seen}\t"
                f"{escape_value(node.attr)}\n"
            )
        fh.write(f"[edges] {graph.num_edges}\n")
        for (s, d), edge in graph.edges.items():
            events = ",".join(e.value for e in edge.sorted_events())
            fh.write(f"{escape_value(s)}\t{escape_value(d)}\t{edge.timestamp}\t{events}\n")
    logger.info(
        "Saved graph (%d nodes, %d edges) to %s", graph.num_nodes, graph.num_edges, path
    )


def _section(line: str, name: str) -> int:
    head, _, count = line.partition(" ")
    if head != f"[{name}]" or not count.strip().isdigit():
        raise GraphFormatError(f"expected '[{name}] <count>', got {line!r}")
    return int(count)


def load_graph(path: str | Path) -> ProvenanceGraph:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != f"#{GRAPH_FORMAT} v{GRAPH_VERSION}":
        raise GraphFormatError(f"{path}: unsupported graph header")

    try:
        n = _section(lines[1], "nodes")
        nodes: dict[str, Node] = {}
        for line in lines[2 : 2 + n]:
            nid, etype, ts, attr = line.split("\t", 3)
            nodes[unescape_value(nid)] = Node(
                EntityType(etype), unescape_value(attr), int(ts)
            )
        m = _section(lines[2 + n], "edges")
        edges: dict[tuple[str, str], Edge] = {}
        for line in lines[3 + n : 3 + n + m]:
            s, d, ts, events = line.split("\t")
            kinds = frozenset(EventType(e) for e in events.split(","))
            edges[(unescape_value(s), unescape_value(d))] = Edge(kinds, int(ts))
    except (IndexError, ValueError) as err:
        if isinstance(err, GraphFormatError):
            raise
        raise GraphFormatError(f"{path}: {err}") from None

    if len(nodes) != n or len(edges) != m or len(lines) != 3 + n + m:
        raise GraphFormatError(f"{path}: section counts do not match contents")
    for s, d in edges:
        if s not in nodes or d not in nodes:
            raise GraphFormatError(f"{path}: edge ({s}, {d}) has a missing endpoint")

    return _freeze(nodes, edges)
