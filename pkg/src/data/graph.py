# src/data/graph.py
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np

from src.data.events import (
    ENTITY_INDEX,
    EVENT_INDEX,
    EVENT_TYPES,
    EntityType,
    Event,
    EventType,
)
from src.errors import ConflictingType

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Node:
    type: EntityType
    attr: str
    first_seen: int


@dataclass(frozen=True)
class Edge:
    events: frozenset[EventType]
    timestamp: int

    def sorted_events(self) -> list[EventType]:
        return sorted(self.events, key=EVENT_INDEX.__getitem__)


@dataclass(frozen=True)
class GraphIndex:
    """Array view of a graph: node order is ascending id, edges sorted by (src, dst)."""

    node_ids: tuple[str, ...]
    position: Mapping[str, int]
    node_types: np.ndarray  # (n,) entity type index
    src: np.ndarray  # (m,) node positions
    dst: np.ndarray  # (m,)
    edge_types: np.ndarray  # (m, |EventType|) multi-hot, float64

    @property
    def num_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def num_edges(self) -> int:
        return int(self.src.shape[0])


@dataclass(frozen=True, eq=False)
class ProvenanceGraph:
    """
    Directed graph of typed, attributed entities.
    Every ordered (src, dst) pair carries one edge whose event set is the union
    of all event types observed on that pair.
    """

    nodes: Mapping[str, Node]
    edges: Mapping[tuple[str, str], Edge]
    out_adj: Mapping[str, tuple[str, ...]] = field(repr=False)
    in_adj: Mapping[str, tuple[str, ...]] = field(repr=False)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProvenanceGraph):
            return NotImplemented
        return dict(self.nodes) == dict(other.nodes) and dict(self.edges) == dict(
            other.edges
        )

    __hash__ = None  # type: ignore[assignment]

    @cached_property
    def index(self) -> GraphIndex:
        node_ids = tuple(sorted(self.nodes))
        position = {nid: i for i, nid in enumerate(node_ids)}
        node_types = np.array(
            [ENTITY_INDEX[self.nodes[n].type] for n in node_ids], dtype=np.int64
        )
        keys = sorted(self.edges)
        src = np.array([position[s] for s, _ in keys], dtype=np.int64)
        dst = np.array([position[d] for _, d in keys], dtype=np.int64)
        edge_types = np.zeros((len(keys), len(EVENT_TYPES)), dtype=np.float64)
        for row, key in enumerate(keys):
            for ev in self.edges[key].events:
                edge_types[row, EVENT_INDEX[ev]] = 1.0
        return GraphIndex(
            node_ids=node_ids,
            position=MappingProxyType(position),
            node_types=node_types,
            src=src,
            dst=dst,
            edge_types=edge_types,
        )


def _freeze(
    nodes: dict[str, Node], edges: dict[tuple[str, str], Edge]
) -> ProvenanceGraph:
    out_adj: dict[str, list[str]] = {}
    in_adj: dict[str, list[str]] = {}
    for s, d in sorted(edges):
        out_adj.setdefault(s, []).append(d)
        in_adj.setdefault(d, []).append(s)
    return ProvenanceGraph(
        nodes=MappingProxyType(dict(sorted(nodes.items()))),
        edges=MappingProxyType(dict(sorted(edges.items()))),
        out_adj=MappingProxyType({k: tuple(v) for k, v in out_adj.items()}),
        in_adj=MappingProxyType({k: tuple(v) for k, v in in_adj.items()}),
    )


def build_graph(events: Iterable[Event]) -> ProvenanceGraph:
    """
    Collapse an event stream into a ProvenanceGraph.

    Nodes keep the attribute of their earliest event (ties: smallest attribute).
    Events on the same ordered pair merge into one edge: union of event types,
    minimum timestamp.
    """
    nodes: dict[str, Node] = {}
    pair_events: dict[tuple[str, str], set[EventType]] = {}
    pair_ts: dict[tuple[str, str], int] = {}

    def _see(node_id: str, etype: EntityType, attr: str, ts: int) -> None:
        known = nodes.get(node_id)
        if known is None:
            nodes[node_id] = Node(etype, attr, ts)
            return
        if known.type != etype:
            raise ConflictingType(
                f"entity {node_id!r} seen as {known.type.value} and {etype.value}"
            )
        if (ts, attr) < (known.first_seen, known.attr):
            nodes[node_id] = Node(etype, attr, ts)

    count = 0
    for ev in events:
        _see(ev.src_id, ev.src_type, ev.src_attr, ev.timestamp)
        _see(ev.dst_id, ev.dst_type, ev.dst_attr, ev.timestamp)
        key = (ev.src_id, ev.dst_id)
        pair_events.setdefault(key, set()).add(ev.event_type)
        pair_ts[key] = min(pair_ts.get(key, ev.timestamp), ev.timestamp)
        count += 1

    edges = {
        key: Edge(frozenset(types), pair_ts[key]) for key, types in pair_events.items()
    }
    graph = _freeze(nodes, edges)
    logger.info(
        "Built graph from %d events: %d nodes, %d edges",
        count,
        graph.num_nodes,
        graph.num_edges,
    )
    return graph
