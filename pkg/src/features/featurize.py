"""Node and edge feature vectors for the provenance graph."""

from __future__ import annotations

import logging

import numpy as np

from src.data.events import ENTITY_INDEX, ENTITY_TYPES, EVENT_INDEX, EVENT_TYPES
from src.data.graph import Edge, Node, ProvenanceGraph
from src.features.embeddings import EmbeddingTable
from src.features.tokens import tokenize_attribute

logger = logging.getLogger(__name__)

NUM_ENTITY_TYPES = len(ENTITY_TYPES)
NUM_EVENT_TYPES = len(EVENT_TYPES)


def one_hot_type(node: Node) -> np.ndarray:
    out = np.zeros(NUM_ENTITY_TYPES)
    out[ENTITY_INDEX[node.type]] = 1.0
    return out


def node_feature(node: Node, table: EmbeddingTable) -> np.ndarray:
    """x_v = [one-hot(type) || mean token embedding of the attribute]."""
    return np.concatenate([one_hot_type(node), table.embed_text(node.attr)])


def edge_feature(edge: Edge) -> np.ndarray:
    """Multi-hot indicator over the 10 event types."""
    out = np.zeros(NUM_EVENT_TYPES)
    for ev in edge.events:
        out[EVENT_INDEX[ev]] = 1.0
    return out


def attribute_corpus(graph: ProvenanceGraph) -> list[list[str]]:
    """One token sentence per node, in node-id order."""
    return [tokenize_attribute(graph.nodes[n].attr) for n in graph.index.node_ids]


def attribute_matrix(graph: ProvenanceGraph, table: EmbeddingTable) -> np.ndarray:
    """(n, d_attr) attribute embeddings in node-id order."""
    ids = graph.index.node_ids
    if not ids:
        return np.zeros((0, table.d_attr))
    oov = table.count_oov(graph.nodes[n].attr for n in ids)
    if oov:
        logger.warning("%d attribute tokens fell back to OOV vectors", oov)
    # identical texts share one embedding
    cache: dict[str, np.ndarray] = {}
    rows = []
    for n in ids:
        attr = graph.nodes[n].attr
        if attr not in cache:
            cache[attr] = table.embed_text(attr)
        rows.append(cache[attr])
    return np.vstack(rows)


def type_matrix(graph: ProvenanceGraph) -> np.ndarray:
    """(n, |EntityType|) one-hot type block: node input of the type-only graph."""
    idx = graph.index
    out = np.zeros((idx.num_nodes, NUM_ENTITY_TYPES))
    out[np.arange(idx.num_nodes), idx.node_types] = 1.0
    return out


def node_feature_matrix(graph: ProvenanceGraph, table: EmbeddingTable) -> np.ndarray:
    """(n, |EntityType| + d_attr) full node features."""
    return np.hstack([type_matrix(graph), attribute_matrix(graph, table)])


def edge_feature_matrix(graph: ProvenanceGraph) -> np.ndarray:
    return graph.index.edge_types
