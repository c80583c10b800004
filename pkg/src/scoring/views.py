# src/scoring/views.py
"""
The three raw per-node anomaly scores:

- s_attr:   kNN density over attribute embeddings
- s_struc:  kNN density over structural encoder embeddings
- s_causal: max event-type prediction loss over a node's incident edges
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from src.config import GmaeConfig
from src.data.graph import ProvenanceGraph
from src.errors import CheckpointError, ShapeMismatch
from src.features.embeddings import EmbeddingTable
from src.features.featurize import attribute_matrix, node_feature_matrix
from src.models.causal import CausalDecoder, edge_losses
from src.models.gmae import EncoderParams, MessageGraph, encode, structural_input
from src.scoring.knn import KnnBank, build_bank, knn_score

logger = logging.getLogger(__name__)

VIEWS = ("attr", "struc", "causal")
SCORE_COLUMNS = tuple(f"s_{v}" for v in VIEWS)
SCORES_FORMAT = "#scores v1"


@dataclass(frozen=True)
class ViewScores:
    """Raw view scores indexed by node id (columns s_attr, s_struc, s_causal)."""

    frame: pd.DataFrame

    def __post_init__(self) -> None:
        if tuple(self.frame.columns) != SCORE_COLUMNS:
            raise ShapeMismatch(f"score columns {list(self.frame.columns)} != {list(SCORE_COLUMNS)}")
        values = self.frame.to_numpy()
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("view scores must be finite and nonnegative")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def node_ids(self) -> list[str]:
        return list(self.frame.index)

    def triplets(self) -> np.ndarray:
        return self.frame.to_numpy(dtype=np.float64)

    @classmethod
    def from_series(cls, s_attr: pd.Series, s_struc: pd.Series, s_causal: pd.Series) -> "ViewScores":
        frame = pd.concat(
            {"s_attr": s_attr, "s_struc": s_struc, "s_causal": s_causal}, axis=1
        )
        frame.index.name = "node_id"
        return cls(frame.sort_index())


def save_scores(scores: ViewScores, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{SCORES_FORMAT}\n")
        scores.frame.to_csv(fh, float_format="%.17g")


def load_scores(path: str | Path) -> ViewScores:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != SCORES_FORMAT:
            raise CheckpointError(f"{path}: expected '{SCORES_FORMAT}' header, got {header!r}")
        frame = pd.read_csv(fh, index_col="node_id", dtype={"node_id": str}, keep_default_na=False)
    return ViewScores(frame)


# ---- attribute view ---------------------------------------------------------


def attribute_bank(reference: ProvenanceGraph, table: EmbeddingTable, k: int) -> KnnBank:
    """Bank of benign attribute vectors (every node of the benign reference graph)."""
    return build_bank(attribute_matrix(reference, table), k)


def attribute_scores(graph: ProvenanceGraph, table: EmbeddingTable, bank: KnnBank) -> pd.Series:
    scores = knn_score(attribute_matrix(graph, table), bank)
    return pd.Series(scores, index=list(graph.index.node_ids), name="s_attr")


# ---- structural view --------------------------------------------------------


def structural_embeddings(
    graph: ProvenanceGraph,
    encoder: EncoderParams,
    config: GmaeConfig,
    node_features: np.ndarray | None = None,
) -> np.ndarray:
    features = structural_input(graph, node_features, config)
    return encode(features, MessageGraph.from_graph(graph), encoder)


def structural_bank(embeddings: np.ndarray, k: int) -> KnnBank:
    return build_bank(embeddings, k)


def structural_scores(graph: ProvenanceGraph, embeddings: np.ndarray, bank: KnnBank) -> pd.Series:
    return pd.Series(knn_score(embeddings, bank), index=list(graph.index.node_ids), name="s_struc")


# ---- causal view ------------------------------------------------------------


def semantic_embeddings(
    graph: ProvenanceGraph, encoder: EncoderParams, node_features: np.ndarray
) -> np.ndarray:
    return encode(node_features, MessageGraph.from_graph(graph), encoder)


def edge_scores(graph: ProvenanceGraph, embeddings: np.ndarray, decoder: CausalDecoder) -> pd.Series:
    """Per-edge weighted BCE indexed by (src, dst)."""
    idx = graph.index
    losses = edge_losses(decoder, embeddings, idx.src, idx.dst, idx.edge_types)
    return pd.Series(losses, index=pd.MultiIndex.from_tuples(list(graph.edges), names=["src", "dst"]))


def causal_scores(graph: ProvenanceGraph, embeddings: np.ndarray, decoder: CausalDecoder) -> pd.Series:
    """Max loss over edges incident to each node, in either direction; isolated nodes get 0."""
    idx = graph.index
    losses = edge_losses(decoder, embeddings, idx.src, idx.dst, idx.edge_types)
    node_max = np.zeros(idx.num_nodes)
    np.maximum.at(node_max, idx.src, losses)
    np.maximum.at(node_max, idx.dst, losses)
    return pd.Series(node_max, index=list(idx.node_ids), name="s_causal")


# ---- all views --------------------------------------------------------------


@dataclass
class ViewModels:
    """Everything trained on benign data that scoring needs."""

    table: EmbeddingTable
    structural: EncoderParams
    semantic: EncoderParams
    decoder: CausalDecoder
    attr_bank: KnnBank
    struc_bank: KnnBank


def score_views(graph: ProvenanceGraph, models: ViewModels, config: GmaeConfig) -> ViewScores:
    features = node_feature_matrix(graph, models.table)
    h_struc = structural_embeddings(graph, models.structural, config, features)
    h_sem = semantic_embeddings(graph, models.semantic, features)
    scores = ViewScores.from_series(
        attribute_scores(graph, models.table, models.attr_bank),
        structural_scores(graph, h_struc, models.struc_bank),
        causal_scores(graph, h_sem, models.decoder),
    )
    logger.debug("view score means: %s", scores.frame.mean().round(4).to_dict())
    return scores
