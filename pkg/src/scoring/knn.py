# src/scoring/knn.py
"""
Density-based kNN anomaly score: mean Euclidean distance from a query to its
k nearest benign reference vectors. Higher means a sparser region.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.neighbors import BallTree

from src.errors import DimensionMismatch, EmptyBank
from src.models.nncore import load_params, save_params

logger = logging.getLogger(__name__)

METRIC = "euclidean"


@dataclass(frozen=True)
class KnnBank:
    vectors: np.ndarray  # (n_bank, d)
    k: int
    metric: str = METRIC
    tree: BallTree = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tree", BallTree(self.vectors, metric=self.metric))

    @property
    def size(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])


def build_bank(vectors: np.ndarray, k: int = 10) -> KnnBank:
    """Index benign reference vectors; k is clamped to the bank size."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] == 0:
        raise EmptyBank("kNN bank needs at least one reference vector")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > vectors.shape[0]:
        logger.warning("k=%d exceeds bank size %d; clamping", k, vectors.shape[0])
        k = int(vectors.shape[0])
    return KnnBank(vectors=vectors, k=k)


def knn_score(queries: np.ndarray, bank: KnnBank) -> np.ndarray:
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[None, :]
    if queries.shape[1] != bank.dim:
        raise DimensionMismatch(f"query width {queries.shape[1]} != bank width {bank.dim}")
    if queries.shape[0] == 0:
        return np.zeros(0)
    dist, _ = bank.tree.query(queries, k=bank.k)
    return dist.mean(axis=1)


def save_bank(bank: KnnBank, path: str | Path) -> None:
    save_params(path, {"vectors": bank.vectors}, meta={"k": bank.k, "metric": bank.metric})


def load_bank(path: str | Path) -> KnnBank:
    params, meta = load_params(path)
    return KnnBank(vectors=params["vectors"], k=int(meta["k"]), metric=meta.get("metric", METRIC))
