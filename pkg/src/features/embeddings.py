# src/features/embeddings.py
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from gensim.models import Word2Vec

from src.errors import CheckpointError, EmptyCorpus, ShapeMismatch
from src.features.tokens import tokenize_attribute

logger = logging.getLogger(__name__)

TABLE_FORMAT = "#embeddings v1"


def stable_hash(text: str) -> int:
    """Process-independent 64-bit hash (Python's str hash is salted per run)."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Token -> dense vector lookup with a deterministic OOV fallback."""

    tokens: tuple[str, ...]
    vectors: np.ndarray  # (len(tokens), d_attr) float64
    seed: int
    d_attr: int
    _rows: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.vectors.shape != (len(self.tokens), self.d_attr):
            raise ShapeMismatch(
                f"vectors have shape {self.vectors.shape}, expected "
                f"({len(self.tokens)}, {self.d_attr})"
            )
        object.__setattr__(self, "_rows", {t: i for i, t in enumerate(self.tokens)})

    def __contains__(self, token: str) -> bool:
        return token in self._rows

    def __len__(self) -> int:
        return len(self.tokens)

    def oov_vector(self, token: str) -> np.ndarray:
        """Pseudo-random unit vector keyed by (token, seed)."""
        rng = np.random.default_rng(stable_hash(f"{self.seed}\x00{token}"))
        vec = rng.standard_normal(self.d_attr)
        return vec / np.linalg.norm(vec)

    def vector(self, token: str) -> np.ndarray:
        row = self._rows.get(token)
        if row is None:
            return self.oov_vector(token)
        return self.vectors[row]

    def embed_text(self, text: str) -> np.ndarray:
        """Mean of the token vectors of `text`; zeros when it has no tokens."""
        toks = tokenize_attribute(text)
        if not toks:
            return np.zeros(self.d_attr)
        return np.mean([self.vector(t) for t in toks], axis=0)

    def count_oov(self, texts: Iterable[str]) -> int:
        return sum(1 for text in texts for t in tokenize_attribute(text) if t not in self)

    def same_as(self, other: "EmbeddingTable") -> bool:
        return (
            self.tokens == other.tokens
            and self.seed == other.seed
            and self.d_attr == other.d_attr
            and np.array_equal(self.vectors, other.vectors)
        )


def train_embeddings(
    corpus: Sequence[Sequence[str]],
    d_attr: int = 16,
    window: int = 2,
    epochs: int = 30,
    negatives: int = 5,
    seed: int = 0,
) -> EmbeddingTable:
    """
    Skip-gram with negative sampling over token sequences (one per entity).
    Single worker and a stable hash keep it reproducible across runs.
    """
    sentences = [list(s) for s in corpus if len(s) > 0]
    if not sentences:
        raise EmptyCorpus("embedding corpus has no tokens")
    if window < 1:
        raise ValueError("window must be >= 1")
    if d_attr < 2:
        raise ValueError("d_attr must be >= 2")

    model = Word2Vec(
        sentences=sentences,
        vector_size=d_attr,
        window=window,
        min_count=1,
        sample=0,
        sg=1,
        hs=0,
        negative=negatives,
        epochs=epochs,
        seed=seed,
        workers=1,
        hashfxn=stable_hash,
    )
    wv = model.wv
    tokens = tuple(sorted(wv.key_to_index))
    vectors = np.array([wv[t] for t in tokens], dtype=np.float64)
    logger.info(
        "Trained %d-dim embeddings for %d tokens (%d sentences, %d epochs)",
        d_attr,
        len(tokens),
        len(sentences),
        epochs,
    )
    return EmbeddingTable(tokens=tokens, vectors=vectors, seed=seed, d_attr=d_attr)


# ---- checkpoint -------------------------------------------------------------


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{TABLE_FORMAT} d_attr={table.d_attr} seed={table.seed} count={len(table)}\n")
        for tok, vec in zip(table.tokens, table.vectors):
            fh.write(tok + "\t" + " ".join(repr(float(x)) for x in vec) + "\n")


def load_table(path: str | Path) -> EmbeddingTable:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if " ".join(header[:2]) != TABLE_FORMAT:
            raise CheckpointError(f"{path}: not an embedding table")
        meta = dict(item.split("=", 1) for item in header[2:])
        tokens, rows = [], []
        for line in fh:
            tok, _, values = line.rstrip("\n").partition("\t")
            tokens.append(tok)
            rows.append([float(x) for x in values.split()])
    d_attr = int(meta["d_attr"])
    vectors = np.array(rows, dtype=np.float64).reshape(len(tokens), d_attr)
    return EmbeddingTable(tuple(tokens), vectors, int(meta["seed"]), d_attr)
