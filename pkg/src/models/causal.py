# src/models/causal.py
"""
Causal view decoder: predicts the event-type set of an edge u -> v from the
frozen semantic embeddings [h(u) || h(v)] and is trained with class-weighted
binary cross-entropy over benign edges.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from src.config import ScoringConfig
from src.data.graph import ProvenanceGraph
from src.errors import DegenerateGraph, ShapeMismatch
from src.features.featurize import NUM_EVENT_TYPES
from src.models.nncore import (
    MlpParams,
    adam_state,
    adam_step,
    class_weights,
    init_mlp,
    load_params,
    mlp_backward,
    mlp_forward,
    save_params,
    weighted_bce,
)

logger = logging.getLogger(__name__)

DECODER_ACTIVATIONS = ("tanh", "identity")


@dataclass
class CausalDecoder:
    mlp: MlpParams  # 2h -> h (tanh) -> |EventType|
    weights: np.ndarray  # (|EventType|,) per-class loss weights

    def __post_init__(self) -> None:
        widths = self.mlp.widths
        if widths[-1] != NUM_EVENT_TYPES or widths[0] % 2:
            raise ShapeMismatch(f"decoder widths {widths} do not map 2h -> {NUM_EVENT_TYPES}")
        if self.weights.shape != (NUM_EVENT_TYPES,):
            raise ShapeMismatch(f"class weights have shape {self.weights.shape}")

    @property
    def hidden(self) -> int:
        return self.mlp.widths[0] // 2

    def logits(self, h_src: np.ndarray, h_dst: np.ndarray) -> np.ndarray:
        out, _ = mlp_forward(self.mlp, np.hstack([h_src, h_dst]))
        return out


def edge_inputs(embeddings: np.ndarray, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    return np.hstack([embeddings[src], embeddings[dst]])


def edge_losses(
    decoder: CausalDecoder,
    embeddings: np.ndarray,
    src: np.ndarray,
    dst: np.ndarray,
    targets: np.ndarray,
) -> np.ndarray:
    """Per-edge weighted BCE between predicted and observed event sets."""
    if embeddings.shape[1] != decoder.hidden:
        raise ShapeMismatch(f"embedding width {embeddings.shape[1]} != decoder input {decoder.hidden}")
    if len(src) == 0:
        return np.zeros(0)
    logits, _ = mlp_forward(decoder.mlp, edge_inputs(embeddings, src, dst))
    losses, _ = weighted_bce(logits, targets, decoder.weights, reduction="none")
    return np.asarray(losses)


def decoder_loss(
    decoder: CausalDecoder, inputs: np.ndarray, targets: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean weighted BCE over the given edge rows, and its parameter gradients."""
    logits, cache = mlp_forward(decoder.mlp, inputs)
    loss, d_logits = weighted_bce(logits, targets, decoder.weights, reduction="mean")
    grads, _ = mlp_backward(decoder.mlp, cache, d_logits)
    return float(loss), grads.named()


def train_causal_decoder(
    graph: ProvenanceGraph,
    embeddings: np.ndarray,
    config: ScoringConfig,
    seed: int,
    lr: float | None = None,
) -> tuple[CausalDecoder, list[float]]:
    """
    Fit the decoder on every edge of `graph` (a benign training graph) with the
    semantic encoder frozen. Returns the decoder and its per-epoch losses.
    """
    idx = graph.index
    if idx.num_edges == 0:
        raise DegenerateGraph("causal decoder needs at least one benign edge")
    if embeddings.shape[0] != idx.num_nodes:
        raise ShapeMismatch(f"{embeddings.shape[0]} embeddings for {idx.num_nodes} nodes")

    targets = idx.edge_types
    if config.class_weighting:
        weights = class_weights(targets)
    else:
        weights = np.ones(NUM_EVENT_TYPES)
    logger.info("Event-type class weights: %s", np.round(weights, 4).tolist())

    rng = np.random.default_rng(seed)
    hidden = embeddings.shape[1]
    decoder = CausalDecoder(
        mlp=init_mlp([2 * hidden, hidden, NUM_EVENT_TYPES], rng, hidden="tanh", output="identity"),
        weights=weights,
    )
    inputs = edge_inputs(embeddings, idx.src, idx.dst)
    params = decoder.mlp.named()
    state = adam_state(params)
    step = config.decoder_lr if lr is None else lr

    losses: list[float] = []
    for epoch in range(config.decoder_epochs):
        loss, grads = decoder_loss(decoder, inputs, targets)
        adam_step(params, grads, state, step)
        losses.append(loss)
        logger.info("causal epoch %d/%d loss=%.6f", epoch + 1, config.decoder_epochs, loss)
    return decoder, losses


def save_decoder(decoder: CausalDecoder, path: str | Path, meta: dict | None = None) -> None:
    params = {**decoder.mlp.named(), "class_weights": decoder.weights}
    save_params(path, params, meta)


def load_decoder(path: str | Path) -> CausalDecoder:
    params, _ = load_params(path)
    weights = params.pop("class_weights")
    return CausalDecoder(MlpParams.from_named(params, DECODER_ACTIVATIONS), weights)
