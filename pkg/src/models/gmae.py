# src/models/gmae.py
"""
Graph masked autoencoder with an edge-aware attention encoder.

Per layer, for every edge u -> v (plus a self edge v -> v with an all-zero
event vector):

    c_uv   = attn-MLP(h_u || h_v || e_uv)
    a_uv   = softmax of c over the incoming edges of v
    h'_v   = tanh( sum_u a_uv * W_val^T h_u )

Training masks a fraction of the node inputs with a learned token and
reconstructs the original inputs of the masked nodes with a linear decoder
under a cosine loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd
from scipy import sparse

from src.config import GmaeConfig
from src.data.graph import ProvenanceGraph
from src.errors import DegenerateGraph, EmptyMask, ShapeMismatch
from src.features.featurize import NUM_EVENT_TYPES, type_matrix
from src.models.nncore import (
    MlpCache,
    MlpParams,
    Params,
    adam_state,
    adam_step,
    cosine_loss,
    glorot_uniform,
    init_mlp,
    load_params,
    mlp_backward,
    mlp_forward,
    save_params,
)

logger = logging.getLogger(__name__)

ATTN_ACTIVATIONS = ("tanh", "identity")
DECODER_ACTIVATIONS = ("identity",)


# ---- parameters -------------------------------------------------------------


@dataclass
class AttentionLayer:
    attn: MlpParams  # (2*d_in + |EventType|) -> h -> 1
    w_val: np.ndarray  # (d_in, h)


@dataclass
class EncoderParams:
    layers: list[AttentionLayer]
    mask_token: np.ndarray  # (input_dim,)

    @property
    def input_dim(self) -> int:
        return int(self.mask_token.shape[0])

    @property
    def hidden(self) -> int:
        return int(self.layers[-1].w_val.shape[1])

    def named(self) -> Params:
        out: Params = {"mask": self.mask_token}
        for i, layer in enumerate(self.layers):
            out.update(layer.attn.named(prefix=f"l{i}.attn."))
            out[f"l{i}.w_val"] = layer.w_val
        return out

    @classmethod
    def from_named(cls, named: Mapping[str, np.ndarray]) -> "EncoderParams":
        n_layers = sum(1 for k in named if k.endswith(".w_val"))
        layers = [
            AttentionLayer(
                attn=MlpParams.from_named(named, ATTN_ACTIVATIONS, prefix=f"l{i}.attn."),
                w_val=np.asarray(named[f"l{i}.w_val"], dtype=np.float64),
            )
            for i in range(n_layers)
        ]
        return cls(layers=layers, mask_token=np.asarray(named["mask"], dtype=np.float64))


def init_encoder(
    input_dim: int, hidden: int, num_layers: int, rng: np.random.Generator
) -> EncoderParams:
    if num_layers < 1:
        raise ValueError("encoder needs at least one layer")
    layers = []
    d_in = input_dim
    for _ in range(num_layers):
        attn = init_mlp([2 * d_in + NUM_EVENT_TYPES, hidden, 1], rng)
        layers.append(AttentionLayer(attn=attn, w_val=glorot_uniform(d_in, hidden, rng)))
        d_in = hidden
    return EncoderParams(layers=layers, mask_token=np.zeros(input_dim))


# ---- graph plumbing ---------------------------------------------------------


@dataclass(frozen=True)
class MessageGraph:
    """Edge arrays with one self edge appended per node, plus scatter matrices."""

    num_nodes: int
    src: np.ndarray
    dst: np.ndarray
    edge_feat: np.ndarray  # (M, |EventType|)
    to_dst: sparse.csr_matrix = field(repr=False)  # (n, M): sums edge rows into targets
    to_src: sparse.csr_matrix = field(repr=False)  # (n, M): sums edge rows into sources

    @classmethod
    def build(cls, num_nodes: int, src: np.ndarray, dst: np.ndarray, edge_feat: np.ndarray) -> "MessageGraph":
        loops = np.arange(num_nodes, dtype=np.int64)
        src = np.concatenate([np.asarray(src, dtype=np.int64), loops])
        dst = np.concatenate([np.asarray(dst, dtype=np.int64), loops])
        feat = np.vstack([np.asarray(edge_feat, dtype=np.float64).reshape(-1, NUM_EVENT_TYPES),
                          np.zeros((num_nodes, NUM_EVENT_TYPES))])
        cols = np.arange(src.shape[0])
        ones = np.ones(src.shape[0])
        shape = (num_nodes, src.shape[0])
        return cls(
            num_nodes=num_nodes,
            src=src,
            dst=dst,
            edge_feat=feat,
            to_dst=sparse.csr_matrix((ones, (dst, cols)), shape=shape),
            to_src=sparse.csr_matrix((ones, (src, cols)), shape=shape),
        )

    @classmethod
    def from_graph(cls, graph: ProvenanceGraph) -> "MessageGraph":
        idx = graph.index
        return cls.build(idx.num_nodes, idx.src, idx.dst, idx.edge_types)


# ---- forward / backward -----------------------------------------------------


def attention_score(
    h_u: np.ndarray, h_v: np.ndarray, e_uv: np.ndarray, params: EncoderParams, layer: int
) -> float:
    """c_uv for a single (neighbor u, target v, edge) triple."""
    z = np.concatenate([np.ravel(h_u), np.ravel(h_v), np.ravel(e_uv)])
    out, _ = mlp_forward(params.layers[layer].attn, z)
    return float(out[0])


@dataclass
class _LayerCache:
    h_in: np.ndarray
    attn_cache: MlpCache
    alpha: np.ndarray
    proj: np.ndarray
    h_out: np.ndarray


def _layer_forward(layer: AttentionLayer, h: np.ndarray, g: MessageGraph) -> _LayerCache:
    if h.shape[1] != layer.w_val.shape[0]:
        raise ShapeMismatch(f"layer input width {h.shape[1]} != {layer.w_val.shape[0]}")
    z = np.hstack([h[g.src], h[g.dst], g.edge_feat])
    c, attn_cache = mlp_forward(layer.attn, z)
    c = c[:, 0]

    c_max = np.full(g.num_nodes, -np.inf)
    np.maximum.at(c_max, g.dst, c)
    ex = np.exp(c - c_max[g.dst])
    alpha = ex / (g.to_dst @ ex)[g.dst]

    proj = h @ layer.w_val
    agg = g.to_dst @ (alpha[:, None] * proj[g.src])
    return _LayerCache(h, attn_cache, alpha, proj, np.tanh(agg))


def _layer_backward(
    layer: AttentionLayer, cache: _LayerCache, grad_out: np.ndarray, g: MessageGraph
) -> tuple[Params, np.ndarray]:
    d_agg = grad_out * (1.0 - cache.h_out**2)
    d_msg = d_agg[g.dst]
    proj_src = cache.proj[g.src]

    d_alpha = np.sum(d_msg * proj_src, axis=1)
    d_proj = g.to_src @ (cache.alpha[:, None] * d_msg)
    grads: Params = {"w_val": cache.h_in.T @ d_proj}
    d_h = d_proj @ layer.w_val.T

    # softmax over each target's incoming edges
    weighted = g.to_dst @ (cache.alpha * d_alpha)
    d_c = cache.alpha * (d_alpha - weighted[g.dst])

    attn_grads, d_z = mlp_backward(layer.attn, cache.attn_cache, d_c[:, None])
    grads.update(attn_grads.named(prefix="attn."))
    width = cache.h_in.shape[1]
    d_h = d_h + g.to_src @ d_z[:, :width] + g.to_dst @ d_z[:, width : 2 * width]
    return grads, d_h


def _apply_mask(features: np.ndarray, params: EncoderParams, masked: np.ndarray | None) -> np.ndarray:
    if features.shape[1] != params.input_dim:
        raise ShapeMismatch(f"features width {features.shape[1]} != encoder input {params.input_dim}")
    x = np.array(features, dtype=np.float64, copy=True)
    if masked is not None and len(masked):
        x[masked] = params.mask_token
    return x


def encode(
    features: np.ndarray,
    graph: MessageGraph,
    params: EncoderParams,
    masked: np.ndarray | None = None,
    return_attention: bool = False,
):
    """
    Run the encoder. Returns the (n, h) layer-L activations, and with
    `return_attention` also the per-layer attention vectors aligned with
    `graph.src` / `graph.dst`.
    """
    h = _apply_mask(features, params, masked)
    attention = []
    for layer in params.layers:
        cache = _layer_forward(layer, h, graph)
        attention.append(cache.alpha)
        h = cache.h_out
    return (h, attention) if return_attention else h


# ---- masking and loss -------------------------------------------------------


def mask_nodes(num_nodes: int, mask_rate: float, rng: np.random.Generator | int) -> np.ndarray:
    """floor(mr * |V|) node positions drawn uniformly without replacement, sorted."""
    if not 0.0 < mask_rate < 1.0:
        raise ValueError(f"mask rate must be in (0, 1), got {mask_rate}")
    count = int(np.floor(mask_rate * num_nodes + 1e-9))
    if count == 0:
        raise EmptyMask(f"mask rate {mask_rate} masks no node out of {num_nodes}")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    return np.sort(rng.choice(num_nodes, size=count, replace=False))


def reconstruction_loss(
    features: np.ndarray,
    graph: MessageGraph,
    encoder: EncoderParams,
    decoder: MlpParams,
    masked: np.ndarray,
    with_grads: bool = True,
) -> tuple[float, Params]:
    """Cosine loss on the masked nodes and gradients for encoder + decoder."""
    x = _apply_mask(features, encoder, masked)
    caches = []
    h = x
    for layer in encoder.layers:
        cache = _layer_forward(layer, h, graph)
        caches.append(cache)
        h = cache.h_out
    recon, dec_cache = mlp_forward(decoder, h)
    loss, d_recon = cosine_loss(recon, features, masked)
    if not with_grads:
        return loss, {}

    dec_grads, d_h = mlp_backward(decoder, dec_cache, d_recon)
    grads: Params = dec_grads.named(prefix="dec.")
    for i in reversed(range(len(encoder.layers))):
        layer_grads, d_h = _layer_backward(encoder.layers[i], caches[i], d_h, graph)
        for name, value in layer_grads.items():
            grads[f"l{i}.{name}"] = value
    grads["mask"] = d_h[masked].sum(axis=0)
    return loss, grads


# ---- training ---------------------------------------------------------------


@dataclass
class GmaeFit:
    encoder: EncoderParams
    decoder: MlpParams
    losses: list[float]


def train_gmae(
    features: np.ndarray,
    graph: MessageGraph,
    config: GmaeConfig,
    seed: int,
    name: str = "gmae",
) -> GmaeFit:
    """Full-batch Adam; the mask is re-drawn every epoch."""
    n = graph.num_nodes
    real_edges = graph.src.shape[0] - n
    if n < 2 or real_edges < 1:
        raise DegenerateGraph(f"{name}: need >= 2 nodes and >= 1 edge, got {n} / {real_edges}")

    rng = np.random.default_rng(seed)
    mask_rng = np.random.default_rng([seed, 1])
    encoder = init_encoder(features.shape[1], config.hidden, config.layers, rng)
    decoder = init_mlp([config.hidden, features.shape[1]], rng, output="identity")

    params = {**encoder.named(), **decoder.named(prefix="dec.")}
    state = adam_state(params)
    losses: list[float] = []
    for epoch in range(config.epochs):
        masked = mask_nodes(n, config.mask_rate, mask_rng)
        loss, grads = reconstruction_loss(features, graph, encoder, decoder, masked)
        adam_step(params, grads, state, config.lr)
        losses.append(loss)
        logger.info("%s epoch %d/%d loss=%.6f", name, epoch + 1, config.epochs, loss)
    return GmaeFit(encoder=encoder, decoder=decoder, losses=losses)


def structural_input(graph: ProvenanceGraph, node_features: np.ndarray | None, config: GmaeConfig) -> np.ndarray:
    """Node input of the structural view: one-hot types, or full features when the split is off."""
    if config.structural_input == "full":
        if node_features is None:
            raise ValueError("structural_input='full' needs node features")
        return node_features
    return type_matrix(graph)


def train_structural(
    graph: ProvenanceGraph,
    config: GmaeConfig,
    seed: int,
    node_features: np.ndarray | None = None,
) -> GmaeFit:
    """GMAE on the type-only graph: one-hot node types, multi-hot edges."""
    features = structural_input(graph, node_features, config)
    return train_gmae(features, MessageGraph.from_graph(graph), config, seed, name="structural")


def train_semantic(
    graph: ProvenanceGraph, node_features: np.ndarray, config: GmaeConfig, seed: int
) -> GmaeFit:
    """GMAE on the attributed graph; its encoder feeds the causal view."""
    return train_gmae(node_features, MessageGraph.from_graph(graph), config, seed, name="semantic")


# ---- checkpoint / export ----------------------------------------------------


def save_encoder(encoder: EncoderParams, path: str | Path, meta: Mapping | None = None) -> None:
    save_params(path, encoder.named(), meta)


def load_encoder(path: str | Path) -> EncoderParams:
    params, _ = load_params(path)
    return EncoderParams.from_named(params)


def embeddings_frame(node_ids: Sequence[str], embeddings: np.ndarray) -> pd.DataFrame:
    """(node id, h floats) table for export."""
    cols = [f"h{i}" for i in range(embeddings.shape[1])]
    frame = pd.DataFrame(embeddings, columns=cols)
    frame.insert(0, "node_id", list(node_ids))
    return frame
