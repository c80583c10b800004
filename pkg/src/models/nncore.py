# src/models/nncore.py
"""
Small reverse-mode numeric core in float64: dense MLPs, the two training
losses, Adam, a finite-difference checker and a flat parameter checkpoint.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import expit

from src.errors import CheckpointError, DegenerateGraph, DimensionMismatch, ShapeMismatch

logger = logging.getLogger(__name__)

Params = dict[str, np.ndarray]

# activation -> (f, f' expressed through the output)
ACTIVATIONS: dict[str, tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]] = {
    "tanh": (np.tanh, lambda y: 1.0 - y * y),
    "identity": (lambda x: x, np.ones_like),
}

COSINE_EPS = 1e-12
WEIGHT_FLOOR = 1e-3


# ---- MLP --------------------------------------------------------------------


@dataclass
class MlpParams:
    weights: list[np.ndarray]  # (in, out) per layer
    biases: list[np.ndarray]  # (out,) per layer
    activations: tuple[str, ...]

    def __post_init__(self) -> None:
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeMismatch("weights, biases and activations differ in length")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeMismatch(f"layer {i}: weight {w.shape} / bias {b.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ShapeMismatch(f"layer {i} input {w.shape[0]} != previous output")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")

    @property
    def widths(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def named(self, prefix: str = "") -> Params:
        """Live views of the parameters keyed `{prefix}w{i}` / `{prefix}b{i}`."""
        out: Params = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"{prefix}w{i}"] = w
            out[f"{prefix}b{i}"] = b
        return out

    @classmethod
    def from_named(
        cls, named: Mapping[str, np.ndarray], activations: Sequence[str], prefix: str = ""
    ) -> "MlpParams":
        n = len(activations)
        return cls(
            weights=[np.asarray(named[f"{prefix}w{i}"], dtype=np.float64) for i in range(n)],
            biases=[np.asarray(named[f"{prefix}b{i}"], dtype=np.float64) for i in range(n)],
            activations=tuple(activations),
        )


@dataclass
class MlpCache:
    inputs: list[np.ndarray] = field(default_factory=list)
    outputs: list[np.ndarray] = field(default_factory=list)
    squeeze: bool = False


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_mlp(
    widths: Sequence[int],
    rng: np.random.Generator,
    hidden: str = "tanh",
    output: str = "identity",
) -> MlpParams:
    """Glorot-uniform weights, zero biases; `hidden` between layers, `output` last."""
    if len(widths) < 2:
        raise ShapeMismatch("an MLP needs at least input and output widths")
    weights = [glorot_uniform(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]
    biases = [np.zeros(b) for b in widths[1:]]
    acts = tuple([hidden] * (len(weights) - 1) + [output])
    return MlpParams(weights, biases, acts)


def mlp_forward(params: MlpParams, x: np.ndarray) -> tuple[np.ndarray, MlpCache]:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.shape[1] != params.weights[0].shape[0]:
        raise ShapeMismatch(f"input width {h.shape[1]} != {params.weights[0].shape[0]}")
    cache = MlpCache(squeeze=squeeze)
    for w, b, act in zip(params.weights, params.biases, params.activations):
        cache.inputs.append(h)
        h = ACTIVATIONS[act][0](h @ w + b)
        cache.outputs.append(h)
    return (h[0] if squeeze else h), cache


def mlp_backward(
    params: MlpParams, cache: MlpCache, grad_out: np.ndarray
) -> tuple[MlpParams, np.ndarray]:
    """Gradients of a scalar loss w.r.t. every weight/bias and the input."""
    if not cache.inputs:
        raise ShapeMismatch("empty forward cache")
    g = np.asarray(grad_out, dtype=np.float64)
    g = g[None, :] if cache.squeeze else g
    if g.shape != cache.outputs[-1].shape:
        raise ShapeMismatch(f"upstream gradient {g.shape} != output {cache.outputs[-1].shape}")

    n = len(params.weights)
    gw: list[np.ndarray] = [np.empty(0)] * n
    gb: list[np.ndarray] = [np.empty(0)] * n
    for i in reversed(range(n)):
        g = g * ACTIVATIONS[params.activations[i]][1](cache.outputs[i])
        gw[i] = cache.inputs[i].T @ g
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i].T
    grads = MlpParams(gw, gb, params.activations)
    return grads, (g[0] if cache.squeeze else g)


# ---- losses -----------------------------------------------------------------


def weighted_bce(
    logits: np.ndarray,
    targets: np.ndarray,
    weights: np.ndarray,
    reduction: str = "mean",
) -> tuple[np.ndarray | float, np.ndarray]:
    """
    Sum_i w_i * [softplus(z_i) - y_i z_i]  (== -y log s(z) - (1-y) log(1-s(z))).

    reduction: 'mean' over rows, 'sum', or 'none' (per-row losses).
    The gradient is w.r.t. the logits and matches the reduction.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if z.shape != y.shape or z.shape[-1] != w.shape[-1] or w.ndim != 1:
        raise DimensionMismatch(
            f"logits {z.shape}, targets {y.shape}, weights {w.shape} do not line up"
        )
    per_class = w * (np.logaddexp(0.0, z) - y * z)
    grad = w * (expit(z) - y)
    per_row = per_class.sum(axis=-1)
    if reduction == "none":
        return per_row, grad
    if reduction == "sum":
        return float(np.sum(per_row)), grad
    if reduction == "mean":
        rows = 1 if z.ndim == 1 else max(z.shape[0], 1)
        return float(np.sum(per_row)) / rows, grad / rows
    raise ValueError(f"unknown reduction {reduction!r}")


def class_weights(multi_hot: np.ndarray) -> np.ndarray:
    """
    w_i = sqrt((N - n_i) / n_i) over N edges, n_i edges containing class i.
    Classes never seen get weight 0 (masked out); the rest are floored at 1e-3.
    """
    y = np.asarray(multi_hot, dtype=np.float64)
    if y.ndim != 2 or y.shape[0] < 1:
        raise DegenerateGraph("class weights need at least one edge")
    total = float(y.shape[0])
    counts = y.sum(axis=0)
    seen = counts > 0
    w = np.zeros(y.shape[1])
    w[seen] = np.sqrt((total - counts[seen]) / counts[seen])
    w[seen] = np.maximum(w[seen], WEIGHT_FLOOR)
    if not seen.all():
        logger.warning("%d event types never occur; excluded from the loss", int((~seen).sum()))
    return w


def cosine_loss(
    reconstruction: np.ndarray,
    target: np.ndarray,
    rows: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """
    Mean of 1 - cos(r, t) over `rows` (all rows when None).
    The gradient has the full reconstruction shape; rows outside `rows` get 0.
    """
    r_all = np.asarray(reconstruction, dtype=np.float64)
    t_all = np.asarray(target, dtype=np.float64)
    if r_all.shape != t_all.shape:
        raise ShapeMismatch(f"reconstruction {r_all.shape} != target {t_all.shape}")
    squeeze = r_all.ndim == 1
    if squeeze:
        r_all, t_all = r_all[None, :], t_all[None, :]
    sel = np.arange(r_all.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
    grad = np.zeros_like(r_all)
    if sel.size == 0:
        return 0.0, (grad[0] if squeeze else grad)

    r, t = r_all[sel], t_all[sel]
    r_len = np.linalg.norm(r, axis=1)
    t_len = np.linalg.norm(t, axis=1)
    nr, nt = r_len + COSINE_EPS, t_len + COSINE_EPS
    dot = np.sum(r * t, axis=1)
    cos = dot / (nr * nt)
    loss = float(np.mean(1.0 - cos))

    safe = np.where(r_len > 0, r_len, 1.0)
    dcos = t / (nr * nt)[:, None] - (cos / nr)[:, None] * (r / safe[:, None])
    grad[sel] = -dcos / sel.size
    return loss, (grad[0] if squeeze else grad)


# ---- optimizer --------------------------------------------------------------


@dataclass
class AdamState:
    m: Params
    v: Params
    t: int = 0
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8


def adam_state(params: Mapping[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
    )


def adam_step(
    params: Params, grads: Mapping[str, np.ndarray], state: AdamState, lr: float
) -> tuple[Params, AdamState]:
    """In-place Adam update of every array in `params`."""
    b1, b2 = state.betas
    state.t += 1
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape or state.m[name].shape != p.shape:
            raise ShapeMismatch(f"{name}: param {p.shape}, grad {g.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


# ---- gradient checking ------------------------------------------------------


def numeric_gradient(f: Callable[[], float], x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central differences of f() w.r.t. every entry of x (x is perturbed in place)."""
    grad = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        orig = x[idx]
        x[idx] = orig + step
        up = f()
        x[idx] = orig - step
        down = f()
        x[idx] = orig
        grad[idx] = (up - down) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm(np.ravel(analytic) - np.ravel(numeric))
    scale = np.linalg.norm(np.ravel(analytic)) + np.linalg.norm(np.ravel(numeric))
    return float(diff / max(scale, 1e-12))


def gradient_check(
    f: Callable[[], float],
    params: Mapping[str, np.ndarray],
    analytic: Mapping[str, np.ndarray],
    step: float = 1e-5,
) -> dict[str, float]:
    """Relative error per parameter between analytic and central-difference gradients."""
    return {
        name: relative_error(analytic[name], numeric_gradient(f, params[name], step))
        for name in params
    }


# ---- checkpoint -------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_params(path: str | Path, params: Mapping[str, np.ndarray], meta: Mapping | None = None) -> None:
    """Flat float64 dump plus a JSON manifest of (name, shape) in order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(params)
    manifest = {
        "version": CHECKPOINT_VERSION,
        "shapes": [[n, list(np.shape(params[n]))] for n in names],
        "meta": dict(meta or {}),
    }
    flat = (
        np.concatenate([np.ravel(params[n]).astype(np.float64) for n in names])
        if names
        else np.zeros(0)
    )
    with path.open("wb") as fh:
        np.savez(fh, flat=flat, manifest=np.array(json.dumps(manifest, sort_keys=True)))


def load_params(path: str | Path) -> tuple[Params, dict]:
    with np.load(Path(path), allow_pickle=False) as data:
        manifest = json.loads(str(data["manifest"]))
        flat = data["flat"]
    if manifest.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {manifest.get('version')}")
    params: Params = {}
    offset = 0
    for name, shape in manifest["shapes"]:
        size = int(np.prod(shape)) if shape else 1
        params[name] = flat[offset : offset + size].reshape(shape).copy()
        offset += size
    if offset != flat.size:
        raise CheckpointError(f"{path}: manifest does not cover the flat array")
    return params, manifest["meta"]
