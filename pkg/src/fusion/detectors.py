# src/fusion/detectors.py
"""
Seven detectors over the normalized triplet (S'_attr, S'_struc, S'_causal):

    D1..D3  single view
    D4      sum of the two largest
    D5      softmax-fused two largest
    D6      sum of all three
    D7      softmax-fused all three

Each is thresholded at its maximum over benign validation triplets and a node
is malicious when at least T_v detectors fire.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from src.config import FusionConfig
from src.errors import CheckpointError, EmptyBenign, ShapeMismatch
from src.fusion.normalize import Normalizer, fit_normalizer
from src.scoring.views import SCORE_COLUMNS, VIEWS

logger = logging.getLogger(__name__)

NUM_DETECTORS = 7
DETECTOR_COLUMNS = tuple(f"d{i}" for i in range(1, NUM_DETECTORS + 1))
NORM_COLUMNS = tuple(f"{c}_norm" for c in SCORE_COLUMNS)
ALERT_COLUMNS = ("node_id", *NORM_COLUMNS, *DETECTOR_COLUMNS, "votes", "verdict")
MALICIOUS = "malicious"
BENIGN = "benign"


# ---- combiners --------------------------------------------------------------


def fuse_topk(scores, alpha: float, k: int) -> np.ndarray | float:
    """
    Softmax-weighted average of the k largest scores along the last axis:
    w_i = exp(alpha * s_i) / sum_j exp(alpha * s_j).
    """
    s = np.asarray(scores, dtype=np.float64)
    if s.shape[-1] < k:
        raise ShapeMismatch(f"need at least {k} scores, got {s.shape[-1]}")
    top = -np.sort(-s, axis=-1)[..., :k]
    z = alpha * top
    z = z - z.max(axis=-1, keepdims=True)
    w = np.exp(z)
    w = w / w.sum(axis=-1, keepdims=True)
    fused = np.sum(w * top, axis=-1)
    return float(fused) if fused.ndim == 0 else fused


def combine(triplets: np.ndarray, alpha: float) -> np.ndarray:
    """(n, 3) normalized triplets -> (n, 7) detector scores."""
    t = np.asarray(triplets, dtype=np.float64)
    if t.ndim == 1:
        t = t[None, :]
    if t.shape[1] != len(VIEWS):
        raise ShapeMismatch(f"triplets must have {len(VIEWS)} columns, got {t.shape[1]}")
    top2 = -np.sort(-t, axis=1)[:, :2]
    return np.column_stack(
        [
            t,
            top2.sum(axis=1),
            fuse_topk(t, alpha, 2),
            t.sum(axis=1),
            fuse_topk(t, alpha, 3),
        ]
    )


# ---- calibration and voting -------------------------------------------------


@dataclass(frozen=True)
class DetectorBank:
    thresholds: tuple[float, ...]
    alpha: float = 5.0
    vote_threshold: int = 4
    strict: bool = False
    disabled_views: tuple[str, ...] = field(default=())

    def __post_init__(self) -> None:
        if len(self.thresholds) != NUM_DETECTORS:
            raise ShapeMismatch(f"expected {NUM_DETECTORS} thresholds, got {len(self.thresholds)}")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if not 1 <= self.vote_threshold <= NUM_DETECTORS:
            raise ValueError(f"vote threshold must be in 1..{NUM_DETECTORS}")

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "alpha": self.alpha,
            "vote_threshold": self.vote_threshold,
            "strict": self.strict,
            "disabled_views": list(self.disabled_views),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DetectorBank":
        return cls(
            thresholds=tuple(float(x) for x in data["thresholds"]),
            alpha=float(data["alpha"]),
            vote_threshold=int(data["vote_threshold"]),
            strict=bool(data["strict"]),
            disabled_views=tuple(data.get("disabled_views", ())),
        )


def _mask_views(triplets: np.ndarray, disabled: Iterable[str]) -> np.ndarray:
    t = np.array(triplets, dtype=np.float64, copy=True)
    if t.ndim == 1:
        t = t[None, :]
    for view in disabled:
        t[:, VIEWS.index(view)] = 0.0
    return t


def calibrate(
    benign_triplets: np.ndarray,
    alpha: float = 5.0,
    vote_threshold: int = 4,
    strict: bool = False,
    disabled_views: Sequence[str] = (),
) -> DetectorBank:
    """tau_i = max over benign validation triplets of detector score i."""
    t = _mask_views(benign_triplets, disabled_views)
    if t.shape[0] == 0:
        raise EmptyBenign("calibration needs at least one benign triplet")
    thresholds = combine(t, alpha).max(axis=0)
    bank = DetectorBank(
        thresholds=tuple(float(x) for x in thresholds),
        alpha=alpha,
        vote_threshold=vote_threshold,
        strict=strict,
        disabled_views=tuple(disabled_views),
    )
    logger.info("Calibrated thresholds: %s", [round(x, 6) for x in bank.thresholds])
    return bank


def evaluate_detectors(triplets: np.ndarray, bank: DetectorBank) -> np.ndarray:
    """(n, 7) 0/1 detector bits; a disabled view's own detector never fires."""
    t = _mask_views(triplets, bank.disabled_views)
    scores = combine(t, bank.alpha)
    tau = np.asarray(bank.thresholds)
    bits = (scores > tau) if bank.strict else (scores >= tau)
    for view in bank.disabled_views:
        bits[:, VIEWS.index(view)] = False
    return bits.astype(np.int8)


def vote(bits: np.ndarray, vote_threshold: int) -> np.ndarray:
    """malicious <=> popcount >= T_v."""
    if not 1 <= vote_threshold <= NUM_DETECTORS:
        raise ValueError(f"vote threshold must be in 1..{NUM_DETECTORS}")
    return np.asarray(bits).sum(axis=-1) >= vote_threshold


def vote_vector(bits: Sequence[int]) -> str:
    return "".join(str(int(b)) for b in bits)


# ---- alert records ----------------------------------------------------------


@dataclass(frozen=True)
class AlertRecord:
    node_id: str
    triplet: tuple[float, float, float]
    bits: tuple[int, ...]
    votes: int
    verdict: str

    @property
    def vote_vector(self) -> str:
        return vote_vector(self.bits)

    @classmethod
    def from_row(cls, row: pd.Series) -> "AlertRecord":
        return cls(
            node_id=str(row["node_id"]),
            triplet=tuple(float(row[c]) for c in NORM_COLUMNS),
            bits=tuple(int(row[c]) for c in DETECTOR_COLUMNS),
            votes=int(row["votes"]),
            verdict=str(row["verdict"]),
        )


def rank_nodes(alerts: pd.DataFrame) -> pd.DataFrame:
    """Votes desc, then max normalized view score desc, then node id asc."""
    key = alerts.assign(_max_view=alerts[list(NORM_COLUMNS)].max(axis=1))
    ordered = key.sort_values(
        ["votes", "_max_view", "node_id"], ascending=[False, False, True], kind="mergesort"
    )
    return ordered.drop(columns="_max_view").reset_index(drop=True)


def build_alerts(normalized: pd.DataFrame, bank: DetectorBank) -> pd.DataFrame:
    """One ranked record per node from an index-by-node-id frame of normalized scores."""
    triplets = normalized[list(NORM_COLUMNS)].to_numpy(dtype=np.float64)
    bits = evaluate_detectors(triplets, bank)
    votes = bits.sum(axis=1).astype(int)
    alerts = pd.DataFrame(
        {
            "node_id": [str(n) for n in normalized.index],
            **{c: triplets[:, i] for i, c in enumerate(NORM_COLUMNS)},
            **{c: bits[:, i] for i, c in enumerate(DETECTOR_COLUMNS)},
            "votes": votes,
            "verdict": np.where(votes >= bank.vote_threshold, MALICIOUS, BENIGN),
        }
    )
    return rank_nodes(alerts)[list(ALERT_COLUMNS)]


# ---- fitted fusion stage ----------------------------------------------------


@dataclass(frozen=True)
class FusionModel:
    normalizer: Normalizer
    bank: DetectorBank

    def normalize(self, raw: pd.DataFrame) -> pd.DataFrame:
        return self.normalizer.transform(raw[list(SCORE_COLUMNS)])

    def detect(self, raw: pd.DataFrame) -> pd.DataFrame:
        return build_alerts(self.normalize(raw), self.bank)

    def to_dict(self) -> dict:
        return {"normalizer": self.normalizer.to_dict(), "detectors": self.bank.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "FusionModel":
        return cls(Normalizer.from_dict(data["normalizer"]), DetectorBank.from_dict(data["detectors"]))


def fit_fusion(
    benign_raw: pd.DataFrame, config: FusionConfig, disabled_views: Sequence[str] = ()
) -> FusionModel:
    """Fit the normalizer and calibrate all seven thresholds on benign validation scores."""
    raw = benign_raw[list(SCORE_COLUMNS)]
    normalizer = fit_normalizer(raw, config.normalizer)
    normalized = normalizer.transform(raw)
    bank = calibrate(
        normalized[list(NORM_COLUMNS)].to_numpy(dtype=np.float64),
        alpha=config.alpha,
        vote_threshold=config.vote_threshold,
        strict=config.strict,
        disabled_views=disabled_views,
    )
    return FusionModel(normalizer, bank)


def save_fusion(model: FusionModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(model.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


def load_fusion(path: str | Path) -> FusionModel:
    try:
        return FusionModel.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: bad calibration artifact ({exc})") from exc
