# src/fusion/ablation.py
"""
Ablation tables over a calibrated run:

- detector groups (single view / top-2 / all-view) voted by simple majority
- voting threshold sweep T_v = 1..7
- view, normalizer and alpha variants re-run end to end from raw scores
"""

from __future__ import annotations

import logging
from dataclasses import replace
from itertools import combinations
from typing import Sequence

import numpy as np
import pandas as pd

from src.config import FusionConfig
from src.fusion.detectors import (
    DETECTOR_COLUMNS,
    MALICIOUS,
    NUM_DETECTORS,
    fit_fusion,
)
from src.fusion.normalize import VARIANTS
from src.metrics.detection import (
    CampaignLabels,
    adp,
    attack_coverage,
    confusion,
    f1,
    mcc,
)
from src.scoring.views import VIEWS

logger = logging.getLogger(__name__)

DETECTOR_GROUPS = {
    "single-view": (0, 1, 2),
    "top-2": (3, 4),
    "all-view": (5, 6),
}
ALPHAS = (1.0, 3.0, 5.0, 7.0, 9.0)


def majority(n_enabled: int) -> int:
    return n_enabled // 2 + 1


def _metrics_row(verdicts: pd.Series, labels: CampaignLabels, ranking: Sequence[str] | None = None) -> dict:
    counts = confusion(verdicts, labels.malicious)
    row = {
        "tp": counts.tp,
        "fp": counts.fp,
        "tn": counts.tn,
        "fn": counts.fn,
        "f1": f1(counts),
        "mcc": mcc(counts),
        "coverage": attack_coverage(verdicts, labels).summary,
    }
    if ranking is not None:
        row["adp"] = adp(ranking, labels)
    return row


def _bits(alerts: pd.DataFrame) -> tuple[np.ndarray, pd.Index]:
    return alerts[list(DETECTOR_COLUMNS)].to_numpy(dtype=np.int64), pd.Index(alerts["node_id"].astype(str))


def detector_group_ablation(alerts: pd.DataFrame, labels: CampaignLabels) -> pd.DataFrame:
    """
    One row per non-empty combination of detector groups, voted with a simple
    majority of the enabled detectors, plus one row per standalone detector.
    """
    bits, index = _bits(alerts)
    rows = []
    names = list(DETECTOR_GROUPS)
    for size in range(len(names), 0, -1):
        for combo in combinations(names, size):
            cols = [c for g in combo for c in DETECTOR_GROUPS[g]]
            need = majority(len(cols))
            verdicts = pd.Series(bits[:, cols].sum(axis=1) >= need, index=index)
            removed = [g for g in names if g not in combo]
            rows.append(
                {
                    "variant": "full" if not removed else "without " + "+".join(removed),
                    "detectors": ",".join(DETECTOR_COLUMNS[c] for c in cols),
                    "threshold": need,
                    **_metrics_row(verdicts, labels),
                }
            )
    for i, col in enumerate(DETECTOR_COLUMNS):
        verdicts = pd.Series(bits[:, i] == 1, index=index)
        rows.append({"variant": f"only {col}", "detectors": col, "threshold": 1, **_metrics_row(verdicts, labels)})
    return pd.DataFrame(rows)


def threshold_sweep(alerts: pd.DataFrame, labels: CampaignLabels) -> pd.DataFrame:
    """TP/FP/F1/MCC for every vote threshold 1..7 over the same detector bits."""
    bits, index = _bits(alerts)
    votes = bits.sum(axis=1)
    rows = []
    for t_v in range(1, NUM_DETECTORS + 1):
        verdicts = pd.Series(votes >= t_v, index=index)
        rows.append({"vote_threshold": t_v, **_metrics_row(verdicts, labels)})
    return pd.DataFrame(rows)


def _variant_row(
    name: str,
    benign_raw: pd.DataFrame,
    test_raw: pd.DataFrame,
    labels: CampaignLabels,
    config: FusionConfig,
    disabled_views: Sequence[str] = (),
) -> dict:
    model = fit_fusion(benign_raw, config, disabled_views)
    alerts = model.detect(test_raw)
    verdicts = pd.Series((alerts["verdict"] == MALICIOUS).to_numpy(), index=alerts["node_id"].astype(str))
    return {"variant": name, **_metrics_row(verdicts, labels, list(alerts["node_id"].astype(str)))}


def view_ablation(
    benign_raw: pd.DataFrame, test_raw: pd.DataFrame, labels: CampaignLabels, config: FusionConfig
) -> pd.DataFrame:
    """Full system and one row per disabled view."""
    rows = [_variant_row("all views", benign_raw, test_raw, labels, config)]
    for view in VIEWS:
        rows.append(_variant_row(f"without {view}", benign_raw, test_raw, labels, config, (view,)))
    return pd.DataFrame(rows)


def normalizer_ablation(
    benign_raw: pd.DataFrame, test_raw: pd.DataFrame, labels: CampaignLabels, config: FusionConfig
) -> pd.DataFrame:
    rows = [
        _variant_row(variant, benign_raw, test_raw, labels, replace(config, normalizer=variant))
        for variant in VARIANTS
    ]
    return pd.DataFrame(rows)


def alpha_sweep(
    benign_raw: pd.DataFrame,
    test_raw: pd.DataFrame,
    labels: CampaignLabels,
    config: FusionConfig,
    alphas: Sequence[float] = ALPHAS,
) -> pd.DataFrame:
    rows = []
    for alpha in alphas:
        row = _variant_row(f"alpha={alpha:g}", benign_raw, test_raw, labels, replace(config, alpha=alpha))
        rows.append({"alpha": alpha, **row})
    return pd.DataFrame(rows)


def run_ablations(
    alerts: pd.DataFrame,
    benign_raw: pd.DataFrame,
    test_raw: pd.DataFrame,
    labels: CampaignLabels,
    config: FusionConfig,
) -> dict[str, pd.DataFrame]:
    tables = {
        "detector_groups": detector_group_ablation(alerts, labels),
        "threshold_sweep": threshold_sweep(alerts, labels),
        "views": view_ablation(benign_raw, test_raw, labels, config),
        "normalizers": normalizer_ablation(benign_raw, test_raw, labels, config),
        "alpha": alpha_sweep(benign_raw, test_raw, labels, config),
    }
    for name, table in tables.items():
        logger.info("Ablation %s: %d rows", name, len(table))
    return tables
