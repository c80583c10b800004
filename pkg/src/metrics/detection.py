# src/metrics/detection.py
"""
Detection metrics over node verdicts and the alert ranking: confusion counts,
F1, MCC, attack-campaign coverage and ADP (area under the detection-precision
curve).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import pandas as pd
from sklearn.metrics import confusion_matrix

from src.errors import MissingVerdict, NoCampaigns, ProvFusionError

logger = logging.getLogger(__name__)


# ---- labels -----------------------------------------------------------------


@dataclass(frozen=True)
class CampaignLabels:
    """campaign id -> malicious node ids; every node belongs to at most one campaign."""

    campaigns: Mapping[str, frozenset[str]]

    def __post_init__(self) -> None:
        seen: dict[str, str] = {}
        for cid, nodes in self.campaigns.items():
            if not nodes:
                raise ProvFusionError(f"campaign {cid!r} has no nodes")
            for node in nodes:
                if node in seen:
                    raise ProvFusionError(f"node {node!r} is in campaigns {seen[node]!r} and {cid!r}")
                seen[node] = cid
        object.__setattr__(self, "campaigns", MappingProxyType(dict(sorted(self.campaigns.items()))))

    def __len__(self) -> int:
        return len(self.campaigns)

    @property
    def malicious(self) -> frozenset[str]:
        return frozenset().union(*self.campaigns.values()) if self.campaigns else frozenset()

    def campaign_of(self) -> dict[str, str]:
        return {node: cid for cid, nodes in self.campaigns.items() for node in nodes}

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "CampaignLabels":
        grouped: dict[str, set[str]] = {}
        for cid, node in pairs:
            grouped.setdefault(cid, set()).add(node)
        return cls({cid: frozenset(nodes) for cid, nodes in grouped.items()})


def read_labels(path: str | Path) -> CampaignLabels:
    """Line-delimited `campaign_id<TAB>node_id` pairs; blank and `#` lines skipped."""
    pairs = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or not all(parts):
                raise ProvFusionError(f"{path}:{lineno}: expected campaign_id<TAB>node_id")
            pairs.append((parts[0], parts[1]))
    return CampaignLabels.from_pairs(pairs)


def write_labels(path: str | Path, labels: CampaignLabels) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for cid, nodes in labels.campaigns.items():
            for node in sorted(nodes):
                fh.write(f"{cid}\t{node}\n")


# ---- confusion, F1, MCC -----------------------------------------------------


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be nonnegative")


def confusion(verdicts: Mapping[str, bool] | pd.Series, malicious: Iterable[str]) -> ConfusionCounts:
    """
    Count outcomes over every node with a verdict. Nodes not in `malicious`
    are benign; a malicious node without a verdict is an error.
    """
    verdicts = pd.Series(verdicts, dtype=bool)
    malicious = set(malicious)
    missing = malicious - set(verdicts.index)
    if missing:
        raise MissingVerdict(f"{len(missing)} labeled nodes have no verdict, e.g. {sorted(missing)[:3]}")
    if verdicts.empty:
        return ConfusionCounts(0, 0, 0, 0)
    y_true = verdicts.index.isin(list(malicious))
    y_pred = verdicts.to_numpy(dtype=bool)
    tn, fp, fn, tp = confusion_matrix(y_true, y_pred, labels=[False, True]).ravel()
    return ConfusionCounts(tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn))


def mcc(counts: ConfusionCounts) -> float:
    tp, fp, tn, fn = (float(x) for x in (counts.tp, counts.fp, counts.tn, counts.fn))
    denom = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / denom


def f1(counts: ConfusionCounts) -> float:
    denom = 2 * counts.tp + counts.fp + counts.fn
    if counts.tp == 0 or denom == 0:
        return 0.0
    return 2 * counts.tp / denom


# ---- coverage ---------------------------------------------------------------


@dataclass(frozen=True)
class CoverageReport:
    detected: Mapping[str, bool]

    @property
    def count(self) -> int:
        return sum(self.detected.values())

    @property
    def total(self) -> int:
        return len(self.detected)

    @property
    def summary(self) -> str:
        return f"{self.count}/{self.total}"


def attack_coverage(verdicts: Mapping[str, bool] | pd.Series, labels: CampaignLabels) -> CoverageReport:
    """A campaign is detected when at least one of its nodes is flagged."""
    flagged = {n for n, v in dict(verdicts).items() if v}
    return CoverageReport({cid: bool(nodes & flagged) for cid, nodes in labels.campaigns.items()})


# ---- ADP --------------------------------------------------------------------


def detection_precision_points(ranking: Sequence[str], labels: CampaignLabels) -> list[tuple[Fraction, Fraction]]:
    """(precision, detected-campaign fraction) for every prefix of the ranking."""
    if len(labels) == 0:
        raise NoCampaigns("ADP needs at least one attack campaign")
    campaign_of = labels.campaign_of()
    k = len(labels)
    found: set[str] = set()
    hits = 0
    points = []
    for i, node in enumerate(ranking, start=1):
        cid = campaign_of.get(node)
        if cid is not None:
            hits += 1
            found.add(cid)
        points.append((Fraction(hits, i), Fraction(len(found), k)))
    return points


def adp_exact(ranking: Sequence[str], labels: CampaignLabels) -> Fraction:
    """
    Integral over p in [0, 1] of D(p) = max detected fraction over prefixes
    with precision >= p (0 where no prefix reaches p).
    """
    best: dict[Fraction, Fraction] = {}
    for precision, detected in detection_precision_points(ranking, labels):
        if detected > best.get(precision, Fraction(-1)):
            best[precision] = detected
    levels = sorted(best, reverse=True)
    area = Fraction(0)
    running = Fraction(0)
    for j, q in enumerate(levels):
        running = max(running, best[q])
        nxt = levels[j + 1] if j + 1 < len(levels) else Fraction(0)
        area += (q - nxt) * running
    return area


def adp(ranking: Sequence[str], labels: CampaignLabels) -> float:
    return float(adp_exact(ranking, labels))


# ---- report -----------------------------------------------------------------


@dataclass(frozen=True)
class EvaluationReport:
    counts: ConfusionCounts
    f1: float
    mcc: float
    adp: float
    coverage: CoverageReport

    def to_dict(self) -> dict:
        return {
            **asdict(self.counts),
            "f1": self.f1,
            "mcc": self.mcc,
            "adp": self.adp,
            "coverage": self.coverage.summary,
            "campaigns": dict(self.coverage.detected),
        }

    def to_text(self) -> str:
        c = self.counts
        lines = [
            f"TP={c.tp} FP={c.fp} TN={c.tn} FN={c.fn}",
            f"F1={self.f1:.4f} MCC={self.mcc:.4f} ADP={self.adp:.4f}",
            f"Attack coverage: {self.coverage.summary}",
        ]
        lines += [
            f"  {cid}: {'detected' if hit else 'missed'}" for cid, hit in self.coverage.detected.items()
        ]
        return "\n".join(lines)

    def save(self, path: str | Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")


def evaluate_alerts(alerts: pd.DataFrame, labels: CampaignLabels) -> EvaluationReport:
    """Metrics for a ranked alert table (columns node_id, verdict)."""
    verdicts = pd.Series(
        (alerts["verdict"] == "malicious").to_numpy(), index=alerts["node_id"].astype(str)
    )
    counts = confusion(verdicts, labels.malicious)
    report = EvaluationReport(
        counts=counts,
        f1=f1(counts),
        mcc=mcc(counts),
        adp=adp(list(alerts["node_id"].astype(str)), labels),
        coverage=attack_coverage(verdicts, labels),
    )
    logger.info("Confusion Matrix → TN:%d FP:%d FN:%d TP:%d", counts.tn, counts.fp, counts.fn, counts.tp)
    logger.info("F1:%.4f MCC:%.4f ADP:%.4f coverage:%s", report.f1, report.mcc, report.adp, report.coverage.summary)
    return report
