# src/fusion/normalize.py
"""
Map raw view scores onto the benign validation distribution.

The default `percentile` variant is the right-continuous empirical CDF:
normalize(s) = (# benign <= s) / |benign|, so the benign max maps to 1.0.
`minmax`, `zscore` and `robust` are ablation alternatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import pandas as pd

from src.errors import EmptyBenign

VARIANTS = ("percentile", "minmax", "zscore", "robust")


def _span(value: float) -> float:
    return value if value > 0 else 1.0


@dataclass(frozen=True)
class Normalizer:
    variant: str
    stats: Mapping[str, Mapping[str, object]]  # view column -> fitted statistics

    def normalize(self, column: str, scores) -> np.ndarray:
        s = np.asarray(scores, dtype=np.float64)
        st = self.stats[column]
        if self.variant == "percentile":
            benign = np.asarray(st["sorted"], dtype=np.float64)
            return np.searchsorted(benign, s, side="right") / benign.size
        if self.variant == "minmax":
            return (s - st["min"]) / _span(st["max"] - st["min"])
        if self.variant == "zscore":
            return (s - st["mean"]) / _span(st["std"])
        if self.variant == "robust":
            return (s - st["median"]) / _span(st["iqr"])
        raise ValueError(f"unknown normalizer {self.variant!r}")

    def transform(self, raw: pd.DataFrame) -> pd.DataFrame:
        """Normalize every fitted column; output columns get a `_norm` suffix."""
        return pd.DataFrame(
            {f"{col}_norm": self.normalize(col, raw[col]) for col in self.stats},
            index=raw.index,
        )

    def to_dict(self) -> dict:
        return {"variant": self.variant, "stats": {k: dict(v) for k, v in self.stats.items()}}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Normalizer":
        return cls(variant=data["variant"], stats={k: dict(v) for k, v in data["stats"].items()})


def _fit_column(values: np.ndarray, variant: str) -> dict:
    if variant == "percentile":
        return {"sorted": np.sort(values).tolist()}
    if variant == "minmax":
        return {"min": float(values.min()), "max": float(values.max())}
    if variant == "zscore":
        return {"mean": float(values.mean()), "std": float(values.std())}
    if variant == "robust":
        q1, med, q3 = np.percentile(values, [25, 50, 75])
        return {"median": float(med), "iqr": float(q3 - q1)}
    raise ValueError(f"unknown normalizer {variant!r}; expected one of {VARIANTS}")


def fit_normalizer(benign: pd.DataFrame | Mapping[str, np.ndarray], variant: str = "percentile") -> Normalizer:
    """Fit per-view statistics on benign validation scores only."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown normalizer {variant!r}; expected one of {VARIANTS}")
    columns = list(benign.columns) if isinstance(benign, pd.DataFrame) else list(benign)
    stats = {}
    for col in columns:
        values = np.asarray(benign[col], dtype=np.float64)
        if values.size == 0:
            raise EmptyBenign(f"no benign scores for {col}")
        stats[col] = _fit_column(values, variant)
    return Normalizer(variant=variant, stats=stats)
