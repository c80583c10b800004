# src/data/load.py
from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import streamlit as st

from src.checkpoints import Workdir
from src.fusion.detectors import ALERT_COLUMNS, DETECTOR_COLUMNS, NORM_COLUMNS
from src.scoring.views import SCORE_COLUMNS


@st.cache_data
def load_alerts(workdir: str) -> pd.DataFrame:
    """
    Load the ranked alert report of a work directory.
    Expected columns: node_id, s_*_norm, d1..d7, votes, verdict
    """
    path = Workdir(Path(workdir)).alerts

    # Guard clause
    if not path.exists():
        return pd.DataFrame(columns=list(ALERT_COLUMNS))

    df = pd.read_csv(path, dtype={"node_id": str, "verdict": str}, keep_default_na=False)

    # Clean types
    for col in NORM_COLUMNS:
        df[col] = pd.to_numeric(df[col], errors="coerce")
    for col in (*DETECTOR_COLUMNS, "votes"):
        df[col] = pd.to_numeric(df[col], errors="coerce").fillna(0).astype(int)

    return df.dropna(subset=["node_id", *NORM_COLUMNS])


@st.cache_data
def load_trace(workdir: str) -> pd.DataFrame:
    """Alert records with raw scores; empty when detect has not run."""
    path = Workdir(Path(workdir)).trace
    if not path.exists():
        return pd.DataFrame(columns=["node_id", *SCORE_COLUMNS, "vote_vector"])
    return pd.read_csv(path, dtype={"node_id": str, "verdict": str, "vote_vector": str}, keep_default_na=False)


@st.cache_data
def load_report(workdir: str) -> dict | None:
    path = Workdir(Path(workdir)).report_json
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


@st.cache_data
def load_ablation(workdir: str, name: str) -> pd.DataFrame:
    path = Workdir(Path(workdir)).ablation(name)
    if not path.exists():
        return pd.DataFrame()
    return pd.read_csv(path)


@st.cache_data
def load_losses(workdir: str) -> pd.DataFrame:
    path = Workdir(Path(workdir)).losses
    if not path.exists():
        return pd.DataFrame(columns=["model", "epoch", "loss"])
    return pd.read_csv(path)
