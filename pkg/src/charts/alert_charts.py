from __future__ import annotations

import pandas as pd
import plotly.express as px


def vote_histogram(alerts: pd.DataFrame, vote_threshold: int = 4):
    """Bar chart of how many nodes received each vote count 0..7."""

    counts = (
        alerts["votes"].value_counts().reindex(range(8), fill_value=0)
        if not alerts.empty
        else pd.Series(0, index=range(8))
    )
    df = pd.DataFrame({"votes": counts.index, "nodes": counts.values})
    df["side"] = ["flagged" if v >= vote_threshold else "below T_v" for v in df["votes"]]

    fig = px.bar(df, x="votes", y="nodes", color="side", title="Nodes per vote count", log_y=True)
    fig.update_layout(height=380, xaxis_title="V (detectors firing)", yaxis_title="nodes")
    return fig


def triplet_scatter(alerts: pd.DataFrame, x: str = "s_attr_norm", y: str = "s_causal_norm"):
    """Two normalized views against each other, colored by verdict and sized by votes."""

    if alerts.empty:
        empty_df = pd.DataFrame({x: [], y: []})
        return px.scatter(empty_df, x=x, y=y, title="Normalized scores")

    fig = px.scatter(
        alerts,
        x=x,
        y=y,
        color="verdict",
        size=alerts["votes"] + 1,
        hover_data=["node_id", "votes"],
        title=f"{x} vs {y}",
    )
    fig.update_layout(height=420)
    return fig


def threshold_sweep_chart(sweep: pd.DataFrame):
    """TP and FP as the vote threshold rises from 1 to 7."""

    if sweep.empty or "vote_threshold" not in sweep.columns:
        empty_df = pd.DataFrame({"vote_threshold": [], "count": [], "metric": []})
        return px.line(empty_df, x="vote_threshold", y="count", color="metric", title="Vote threshold sweep")

    long = sweep.melt(id_vars="vote_threshold", value_vars=["tp", "fp"], var_name="metric", value_name="count")
    fig = px.line(long, x="vote_threshold", y="count", color="metric", markers=True, title="Vote threshold sweep")
    fig.update_layout(height=380, xaxis_title="T_v", yaxis_title="nodes")
    return fig


def loss_curves(losses: pd.DataFrame):
    fig = px.line(losses, x="epoch", y="loss", color="model", title="Training loss")
    fig.update_layout(height=360)
    return fig
