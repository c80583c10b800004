import pandas as pd
import streamlit as st

from src.charts.alert_charts import (
    loss_curves,
    threshold_sweep_chart,
    triplet_scatter,
    vote_histogram,
)
from src.components.alert_table import render_alert_table
from src.data.load import load_ablation, load_alerts, load_losses, load_report, load_trace
from src.fusion.detectors import NORM_COLUMNS


def _sidebar_workdir() -> str:
    return st.sidebar.text_input("Work directory", "work")


# ==========================
#        ALERTS PAGE
# ==========================
def render_alerts():
    workdir = _sidebar_workdir()

    st.title("Provenance Alerts")
    st.caption("Three-view anomaly scores fused by seven calibrated detectors")

    alerts = load_alerts(workdir)
    if alerts.empty:
        st.warning(f"No alerts in {workdir}/detect yet. Run `python -m src.cli run` first.")
        return

    # ---- Sidebar ----
    vote_threshold = st.sidebar.slider("Vote threshold T_v", 1, 7, 4)
    only_flagged = st.sidebar.checkbox("Only flagged nodes", value=False)
    top_n = st.sidebar.number_input("Rows", min_value=10, max_value=5000, value=100, step=10)

    flagged = alerts[alerts["votes"] >= vote_threshold]
    c1, c2, c3 = st.columns(3)
    c1.metric("Test nodes", len(alerts))
    c2.metric("Flagged", len(flagged))
    c3.metric("Max votes", int(alerts["votes"].max()))

    view = alerts.assign(verdict=["malicious" if v >= vote_threshold else "benign" for v in alerts["votes"]])
    render_alert_table(view, only_flagged=only_flagged, top_n=int(top_n))

    left, right = st.columns(2)
    left.plotly_chart(vote_histogram(view, vote_threshold), use_container_width=True)
    x = right.selectbox("x", list(NORM_COLUMNS), index=0)
    y = right.selectbox("y", list(NORM_COLUMNS), index=2)
    right.plotly_chart(triplet_scatter(view, x, y), use_container_width=True)

    # -----------------------------------------
    #   SCORING TRACE FOR ONE NODE
    # -----------------------------------------
    trace = load_trace(workdir)
    if not trace.empty:
        st.subheader("Scoring trace")
        node = st.selectbox("Node", list(trace["node_id"].head(int(top_n))))
        st.dataframe(trace[trace["node_id"] == node], hide_index=True, use_container_width=True)


# ==========================
#      EVALUATION PAGE
# ==========================
def render_evaluation():
    workdir = _sidebar_workdir()
    st.title("Evaluation")

    report = load_report(workdir)
    if report is None:
        st.warning(f"No evaluation report in {workdir}/eval yet.")
    else:
        cols = st.columns(4)
        for col, key in zip(cols, ["tp", "fp", "tn", "fn"]):
            col.metric(key.upper(), report[key])
        cols = st.columns(4)
        cols[0].metric("F1", f"{report['f1']:.3f}")
        cols[1].metric("MCC", f"{report['mcc']:.3f}")
        cols[2].metric("ADP", f"{report['adp']:.3f}")
        cols[3].metric("Coverage", report["coverage"])
        st.dataframe(
            pd.DataFrame({"campaign": list(report["campaigns"]), "detected": list(report["campaigns"].values())}),
            hide_index=True,
        )

    sweep = load_ablation(workdir, "threshold_sweep")
    if not sweep.empty:
        st.plotly_chart(threshold_sweep_chart(sweep), use_container_width=True)

    for name in ("detector_groups", "views", "normalizers", "alpha"):
        table = load_ablation(workdir, name)
        if not table.empty:
            st.subheader(name.replace("_", " ").title())
            st.dataframe(table, hide_index=True, use_container_width=True)

    losses = load_losses(workdir)
    if not losses.empty:
        st.plotly_chart(loss_curves(losses), use_container_width=True)
