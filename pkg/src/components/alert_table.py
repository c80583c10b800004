import pandas as pd

from src.fusion.detectors import DETECTOR_COLUMNS, NORM_COLUMNS, vote_vector

# -----------------------------------
#      DISPLAY COLUMNS
# -----------------------------------
DISPLAY_NAMES = {
    "node_id": "Node",
    "s_attr_norm": "S'attr",
    "s_struc_norm": "S'struc",
    "s_causal_norm": "S'causal",
    "vote_vector": "D1..D7",
    "votes": "V",
    "verdict": "Verdict",
}


def format_alert_table(alerts: pd.DataFrame, only_flagged: bool = False, top_n: int | None = None) -> pd.DataFrame:
    """
    Analyst view of the ranked alerts:
    - normalized triplet rounded to 2 places
    - detector bits collapsed into a vote vector string like 1011101
    - rank kept from the alert report order
    """
    if alerts.empty:
        return pd.DataFrame(columns=["Rank", *DISPLAY_NAMES.values()])

    table = alerts.copy()
    if only_flagged:
        table = table[table["verdict"] == "malicious"]

    table["vote_vector"] = [vote_vector(row) for row in table[list(DETECTOR_COLUMNS)].to_numpy()]
    for col in NORM_COLUMNS:
        table[col] = table[col].round(2)

    table = table[list(DISPLAY_NAMES)].rename(columns=DISPLAY_NAMES)
    table.insert(0, "Rank", range(1, len(table) + 1))
    if top_n is not None:
        table = table.head(top_n)
    return table


def render_alert_table(alerts: pd.DataFrame, only_flagged: bool = False, top_n: int | None = None):
    """Render the ranked alert table in Streamlit."""
    import streamlit as st

    table = format_alert_table(alerts, only_flagged=only_flagged, top_n=top_n)

    st.subheader("Ranked Alerts")
    st.dataframe(table, hide_index=True, use_container_width=True)
