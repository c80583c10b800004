from __future__ import annotations

import pandas as pd

from src.charts.alert_charts import threshold_sweep_chart, triplet_scatter, vote_histogram
from src.components.alert_table import DISPLAY_NAMES, format_alert_table
from src.fusion.detectors import ALERT_COLUMNS


def alerts_frame() -> pd.DataFrame:
    rows = [
        ("m1", 1.0, 0.3, 1.0, [1, 0, 1, 1, 1, 0, 1], "malicious"),
        ("b1", 0.456, 0.2, 0.1, [0, 0, 0, 1, 0, 0, 0], "benign"),
        ("b2", 0.1, 0.1, 0.1, [0] * 7, "benign"),
    ]
    records = [
        {"node_id": n, "s_attr_norm": a, "s_struc_norm": s, "s_causal_norm": c,
         **{f"d{i + 1}": b for i, b in enumerate(bits)}, "votes": sum(bits), "verdict": v}
        for n, a, s, c, bits, v in rows
    ]
    return pd.DataFrame(records, columns=list(ALERT_COLUMNS))


def test_alert_table_shows_vote_vector():
    table = format_alert_table(alerts_frame())
    assert list(table.columns) == ["Rank", *DISPLAY_NAMES.values()]
    assert list(table["Rank"]) == [1, 2, 3]
    assert table.iloc[0]["D1..D7"] == "1011101"
    assert table.iloc[1]["S'attr"] == 0.46


def test_alert_table_filters():
    assert list(format_alert_table(alerts_frame(), only_flagged=True)["Node"]) == ["m1"]
    assert len(format_alert_table(alerts_frame(), top_n=2)) == 2
    assert format_alert_table(alerts_frame().iloc[:0]).empty


def test_vote_histogram_counts_every_node():
    fig = vote_histogram(alerts_frame(), vote_threshold=4)
    assert sum(sum(trace.y) for trace in fig.data) == 3
    assert {trace.name for trace in fig.data} == {"flagged", "below T_v"}


def test_charts_accept_empty_frames():
    assert triplet_scatter(pd.DataFrame()).layout.title.text == "Normalized scores"
    assert threshold_sweep_chart(pd.DataFrame()).layout.title.text == "Vote threshold sweep"


def test_threshold_sweep_chart_has_tp_and_fp():
    sweep = pd.DataFrame({"vote_threshold": range(1, 8), "tp": [5, 5, 4, 4, 3, 1, 0], "fp": [90, 40, 9, 3, 1, 0, 0]})
    fig = threshold_sweep_chart(sweep)
    assert {trace.name for trace in fig.data} == {"tp", "fp"}
