from __future__ import annotations

import json
import random
from fractions import Fraction

import pandas as pd
import pytest

from src.errors import MissingVerdict, NoCampaigns, ProvFusionError
from src.metrics.detection import (
    CampaignLabels,
    ConfusionCounts,
    adp,
    adp_exact,
    attack_coverage,
    confusion,
    evaluate_alerts,
    f1,
    mcc,
    read_labels,
    write_labels,
)


def labels_of(**campaigns: list[str]) -> CampaignLabels:
    return CampaignLabels({cid: frozenset(nodes) for cid, nodes in campaigns.items()})


def _brute_adp(ranking: list[str], labels: CampaignLabels) -> Fraction:
    """Evaluate D(p) at the midpoint of every interval between attainable precisions."""
    campaign_of = labels.campaign_of()
    prefixes = []
    found, hits = set(), 0
    for i, node in enumerate(ranking, start=1):
        if node in campaign_of:
            hits += 1
            found.add(campaign_of[node])
        prefixes.append((Fraction(hits, i), Fraction(len(found), len(labels))))
    cuts = sorted({Fraction(0), Fraction(1), *(p for p, _ in prefixes)})
    area = Fraction(0)
    for lo, hi in zip(cuts, cuts[1:]):
        mid = (lo + hi) / 2
        reach = [d for p, d in prefixes if p >= mid]
        area += (hi - lo) * (max(reach) if reach else 0)
    return area


# ---- confusion, F1, MCC ---------------------------------------------------------


def test_confusion_counts():
    verdicts = {"a": True, "b": False, "c": True, "d": False, "e": True}
    assert confusion(verdicts, {"a", "b"}) == ConfusionCounts(tp=1, fp=2, tn=1, fn=1)
    assert confusion({"a": True, "b": False}, {"a"}) == ConfusionCounts(1, 0, 1, 0)
    assert confusion({"a": True, "b": True, "c": True}, {"a"}) == ConfusionCounts(1, 2, 0, 0)


def test_missing_verdict():
    with pytest.raises(MissingVerdict):
        confusion({"a": True}, {"a", "ghost"})


def test_mcc_values():
    assert mcc(ConfusionCounts(tp=24, fp=1, tn=281_500, fn=44)) == pytest.approx(0.58, abs=0.01)
    assert mcc(ConfusionCounts(tp=5, fp=0, tn=9, fn=0)) == pytest.approx(1.0)
    assert mcc(ConfusionCounts(tp=0, fp=9, tn=0, fn=5)) == pytest.approx(-1.0)
    assert mcc(ConfusionCounts(0, 0, 10, 0)) == 0.0


def test_f1_values():
    assert f1(ConfusionCounts(tp=24, fp=1, tn=281_500, fn=44)) == pytest.approx(0.52, abs=0.005)
    assert f1(ConfusionCounts(tp=3, fp=0, tn=4, fn=0)) == 1.0
    assert f1(ConfusionCounts(tp=0, fp=3, tn=4, fn=2)) == 0.0


# ---- ADP ----------------------------------------------------------------------------


def test_adp_top_hit_is_perfect():
    assert adp(["m1", "b1", "b2"], labels_of(c1=["m1"])) == 1.0


def test_adp_two_node_example():
    assert adp_exact(["b1", "m1"], labels_of(c1=["m1"])) == Fraction(1, 2)


def test_adp_without_malicious_nodes_ranked():
    assert adp(["b1", "b2"], labels_of(c1=["m1"])) == 0.0


def test_adp_matches_interval_oracle():
    rnd = random.Random(7)
    for _ in range(500):
        nodes = [f"n{i}" for i in range(rnd.randint(1, 20))]
        rnd.shuffle(nodes)
        # campaign nodes may be missing from the ranking entirely
        pool = nodes + [f"ghost{i}" for i in range(3)]
        malicious = rnd.sample(pool, rnd.randint(1, len(pool)))
        k = rnd.randint(1, len(malicious))
        campaigns = {f"c{j}": [] for j in range(k)}
        for i, node in enumerate(malicious):
            campaigns[f"c{i % k}"].append(node)
        labels = labels_of(**campaigns)
        assert adp_exact(nodes, labels) == _brute_adp(nodes, labels)


def test_adp_needs_campaigns():
    with pytest.raises(NoCampaigns):
        adp(["a"], CampaignLabels({}))


# ---- coverage -------------------------------------------------------------------------


def test_coverage():
    labels = labels_of(c1=["a1", "a2", "a3", "a4", "a5"], c2=["b1"], c3=["c1", "c2"])
    verdicts = {"a1": False, "a2": True, "b1": False, "c1": False, "c2": True, "x": True}
    report = attack_coverage(verdicts, labels)
    assert report.summary == "2/3"
    assert dict(report.detected) == {"c1": True, "c2": False, "c3": True}
    assert attack_coverage({n: False for n in labels.malicious}, labels).summary == "0/3"


# ---- labels and report ------------------------------------------------------------------


def test_labels_must_be_disjoint_and_non_empty():
    with pytest.raises(ProvFusionError):
        labels_of(c1=["a"], c2=["a"])
    with pytest.raises(ProvFusionError):
        labels_of(c1=[])


def test_labels_file(tmp_path):
    labels = labels_of(c2=["z", "y"], c1=["a"])
    path = tmp_path / "labels.tsv"
    write_labels(path, labels)
    assert path.read_text(encoding="utf-8") == "c1\ta\nc2\ty\nc2\tz\n"
    assert read_labels(path) == labels

    path.write_text("# header\nc1 a\n", encoding="utf-8")
    with pytest.raises(ProvFusionError):
        read_labels(path)


def test_evaluate_alerts_report(tmp_path):
    alerts = pd.DataFrame(
        {
            "node_id": ["m1", "b1", "m2", "b2"],
            "verdict": ["malicious", "malicious", "benign", "benign"],
        }
    )
    labels = labels_of(c1=["m1"], c2=["m2"])
    report = evaluate_alerts(alerts, labels)
    assert report.counts == ConfusionCounts(tp=1, fp=1, tn=1, fn=1)
    assert report.f1 == pytest.approx(0.5)
    assert report.coverage.summary == "1/2"
    assert report.adp == pytest.approx(adp(["m1", "b1", "m2", "b2"], labels))

    report.save(tmp_path / "report.json")
    saved = json.loads((tmp_path / "report.json").read_text(encoding="utf-8"))
    assert {"tp", "fp", "tn", "fn", "f1", "mcc", "adp", "coverage"} <= set(saved)
    assert "Attack coverage: 1/2" in report.to_text()
