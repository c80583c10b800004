from __future__ import annotations

import numpy as np
import pandas as pd
import pytest

from src.config import GmaeConfig
from src.data.graph import build_graph
from src.errors import CheckpointError, DimensionMismatch, EmptyBank, ShapeMismatch
from src.features.embeddings import train_embeddings
from src.features.featurize import attribute_corpus
from src.models.gmae import init_encoder
from src.scoring.knn import build_bank, knn_score, load_bank, save_bank
from src.scoring.views import (
    SCORE_COLUMNS,
    ViewScores,
    attribute_bank,
    attribute_scores,
    load_scores,
    save_scores,
    structural_bank,
    structural_embeddings,
    structural_scores,
)
from tests.conftest import F, N, P, ev, two_motif_events


# ---- kNN ----------------------------------------------------------------------


def test_query_in_bank_scores_zero():
    bank = build_bank(np.array([[0.0, 1.0], [2.0, 2.0]]), k=1)
    assert knn_score(np.array([2.0, 2.0]), bank) == pytest.approx([0.0])


def test_one_dimensional_example():
    bank = build_bank(np.array([[0.0], [1.0], [2.0]]), k=2)
    assert knn_score(np.array([[5.0]]), bank) == pytest.approx([3.5])


def test_matches_brute_force():
    rng = np.random.default_rng(0)
    reference = rng.standard_normal((200, 16))
    queries = rng.standard_normal((25, 16))
    bank = build_bank(reference, k=10)

    dists = np.linalg.norm(queries[:, None, :] - reference[None, :, :], axis=2)
    expected = np.sort(dists, axis=1)[:, :10].mean(axis=1)
    assert np.allclose(knn_score(queries, bank), expected, atol=1e-9)


def test_translation_invariance():
    rng = np.random.default_rng(1)
    reference = rng.standard_normal((50, 4))
    queries = rng.standard_normal((10, 4))
    shift = np.array([3.0, -7.0, 0.5, 10.0])
    plain = knn_score(queries, build_bank(reference, k=5))
    shifted = knn_score(queries + shift, build_bank(reference + shift, k=5))
    assert np.allclose(plain, shifted, atol=1e-9)


def test_bank_errors_and_clamp():
    with pytest.raises(EmptyBank):
        build_bank(np.zeros((0, 3)))
    with pytest.raises(ValueError):
        build_bank(np.zeros((2, 3)), k=0)
    bank = build_bank(np.zeros((3, 2)), k=10)
    assert bank.k == 3
    with pytest.raises(DimensionMismatch):
        knn_score(np.zeros((1, 5)), bank)
    assert knn_score(np.zeros((0, 2)), bank).shape == (0,)


def test_bank_checkpoint(tmp_path):
    bank = build_bank(np.random.default_rng(2).standard_normal((20, 3)), k=4)
    save_bank(bank, tmp_path / "bank.npz")
    loaded = load_bank(tmp_path / "bank.npz")
    assert loaded.k == 4
    assert np.array_equal(loaded.vectors, bank.vectors)


# ---- attribute view -----------------------------------------------------------


def _reference_graph():
    return build_graph(
        [
            ev("p1", "f1", "READ", 0, P, F, "/usr/bin/cat", "/etc/hosts"),
            ev("p2", "f2", "READ", 1, P, F, "/usr/bin/vim", "/home/admin/notes.txt"),
            ev("p3", "n1", "SENDTO", 2, P, N, "/usr/bin/curl", "10.0.0.1:443"),
        ]
    )


def test_known_attribute_scores_zero_and_novel_scores_high():
    reference = _reference_graph()
    table = train_embeddings(attribute_corpus(reference), d_attr=8, epochs=20, seed=0)
    bank = attribute_bank(reference, table, k=1)
    benign = attribute_scores(reference, table, bank)

    test = build_graph(
        [
            ev("t1", "t2", "READ", 0, P, F, "/usr/bin/cat", "/etc/hosts"),
            ev("t1", "t3", "WRITE", 1, P, F, "/usr/bin/cat", "/tmp/zx9q/dropper.elf"),
        ]
    )
    scores = attribute_scores(test, table, bank)
    assert scores["t2"] == pytest.approx(0.0, abs=1e-12)
    assert scores["t3"] > benign.median()


def test_attribute_scores_are_deterministic():
    reference = _reference_graph()
    runs = []
    for _ in range(2):
        table = train_embeddings(attribute_corpus(reference), d_attr=8, epochs=5, seed=3)
        runs.append(attribute_scores(reference, table, attribute_bank(reference, table, k=2)))
    pd.testing.assert_series_equal(runs[0], runs[1])


# ---- structural view ----------------------------------------------------------


def test_unique_motif_scores_above_duplicates():
    config = GmaeConfig(hidden=6, layers=2)
    encoder = init_encoder(3, 6, 2, np.random.default_rng(0))
    reference = build_graph(two_motif_events(5))
    ref_emb = structural_embeddings(reference, encoder, config)
    bank = structural_bank(ref_emb, k=1)

    odd = [
        ev("x1", "xf", "RECVMSG", 100, P, F),
        ev("xf", "xn", "CONNECT", 101, F, N),
        ev("xn", "x1", "EXECUTE", 102, N, P),
    ]
    test = build_graph(two_motif_events(5) + odd)
    scores = structural_scores(test, structural_embeddings(test, encoder, config), bank)

    benign_floor = np.percentile(structural_scores(reference, ref_emb, bank), 10)
    assert scores["p00"] <= benign_floor + 1e-9
    assert scores["x1"] > scores["p00"]


def test_identical_motifs_score_identically():
    config = GmaeConfig(hidden=4, layers=2)
    encoder = init_encoder(3, 4, 2, np.random.default_rng(1))
    graph = build_graph(two_motif_events(4))
    emb = structural_embeddings(graph, encoder, config)
    reference = build_graph(two_motif_events(1))
    bank = structural_bank(structural_embeddings(reference, encoder, config), k=2)
    scores = structural_scores(graph, emb, bank)
    readers = scores[[f"p{i:02d}" for i in range(4)]]
    assert np.allclose(readers, readers.iloc[0])


# ---- score table --------------------------------------------------------------


def test_view_scores_validation_and_checkpoint(tmp_path):
    frame = pd.DataFrame(
        {"s_attr": [0.1, 0.2], "s_struc": [1.0, 0.0], "s_causal": [0.5, 3.0]},
        index=pd.Index(["b", "a"], name="node_id"),
    )
    scores = ViewScores.from_series(frame["s_attr"], frame["s_struc"], frame["s_causal"])
    assert scores.node_ids == ["a", "b"]
    assert tuple(scores.frame.columns) == SCORE_COLUMNS

    save_scores(scores, tmp_path / "scores.csv")
    loaded = load_scores(tmp_path / "scores.csv")
    pd.testing.assert_frame_equal(loaded.frame, scores.frame)

    with pytest.raises(ValueError):
        ViewScores.from_series(frame["s_attr"], -frame["s_struc"] - 1, frame["s_causal"])
    with pytest.raises(ShapeMismatch):
        ViewScores(frame[["s_struc", "s_attr", "s_causal"]])

    (tmp_path / "bad.csv").write_text("node_id,s_attr\n", encoding="utf-8")
    with pytest.raises(CheckpointError):
        load_scores(tmp_path / "bad.csv")


def test_score_file_keeps_na_like_node_ids(tmp_path):
    ids = ["NA", "N/A", "NaN", "null", "p1"]
    values = np.arange(15, dtype=np.float64).reshape(5, 3)
    frame = pd.DataFrame(values, columns=list(SCORE_COLUMNS), index=pd.Index(ids, name="node_id"))
    scores = ViewScores.from_series(frame["s_attr"], frame["s_struc"], frame["s_causal"])
    save_scores(scores, tmp_path / "scores.csv")
    loaded = load_scores(tmp_path / "scores.csv")
    assert loaded.node_ids == sorted(ids)
    pd.testing.assert_frame_equal(loaded.frame, scores.frame)
