from __future__ import annotations

import numpy as np
import pytest

from src.data.events import EVENT_INDEX, EventType
from src.data.graph import Edge, Node, build_graph
from src.errors import EmptyCorpus
from src.features.embeddings import EmbeddingTable, load_table, save_table, train_embeddings
from src.features.featurize import (
    attribute_corpus,
    edge_feature,
    node_feature,
    node_feature_matrix,
    type_matrix,
)
from src.features.tokens import tokenize_attribute
from tests.conftest import F, P, ev, two_motif_events


def _cos(a: np.ndarray, b: np.ndarray) -> float:
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def _empty_table(d_attr: int = 4) -> EmbeddingTable:
    return EmbeddingTable(tokens=(), vectors=np.zeros((0, d_attr)), seed=0, d_attr=d_attr)


@pytest.mark.parametrize(
    "text, tokens",
    [
        ("/home/admin/profile", ["home", "admin", "profile"]),
        ("", []),
        ("128.55.12.166|45525", ["128", "55", "12", "166", "45525"]),
        ("10.0.0.1:443", ["10", "0", "0", "1", "443"]),
        ("/usr/bin/Python3 script.py", ["usr", "bin", "python3", "script", "py"]),
    ],
)
def test_tokenize_attribute(text, tokens):
    assert tokenize_attribute(text) == tokens


def test_disjoint_cliques_embed_apart():
    corpus = [["a", "b"]] * 50 + [["x", "y"]] * 50
    table = train_embeddings(corpus, d_attr=16, window=2, epochs=200, seed=1)
    a, b, x = table.vector("a"), table.vector("b"), table.vector("x")
    assert _cos(a, b) > _cos(a, x)


def test_single_token_corpus():
    table = train_embeddings([["solo"]], d_attr=8, epochs=5, seed=0)
    assert len(table) == 1
    assert np.all(np.isfinite(table.vector("solo")))


def test_same_seed_gives_identical_table():
    corpus = [["usr", "bin", "cat"], ["etc", "hosts"], ["usr", "lib", "libc"]] * 5
    first = train_embeddings(corpus, d_attr=8, epochs=10, seed=42)
    second = train_embeddings(corpus, d_attr=8, epochs=10, seed=42)
    assert first.same_as(second)


def test_empty_corpus_and_bad_window():
    with pytest.raises(EmptyCorpus):
        train_embeddings([[], []])
    with pytest.raises(ValueError):
        train_embeddings([["a"]], window=0)


def test_oov_vectors_are_deterministic_unit_vectors():
    table = _empty_table(6)
    vec = table.vector("never-seen")
    assert np.isclose(np.linalg.norm(vec), 1.0)
    assert np.array_equal(vec, _empty_table(6).vector("never-seen"))
    assert table.count_oov(["/a/b", ""]) == 2


def test_table_checkpoint(tmp_path):
    table = train_embeddings([["usr", "bin"], ["etc"]], d_attr=4, epochs=3, seed=3)
    save_table(table, tmp_path / "emb.txt")
    assert load_table(tmp_path / "emb.txt").same_as(table)


def test_process_with_empty_attribute():
    feature = node_feature(Node(P, "", 0), _empty_table(4))
    assert feature.tolist() == [1, 0, 0, 0, 0, 0, 0]


def test_file_node_type_block():
    feature = node_feature(Node(F, "", 0), _empty_table(4))
    assert feature[:3].tolist() == [0, 1, 0]


def test_identical_attributes_share_features():
    graph = build_graph(
        [
            ev("p1", "f1", "READ", 0, P, F, "/bin/cat", "/etc/hosts"),
            ev("p2", "f2", "READ", 1, P, F, "/bin/cat", "/etc/hosts"),
        ]
    )
    table = train_embeddings(attribute_corpus(graph), d_attr=4, epochs=3, seed=0)
    x = node_feature_matrix(graph, table)
    pos = graph.index.position
    assert np.array_equal(x[pos["f1"]], x[pos["f2"]])
    assert np.array_equal(x[pos["p1"]], x[pos["p2"]])
    assert x.shape == (4, 3 + 4)


def test_type_matrix_rows_are_one_hot():
    graph = build_graph(two_motif_events(2))
    assert np.all(type_matrix(graph).sum(axis=1) == 1.0)


def test_edge_feature():
    rw = edge_feature(Edge(frozenset({EventType.READ, EventType.WRITE}), 0))
    assert rw.sum() == 2
    assert rw[EVENT_INDEX[EventType.READ]] == 1 and rw[EVENT_INDEX[EventType.WRITE]] == 1

    clone = edge_feature(Edge(frozenset({EventType.CLONE}), 0))
    assert clone.tolist() == [0] * 9 + [1]

    assert edge_feature(Edge(frozenset(EventType), 0)).tolist() == [1.0] * 10
