from __future__ import annotations

import numpy as np
import pytest

from src.config import ScoringConfig
from src.data.events import EVENT_INDEX, EventType
from src.data.graph import Node, _freeze, build_graph
from src.errors import DegenerateGraph, ShapeMismatch
from src.models.causal import (
    decoder_loss,
    edge_inputs,
    edge_losses,
    load_decoder,
    save_decoder,
    train_causal_decoder,
)
from src.models.nncore import gradient_check
from src.scoring.views import causal_scores, edge_scores
from tests.conftest import F, N, P, ev

READ = EVENT_INDEX[EventType.READ]


def _typed_graph(processes: int = 20):
    """Process->file pairs are always READ, process->netflow SENDTO, process->process CLONE."""
    events = []
    for i in range(processes):
        events.append(ev(f"p{i:02d}", f"f{i:02d}", "READ", 3 * i, P, F, "/bin/cat", "/etc/hosts"))
        events.append(ev(f"p{i:02d}", f"n{i:02d}", "SENDTO", 3 * i + 1, P, N, "/bin/cat", "10.0.0.1:53"))
        if i:
            events.append(ev("p00", f"p{i:02d}", "CLONE", 3 * i + 2, P, P, "/bin/cat", "/bin/cat"))
    return build_graph(events)


def _type_embeddings(graph) -> np.ndarray:
    return np.eye(3)[graph.index.node_types]


@pytest.fixture(scope="module")
def trained():
    graph = _typed_graph()
    emb = _type_embeddings(graph)
    decoder, losses = train_causal_decoder(
        graph, emb, ScoringConfig(decoder_epochs=300), seed=0, lr=1e-2
    )
    return graph, emb, decoder, losses


def test_decoder_predicts_read_for_process_to_file(trained):
    _, _, decoder, _ = trained
    process, file = np.eye(3)[[0]], np.eye(3)[[1]]
    assert decoder.logits(process, file)[0, READ] > 0
    assert decoder.logits(process, process)[0, READ] < 0


def test_decoder_loss_decreases(trained):
    _, _, _, losses = trained
    assert len(losses) == 300
    assert losses[-1] < losses[0]


def test_decoder_training_is_deterministic():
    graph = _typed_graph(5)
    emb = _type_embeddings(graph)
    config = ScoringConfig(decoder_epochs=10)
    first, _ = train_causal_decoder(graph, emb, config, seed=4)
    second, _ = train_causal_decoder(graph, emb, config, seed=4)
    a, b = first.mlp.named(), second.mlp.named()
    assert all(np.array_equal(a[k], b[k]) for k in a)


def test_unseen_event_types_get_no_weight(trained):
    _, _, decoder, _ = trained
    seen = {EVENT_INDEX[t] for t in (EventType.READ, EventType.SENDTO, EventType.CLONE)}
    for i, w in enumerate(decoder.weights):
        assert (w > 0) == (i in seen)


def test_uniform_weighting_option():
    graph = _typed_graph(4)
    decoder, _ = train_causal_decoder(
        graph, _type_embeddings(graph), ScoringConfig(decoder_epochs=1, class_weighting=False), seed=0
    )
    assert np.array_equal(decoder.weights, np.ones(10))


def test_decoder_gradients(trained):
    graph, emb, decoder, _ = trained
    idx = graph.index
    inputs = edge_inputs(emb, idx.src, idx.dst)
    _, grads = decoder_loss(decoder, inputs, idx.edge_types)
    params = decoder.mlp.named()
    errors = gradient_check(lambda: decoder_loss(decoder, inputs, idx.edge_types)[0], params, grads)
    assert max(errors.values()) < 1e-6


def test_bad_inputs():
    graph = build_graph([ev("p1", "p1", "CLONE", 0, P, P)])
    with pytest.raises(ShapeMismatch):
        train_causal_decoder(graph, np.zeros((3, 4)), ScoringConfig(decoder_epochs=1), seed=0)
    empty = _freeze({"p1": Node(P, "", 0)}, {})
    with pytest.raises(DegenerateGraph):
        train_causal_decoder(empty, np.zeros((1, 4)), ScoringConfig(decoder_epochs=1), seed=0)


def test_causal_score_is_max_over_incident_edges(trained):
    graph, emb, decoder, _ = trained
    per_edge = edge_scores(graph, emb, decoder)
    scores = causal_scores(graph, emb, decoder)
    for node in graph.nodes:
        incident = [loss for (s, d), loss in per_edge.items() if node in (s, d)]
        assert scores[node] == pytest.approx(max(incident))


def test_isolated_node_scores_zero(trained):
    graph, _, decoder, _ = trained
    nodes = {**graph.nodes, "zz-lonely": Node(F, "/tmp/x", 0)}
    with_isolated = _freeze(dict(nodes), dict(graph.edges))
    emb = _type_embeddings(with_isolated)
    assert causal_scores(with_isolated, emb, decoder)["zz-lonely"] == 0.0


def test_unexpected_event_set_scores_high(trained):
    graph, emb, decoder, _ = trained
    per_edge = edge_scores(graph, emb, decoder)
    pos = graph.index.position
    src, dst = np.array([pos["p03"]] * 2), np.array([pos["f03"]] * 2)
    targets = np.zeros((2, 10))
    targets[0, READ] = 1.0
    targets[1, EVENT_INDEX[EventType.CLONE]] = 1.0
    expected, surprising = edge_losses(decoder, emb, src, dst, targets)
    assert expected < surprising
    assert surprising > per_edge.max()


def test_decoder_checkpoint(tmp_path, trained):
    _, _, decoder, _ = trained
    save_decoder(decoder, tmp_path / "causal.npz")
    loaded = load_decoder(tmp_path / "causal.npz")
    assert np.array_equal(loaded.weights, decoder.weights)
    a, b = decoder.mlp.named(), loaded.mlp.named()
    assert all(np.array_equal(a[k], b[k]) for k in a)
