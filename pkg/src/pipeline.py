# src/pipeline.py
"""
Pipeline stages: build -> train -> score -> detect -> evaluate, plus synth
and ablate. Each stage reads and writes files under the work directory and
is skipped when its manifest record still matches.
"""

from __future__ import annotations

import logging
from pathlib import Path

import pandas as pd

from src.checkpoints import SPLITS, Workdir
from src.config import PipelineConfig, derive_seed
from src.data.events import read_events
from src.data.graph import ProvenanceGraph, build_graph
from src.data.graph_io import dump_graph, load_graph
from src.data.synth import generate_corpus, write_corpus
from src.errors import ProvFusionError
from src.features.embeddings import load_table, save_table, train_embeddings
from src.features.featurize import attribute_corpus, node_feature_matrix
from src.fusion.ablation import run_ablations
from src.fusion.detectors import (
    ALERT_COLUMNS,
    DETECTOR_COLUMNS,
    fit_fusion,
    load_fusion,
    save_fusion,
    vote_vector,
)
from src.metrics.detection import EvaluationReport, evaluate_alerts, read_labels
from src.models.causal import load_decoder, save_decoder, train_causal_decoder
from src.models.gmae import (
    embeddings_frame,
    load_encoder,
    save_encoder,
    train_semantic,
    train_structural,
)
from src.scoring.knn import load_bank, save_bank
from src.scoring.views import (
    SCORE_COLUMNS,
    ViewModels,
    ViewScores,
    attribute_bank,
    load_scores,
    save_scores,
    score_views,
    semantic_embeddings,
    structural_bank,
    structural_embeddings,
)

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _log_path(config: PipelineConfig, split: str) -> Path:
    return Path(getattr(config.paths, f"{split}_log"))


def _workdir(config: PipelineConfig) -> Workdir:
    return Workdir.at(config.paths.workdir)


# ---- build ------------------------------------------------------------------


def build_stage(config: PipelineConfig, force: bool = False) -> dict[str, ProvenanceGraph]:
    """Parse the three logs and checkpoint one provenance graph per split."""
    work = _workdir(config)
    graphs = {}
    for split in SPLITS:
        log = _log_path(config, split)
        if not log.exists():
            raise FileNotFoundError(f"{split} log not found: {log}")
        out = work.graph(split)
        if not force and work.is_fresh(f"build:{split}", [log], [out], "build"):
            logger.debug("build:%s is up to date", split)
            graphs[split] = load_graph(out)
            continue
        graph = build_graph(read_events(log))
        dump_graph(graph, out)
        work.record(f"build:{split}", [log], [out], "build")
        logger.info("%s graph: %d nodes, %d edges", split, graph.num_nodes, graph.num_edges)
        graphs[split] = graph
    return graphs


# ---- train ------------------------------------------------------------------


def train_stage(config: PipelineConfig, force: bool = False) -> None:
    """
    Train every model on the benign training graph only:
    embedding table, structural and semantic encoders, causal decoder, kNN banks.
    """
    work = _workdir(config)
    inputs = [work.graph("train")]
    outputs = work.model_files()
    config_hash = config.section_hash("featurize", "gmae", "scoring")
    if not force and work.is_fresh("train", inputs, outputs, config_hash):
        logger.info("train is up to date; skipping")
        return
    if not inputs[0].exists():
        raise FileNotFoundError(f"train graph not built: {inputs[0]}")

    graph = load_graph(inputs[0])
    fc = config.featurize
    table = train_embeddings(
        attribute_corpus(graph),
        d_attr=fc.d_attr,
        window=fc.window,
        epochs=fc.epochs,
        negatives=fc.negatives,
        seed=derive_seed(config.seed, "embeddings"),
    )
    features = node_feature_matrix(graph, table)

    structural = train_structural(graph, config.gmae, derive_seed(config.seed, "structural"), features)
    semantic = train_semantic(graph, features, config.gmae, derive_seed(config.seed, "semantic"))
    h_struc = structural_embeddings(graph, structural.encoder, config.gmae, features)
    h_sem = semantic_embeddings(graph, semantic.encoder, features)
    decoder, decoder_losses = train_causal_decoder(
        graph, h_sem, config.scoring, derive_seed(config.seed, "causal")
    )

    save_table(table, work.embedding_table)
    save_encoder(structural.encoder, work.structural_encoder, {"view": "structural"})
    save_encoder(semantic.encoder, work.semantic_encoder, {"view": "semantic"})
    save_decoder(decoder, work.causal_decoder)
    save_bank(attribute_bank(graph, table, config.scoring.k), work.attr_bank)
    save_bank(structural_bank(h_struc, config.scoring.k), work.struc_bank)

    ids = graph.index.node_ids
    embeddings_frame(ids, h_struc).to_csv(work.node_embeddings("structural"), index=False, float_format=FLOAT_FORMAT)
    embeddings_frame(ids, h_sem).to_csv(work.node_embeddings("semantic"), index=False, float_format=FLOAT_FORMAT)
    losses = pd.concat(
        [
            pd.DataFrame({"model": name, "epoch": range(1, len(vals) + 1), "loss": vals})
            for name, vals in (
                ("structural", structural.losses),
                ("semantic", semantic.losses),
                ("causal", decoder_losses),
            )
        ],
        ignore_index=True,
    )
    losses.to_csv(work.losses, index=False, float_format=FLOAT_FORMAT)
    work.record("train", inputs, outputs, config_hash)
    logger.info("Training done; models in %s", work.models)


def load_models(work: Workdir) -> ViewModels:
    missing = [p for p in work.model_files() if not p.exists()]
    if missing:
        raise FileNotFoundError(f"models not trained: {missing[0]}")
    return ViewModels(
        table=load_table(work.embedding_table),
        structural=load_encoder(work.structural_encoder),
        semantic=load_encoder(work.semantic_encoder),
        decoder=load_decoder(work.causal_decoder),
        attr_bank=load_bank(work.attr_bank),
        struc_bank=load_bank(work.struc_bank),
    )


# ---- score ------------------------------------------------------------------


def score_stage(config: PipelineConfig, split: str, force: bool = False) -> ViewScores:
    if split not in ("validation", "test"):
        raise ValueError(f"score split must be 'validation' or 'test', got {split!r}")
    work = _workdir(config)
    inputs = [work.graph(split), *work.model_files()]
    out = work.scores(split)
    config_hash = config.section_hash("featurize", "gmae", "scoring")
    if not force and work.is_fresh(f"score:{split}", inputs, [out], config_hash):
        logger.info("score:%s is up to date; skipping", split)
        return load_scores(out)
    if not inputs[0].exists():
        raise FileNotFoundError(f"{split} graph not built: {inputs[0]}")

    scores = score_views(load_graph(inputs[0]), load_models(work), config.gmae)
    save_scores(scores, out)
    work.record(f"score:{split}", inputs, [out], config_hash)
    logger.info("Scored %d %s nodes", len(scores), split)
    return scores


# ---- detect -----------------------------------------------------------------


def trace_frame(alerts: pd.DataFrame, raw: pd.DataFrame) -> pd.DataFrame:
    """Alert records with the raw triplet and vote vector alongside."""
    raw = raw[list(SCORE_COLUMNS)].rename(index=str)
    trace = alerts.join(raw, on="node_id")
    trace["vote_vector"] = [vote_vector(row) for row in trace[list(DETECTOR_COLUMNS)].to_numpy()]
    cols = ["node_id", *SCORE_COLUMNS, *[c for c in ALERT_COLUMNS if c != "node_id"], "vote_vector"]
    return trace[cols]


def detect_stage(config: PipelineConfig, force: bool = False) -> pd.DataFrame:
    """Calibrate on benign validation scores, then vote on every test node."""
    work = _workdir(config)
    inputs = [work.scores("validation"), work.scores("test")]
    outputs = [work.calibration, work.alerts, work.trace]
    config_hash = config.section_hash("fusion")
    if not force and work.is_fresh("detect", inputs, outputs, config_hash):
        logger.info("detect is up to date; skipping")
        return read_alerts(work.alerts)
    for p in inputs:
        if not p.exists():
            raise FileNotFoundError(f"scores not computed: {p}")

    validation = load_scores(inputs[0])
    test = load_scores(inputs[1])
    model = fit_fusion(validation.frame, config.fusion)
    alerts = model.detect(test.frame)

    save_fusion(model, work.calibration)
    alerts.to_csv(work.alerts, index=False, float_format=FLOAT_FORMAT)
    trace_frame(alerts, test.frame).to_csv(work.trace, index=False, float_format=FLOAT_FORMAT)
    work.record("detect", inputs, outputs, config_hash)
    flagged = int((alerts["verdict"] == "malicious").sum())
    logger.info("Flagged %d of %d test nodes (T_v=%d)", flagged, len(alerts), config.fusion.vote_threshold)
    return alerts


def read_alerts(path: str | Path) -> pd.DataFrame:
    alerts = pd.read_csv(path, dtype={"node_id": str, "verdict": str}, keep_default_na=False)
    if tuple(alerts.columns) != ALERT_COLUMNS:
        raise ProvFusionError(f"{path}: unexpected alert columns {list(alerts.columns)}")
    return alerts


# ---- evaluate / ablate ------------------------------------------------------


def evaluate_stage(config: PipelineConfig) -> EvaluationReport:
    work = _workdir(config)
    labels_path = Path(config.paths.labels)
    if not labels_path.exists():
        raise FileNotFoundError(f"labels file not found: {labels_path}")
    if not work.alerts.exists():
        raise FileNotFoundError(f"alerts not computed: {work.alerts}")
    report = evaluate_alerts(read_alerts(work.alerts), read_labels(labels_path))
    report.save(work.report_json)
    work.report_text.write_text(report.to_text() + "\n", encoding="utf-8")
    return report


def ablate_stage(config: PipelineConfig) -> dict[str, pd.DataFrame]:
    work = _workdir(config)
    labels = read_labels(config.paths.labels)
    tables = run_ablations(
        read_alerts(work.alerts),
        load_scores(work.scores("validation")).frame,
        load_scores(work.scores("test")).frame,
        labels,
        config.fusion,
    )
    for name, table in tables.items():
        path = work.ablation(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(path, index=False, float_format="%.6f")
    return tables


# ---- synth / run ------------------------------------------------------------


def synth_stage(config: PipelineConfig) -> dict[str, int]:
    corpus = generate_corpus(config.synth, derive_seed(config.seed, "synth"))
    return write_corpus(corpus, config.paths)


def run_stage(config: PipelineConfig, force: bool = False) -> EvaluationReport:
    build_stage(config, force)
    train_stage(config, force)
    for split in ("validation", "test"):
        score_stage(config, split, force)
    detect_stage(config, force)
    return evaluate_stage(config)
