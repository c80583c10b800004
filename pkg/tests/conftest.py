from __future__ import annotations

import logging

import numpy as np
import pytest

from src.config import AttackConfig, PipelineConfig, SynthConfig
from src.data.events import EntityType, Event, EventType
from src.data.graph import ProvenanceGraph, build_graph

P, F, N = EntityType.PROCESS, EntityType.FILE, EntityType.NETFLOW


def ev(
    src: str,
    dst: str,
    event: EventType | str,
    ts: int = 0,
    src_type: EntityType = P,
    dst_type: EntityType = F,
    src_attr: str = "",
    dst_attr: str = "",
) -> Event:
    return Event(src, src_type, src_attr, dst, dst_type, dst_attr, EventType(event), ts)


def two_motif_events(copies: int = 10) -> list[Event]:
    """
    `copies` repetitions of a process that reads one file and writes another,
    plus `copies` processes that each send to a netflow. Five nodes per copy.
    """
    out = []
    t = 0
    for i in range(copies):
        p, fin, fout = f"p{i:02d}", f"fin{i:02d}", f"fout{i:02d}"
        out.append(ev(p, fin, "READ", t, P, F, "/usr/bin/cat", "/etc/hosts"))
        out.append(ev(p, fout, "WRITE", t + 1, P, F, "/usr/bin/cat", "/var/log/out.log"))
        t += 2
    for i in range(copies):
        q, n = f"q{i:02d}", f"n{i:02d}"
        out.append(ev(q, n, "CONNECT", t, P, N, "/usr/bin/curl", "10.0.0.1:443"))
        out.append(ev(q, n, "SENDTO", t + 1, P, N, "/usr/bin/curl", "10.0.0.1:443"))
        t += 2
    return out


@pytest.fixture
def toy_graph() -> ProvenanceGraph:
    return build_graph(two_motif_events(5))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)


def small_synth(processes: int = 300, files: int = 60, netflows: int = 20, attacks=None) -> SynthConfig:
    return SynthConfig(
        processes=processes,
        files=files,
        netflows=netflows,
        attacks=[AttackConfig()] if attacks is None else attacks,
    )


@pytest.fixture
def fast_config(tmp_path) -> PipelineConfig:
    """Small, quick pipeline config writing everything under tmp_path."""
    config = PipelineConfig(seed=7)
    config.paths.train_log = str(tmp_path / "data" / "train.log")
    config.paths.validation_log = str(tmp_path / "data" / "validation.log")
    config.paths.test_log = str(tmp_path / "data" / "test.log")
    config.paths.labels = str(tmp_path / "data" / "labels.tsv")
    config.paths.workdir = str(tmp_path / "work")
    config.featurize.epochs = 5
    config.gmae.hidden = 8
    config.gmae.epochs = 3
    config.scoring.decoder_epochs = 5
    config.synth = small_synth()
    return config.validate()


@pytest.fixture(autouse=True)
def restore_root_logger():
    """The CLI reconfigures the root logger; put pytest's handlers back afterwards."""
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    root.handlers[:] = handlers
    root.setLevel(level)
