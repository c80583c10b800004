from __future__ import annotations

import pytest

from src.checkpoints import Workdir
from src.config import AttackConfig, PipelineConfig
from src.pipeline import ablate_stage, run_stage, synth_stage

pytestmark = pytest.mark.slow


def default_run(tmp_path, seed: int, attack: AttackConfig | None = None) -> PipelineConfig:
    """Default model settings on the default-sized generated corpus."""
    config = PipelineConfig(seed=seed)
    config.paths.train_log = str(tmp_path / "data" / "train.log")
    config.paths.validation_log = str(tmp_path / "data" / "validation.log")
    config.paths.test_log = str(tmp_path / "data" / "test.log")
    config.paths.labels = str(tmp_path / "data" / "labels.tsv")
    config.paths.workdir = str(tmp_path / "work")
    if attack is not None:
        config.synth.attacks = [attack]
    config.validate()
    synth_stage(config)
    return config


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_injected_campaign_is_detected(tmp_path, seed):
    report = run_stage(default_run(tmp_path, seed))
    assert report.coverage.summary == "1/1"
    assert report.counts.fp <= 50
    assert report.adp >= 0.8


def test_full_run_is_bit_identical(tmp_path):
    first = run_stage(default_run(tmp_path / "a", 3))
    second = run_stage(default_run(tmp_path / "b", 3))
    assert first == second
    alerts_a = Workdir.at(tmp_path / "a" / "work").alerts.read_bytes()
    alerts_b = Workdir.at(tmp_path / "b" / "work").alerts.read_bytes()
    assert alerts_a == alerts_b


@pytest.mark.parametrize(
    "knob, view",
    [("novel_tokens", "attr"), ("rare_motif", "struc"), ("rare_event", "causal")],
)
def test_single_knob_needs_its_view(tmp_path, knob, view):
    knobs = {"novel_tokens": False, "rare_motif": False, "rare_event": False, knob: True}
    config = default_run(tmp_path, 0, AttackConfig(**knobs))
    run_stage(config)
    views = ablate_stage(config)["views"].set_index("variant")
    assert views.loc["all views", "coverage"] == "1/1"
    assert views.loc[f"without {view}", "coverage"] == "0/1"
