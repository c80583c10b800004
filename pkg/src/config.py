# src/config.py
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any, Iterable

import yaml

from src.errors import ConfigError

NORMALIZERS = ("percentile", "minmax", "zscore", "robust")


@dataclass
class PathsConfig:
    train_log: str = "data/train.log"
    validation_log: str = "data/validation.log"
    test_log: str = "data/test.log"
    labels: str = "data/labels.tsv"
    workdir: str = "work"


@dataclass
class FeaturizeConfig:
    d_attr: int = 16
    window: int = 2
    epochs: int = 30
    negatives: int = 5


@dataclass
class GmaeConfig:
    layers: int = 2
    hidden: int = 64
    mask_rate: float = 0.3
    lr: float = 1e-3
    epochs: int = 50
    # 'type' keeps attributes out of the structural view; 'full' feeds it x_v
    structural_input: str = "type"


@dataclass
class ScoringConfig:
    k: int = 10
    decoder_epochs: int = 200
    decoder_lr: float = 1e-3
    class_weighting: bool = True


@dataclass
class FusionConfig:
    alpha: float = 5.0
    vote_threshold: int = 4
    normalizer: str = "percentile"
    strict: bool = False


@dataclass
class AttackConfig:
    scenario: str = "exfiltration-chain"
    nodes: int = 10
    novel_tokens: bool = True
    rare_motif: bool = True
    rare_event: bool = True
    at: float = 0.9


@dataclass
class SynthConfig:
    processes: int = 4400
    files: int = 450
    netflows: int = 150
    # shell / fileio / network / ipc session templates
    template_weights: dict[str, float] = field(
        default_factory=lambda: {"shell": 0.4, "fileio": 0.3, "network": 0.2, "ipc": 0.1}
    )
    train_fraction: float = 0.6
    validation_fraction: float = 0.2
    attacks: list[AttackConfig] = field(default_factory=lambda: [AttackConfig()])


@dataclass
class PipelineConfig:
    seed: int = 0
    paths: PathsConfig = field(default_factory=PathsConfig)
    featurize: FeaturizeConfig = field(default_factory=FeaturizeConfig)
    gmae: GmaeConfig = field(default_factory=GmaeConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def validate(self) -> "PipelineConfig":
        g, f, s = self.gmae, self.fusion, self.scoring
        checks = [
            (self.featurize.d_attr >= 2, "featurize.d_attr must be >= 2"),
            (self.featurize.window >= 1, "featurize.window must be >= 1"),
            (g.layers >= 1, "gmae.layers must be >= 1"),
            (g.hidden >= 1, "gmae.hidden must be >= 1"),
            (0.0 < g.mask_rate < 1.0, "gmae.mask_rate must be in (0, 1)"),
            (g.lr > 0, "gmae.lr must be > 0"),
            (g.structural_input in ("type", "full"), "gmae.structural_input must be 'type' or 'full'"),
            (s.k >= 1, "scoring.k must be >= 1"),
            (f.alpha > 0, "fusion.alpha must be > 0"),
            (1 <= f.vote_threshold <= 7, "fusion.vote_threshold must be in 1..7"),
            (f.normalizer in NORMALIZERS, f"fusion.normalizer must be one of {NORMALIZERS}"),
            (abs(sum(self.synth.template_weights.values()) - 1.0) < 1e-9,
             "synth.template_weights must sum to 1"),
            (min(self.synth.processes, self.synth.files, self.synth.netflows) >= 0,
             "synth counts must be >= 0"),
            (0 < self.synth.train_fraction and 0 < self.synth.validation_fraction
             and self.synth.train_fraction + self.synth.validation_fraction < 1,
             "synth split fractions must leave room for a test window"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        test_start = self.synth.train_fraction + self.synth.validation_fraction
        for i, attack in enumerate(self.synth.attacks):
            if attack.nodes < 1:
                raise ConfigError(f"synth.attacks[{i}].nodes must be >= 1")
            if not (attack.novel_tokens or attack.rare_motif or attack.rare_event):
                raise ConfigError(f"synth.attacks[{i}] needs at least one anomaly knob")
            if not test_start <= attack.at < 0.99:
                raise ConfigError(f"synth.attacks[{i}].at must fall in the test window [{test_start:g}, 0.99)")
        return self

    def section_hash(self, *sections: str) -> str:
        """Content hash of the named sections (plus the seed) for checkpoint manifests."""
        payload = {"seed": self.seed}
        payload.update({name: asdict(getattr(self, name)) for name in sections})
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


# ---- loading ----------------------------------------------------------------


def _build(cls: type, data: Any, where: str) -> Any:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}")
        elif name == "attacks":
            if not isinstance(value, list):
                raise ConfigError(f"{where}.attacks: expected a list")
            kwargs[name] = [
                _build(AttackConfig, item, f"{where}.attacks[{i}]") for i, item in enumerate(value)
            ]
        else:
            kwargs[name] = _coerce(value, default, f"{where}.{name}")
    return cls(**kwargs)


def _coerce(value: Any, default: Any, where: str) -> Any:
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false, got {value!r}")
        return value
    if isinstance(default, float) and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(default, int) and isinstance(value, int) and not isinstance(value, bool):
        return value
    if isinstance(default, (str, dict)) and isinstance(value, type(default)):
        return value
    raise ConfigError(f"{where}: expected {type(default).__name__}, got {value!r}")


def apply_overrides(data: dict, overrides: Iterable[str]) -> dict:
    """Apply `section.key=value` strings; values are parsed as YAML scalars."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        parts = key.strip().split(".")
        node = data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {key!r} descends into a scalar")
        node[parts[-1]] = yaml.safe_load(raw)
    return data


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> PipelineConfig:
    data: dict = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        with path.open("r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
    data = apply_overrides(data, overrides)
    return _build(PipelineConfig, data, "config").validate()


def dump_config(config: PipelineConfig) -> str:
    return yaml.safe_dump(asdict(config), sort_keys=False)


def derive_seed(root: int, stage: str) -> int:
    """Deterministic 32-bit seed for one pipeline stage."""
    digest = hashlib.sha256(f"{root}:{stage}".encode()).digest()
    return int.from_bytes(digest[:4], "little")
