# src/checkpoints.py
"""
Work directory layout and the stage manifest.

manifest.json records, per stage, the config hash plus sha256 of every
declared input and output. A stage whose record still matches is skipped.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from src.errors import CheckpointError

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
SPLITS = ("train", "validation", "test")


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class Workdir:
    root: Path

    @classmethod
    def at(cls, root: str | Path) -> "Workdir":
        path = Path(root)
        path.mkdir(parents=True, exist_ok=True)
        return cls(path)

    # ---- layout ----

    def graph(self, split: str) -> Path:
        return self.root / "graphs" / f"{split}.graph"

    @property
    def models(self) -> Path:
        return self.root / "models"

    @property
    def embedding_table(self) -> Path:
        return self.models / "embeddings.txt"

    @property
    def structural_encoder(self) -> Path:
        return self.models / "structural.npz"

    @property
    def semantic_encoder(self) -> Path:
        return self.models / "semantic.npz"

    @property
    def causal_decoder(self) -> Path:
        return self.models / "causal.npz"

    @property
    def attr_bank(self) -> Path:
        return self.models / "attr_bank.npz"

    @property
    def struc_bank(self) -> Path:
        return self.models / "struc_bank.npz"

    @property
    def losses(self) -> Path:
        return self.models / "losses.csv"

    def node_embeddings(self, encoder: str) -> Path:
        return self.models / f"{encoder}_embeddings.csv"

    def scores(self, split: str) -> Path:
        return self.root / "scores" / f"{split}.csv"

    @property
    def calibration(self) -> Path:
        return self.root / "detect" / "calibration.json"

    @property
    def alerts(self) -> Path:
        return self.root / "detect" / "alerts.csv"

    @property
    def trace(self) -> Path:
        return self.root / "detect" / "trace.csv"

    @property
    def report_json(self) -> Path:
        return self.root / "eval" / "report.json"

    @property
    def report_text(self) -> Path:
        return self.root / "eval" / "report.txt"

    def ablation(self, name: str) -> Path:
        return self.root / "ablation" / f"{name}.csv"

    def model_files(self) -> list[Path]:
        return [
            self.embedding_table,
            self.structural_encoder,
            self.semantic_encoder,
            self.causal_decoder,
            self.attr_bank,
            self.struc_bank,
        ]

    # ---- manifest ----

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST

    def load_manifest(self) -> dict:
        if not self.manifest_path.exists():
            return {"stages": {}}
        try:
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{self.manifest_path}: corrupt manifest ({exc})") from exc

    def _hashes(self, paths: Iterable[Path]) -> dict[str, str]:
        return {self._key(p): sha256_file(p) for p in paths}

    def _key(self, path: Path) -> str:
        path = Path(path)
        try:
            return str(path.resolve().relative_to(self.root.resolve()))
        except ValueError:
            return str(path.resolve())

    def is_fresh(self, stage: str, inputs: Iterable[Path], outputs: Iterable[Path], config_hash: str) -> bool:
        """True when `stage` already ran on these exact inputs and config and its outputs are intact."""
        entry = self.load_manifest()["stages"].get(stage)
        if entry is None or entry.get("config") != config_hash:
            return False
        inputs, outputs = list(inputs), list(outputs)
        if not all(p.exists() for p in inputs + outputs):
            return False
        return entry.get("inputs") == self._hashes(inputs) and entry.get("outputs") == self._hashes(outputs)

    def record(self, stage: str, inputs: Iterable[Path], outputs: Iterable[Path], config_hash: str) -> None:
        manifest = self.load_manifest()
        manifest["stages"][stage] = {
            "config": config_hash,
            "inputs": self._hashes(inputs),
            "outputs": self._hashes(outputs),
        }
        self.manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        logger.debug("Recorded stage %s in %s", stage, self.manifest_path)

    def declared_inputs(self, stage: str) -> list[str]:
        entry = self.load_manifest()["stages"].get(stage, {})
        return sorted(entry.get("inputs", {}))
