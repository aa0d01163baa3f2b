"""Run manifests: what ran, with which inputs, producing which outputs.

The manifest exists so a run can be reproduced: it records the command,
every input that affects determinism (scenario, weights, seed) with
content digests, and digests of the outputs.  Wall-clock timestamps are
recorded for bookkeeping but deliberately excluded from any determinism
comparison.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

from . import __version__


def file_digest(path: str | os.PathLike) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    seed: int | None = None
    scenario_path: str | None = None
    scenario_sha256: str | None = None
    weights_path: str | None = None
    weights_sha256: str | None = None
    log_path: str | None = None
    options: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)   # name -> {path, sha256}
    started_at: str = field(default_factory=_now)
    finished_at: str | None = None
    version: str = __version__

    def set_scenario(self, path: str) -> None:
        self.scenario_path = str(path)
        self.scenario_sha256 = file_digest(path)

    def set_weights(self, path: str) -> None:
        self.weights_path = str(path)
        self.weights_sha256 = file_digest(path)

    def add_output(self, name: str, path: str) -> None:
        self.outputs[name] = {"path": str(path), "sha256": file_digest(path)}

    def config_digest(self) -> str:
        """Digest over every determinism-relevant input."""
        basis = {
            "command": self.command,
            "seed": self.seed,
            "scenario_sha256": self.scenario_sha256,
            "weights_sha256": self.weights_sha256,
            "options": self.options,
        }
        blob = json.dumps(basis, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def finalize(self, path: str | os.PathLike) -> None:
        self.finished_at = _now()
        doc = asdict(self)
        doc["config_digest"] = self.config_digest()
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def load_manifest(path: str | os.PathLike) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
