"""Run manifests: what a command was asked to do and what it wrote."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seeds: dict = field(default_factory=dict)
    inputs: dict = field(default_factory=dict)  # path -> sha256
    outputs: dict = field(default_factory=dict)  # path relative to the output dir -> sha256
    duration_s: float = 0.0
    version: str = __version__

    def add_input(self, path):
        self.inputs[str(path)] = sha256_file(path)

    def write(self, out_dir: Path, files, started: float) -> Path:
        """Hash every produced file and write the manifest last."""
        out_dir = Path(out_dir)
        for f in sorted(Path(p) for p in files):
            self.outputs[str(f.relative_to(out_dir))] = sha256_file(f)
        self.duration_s = time.perf_counter() - started
        path = out_dir / MANIFEST_NAME
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")
        return path


def load_manifest(path) -> RunManifest:
    d = json.loads(Path(path).read_text())
    missing = {"command", "config"} - set(d)
    if missing:
        raise ValueError(f"{path}: manifest lacks {sorted(missing)}")
    return RunManifest(**d)
