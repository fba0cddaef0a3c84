"""Run manifests and deterministic CSV output.

Every command writes a ``manifest.json`` describing its inputs (config
snapshot, scenario content hash, seeds) and outputs. The manifest hash covers
only the inputs, so a rerun with the same manifest and seed reproduces every
CSV and checkpoint byte for byte; wall-clock timestamps live only in the
manifest file itself and never inside hashed or emitted artifacts.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path
from typing import Iterable, List, Sequence


def canonical_json(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def sha256_bytes(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def sha256_file(path) -> str:
    return sha256_bytes(Path(path).read_bytes())


def manifest_hash(config: dict, scenario_sha: str, seeds: Sequence[int]) -> str:
    return sha256_bytes(canonical_json(
        {"config": config, "scenario": scenario_sha, "seeds": list(seeds)}))


def write_manifest(out_dir, command: str, config: dict, scenario_path,
                   seeds: Sequence[int], outputs: List[str]) -> tuple[str, str]:
    """Write manifest.json; returns (hash, path)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scenario_sha = sha256_file(scenario_path) if scenario_path else ""
    mhash = manifest_hash(config, scenario_sha, seeds)
    doc = {
        "manifest_hash": mhash,
        "command": command,
        "config": config,
        "scenario_path": str(scenario_path) if scenario_path else None,
        "scenario_sha256": scenario_sha,
        "seeds": list(seeds),
        "outputs": outputs,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return mhash, str(path)


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], mhash: str) -> str:
    """Write a CSV with a leading ``# manifest=<hash>`` comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# manifest={mhash}", ",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def read_csv(path) -> tuple[List[str], List[List[str]]]:
    """Read a CSV written by :func:`write_csv`, skipping comment lines."""
    lines = [ln for ln in Path(path).read_text().splitlines()
             if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]
