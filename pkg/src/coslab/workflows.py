"""Command implementations shared by the HTTP service and the CLI.

Each workflow writes its artifacts (scenario JSON, CSVs, checkpoints) under
an output directory together with a ``manifest.json``; every CSV and
checkpoint references the manifest hash, and reruns with the same manifest
and seed are byte-identical.
"""

from __future__ import annotations

import os
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .baselines import FtcConfig
from .config import NetworkConfig
from .env import EnvConfig
from .manifest import sha256_file, write_csv, write_manifest
from .scenario import InputError, dump_scenario, generate_scenario, load_scenario
from .training import (
    EVAL_INTERSECTION_HEADER,
    EVAL_SCENARIO_HEADER,
    TRAIN_LOG_HEADER,
    CosLightAgent,
    TrainConfig,
    dump_embeddings,
    dump_matrix,
    evaluate,
    train,
)


def output_root() -> Path:
    return Path(os.environ.get("COSLAB_OUT", "runs"))


def _resolve_out(out_dir: Optional[str], default_name: str) -> Path:
    out = Path(out_dir) if out_dir else output_root() / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def train_config_from_dict(d: dict) -> TrainConfig:
    d = dict(d)
    net = d.pop("net", None)
    cfg = TrainConfig(**d)
    if net:
        cfg = replace(cfg, net=NetworkConfig(**net))
    return cfg


def gen_scenario_cmd(kind: str, rows: int, cols: int, seed: int = 0,
                     demand_scale: float = 1.0, out_dir: Optional[str] = None,
                     lane: Optional[dict] = None, episode_s: int = 3600,
                     control_interval_s: int = 15) -> dict:
    out = _resolve_out(out_dir, f"scenario-{kind}-{rows}x{cols}-s{seed}")
    doc = generate_scenario(kind, rows, cols, seed=seed, demand_scale=demand_scale,
                            lane=lane, episode_s=episode_s,
                            control_interval_s=control_interval_s)
    path = out / "scenario.json"
    dump_scenario(doc, path)
    hourly = [f["hourly"] for f in doc["flows"]]
    config = {"kind": kind, "rows": rows, "cols": cols, "seed": seed,
              "demand_scale": demand_scale, "lane": lane,
              "episode_s": episode_s, "control_interval_s": control_interval_s}
    mhash, mpath = write_manifest(out, "gen-scenario", config, path, [seed],
                                  [str(path)])
    return {
        "scenario_path": str(path),
        "manifest_path": mpath,
        "manifest_hash": mhash,
        "entries": len(hourly),
        "hourly_min": min(hourly),
        "hourly_max": max(hourly),
        "hourly_mean": sum(hourly) / len(hourly),
    }


def train_cmd(scenario_path: str, out_dir: Optional[str] = None,
              config: Optional[dict] = None, resume: Optional[str] = None) -> dict:
    scenario = load_scenario(scenario_path)
    cfg = train_config_from_dict(config or {})
    out = _resolve_out(out_dir, f"train-s{cfg.seed}")
    mhash, mpath = write_manifest(out, "train", cfg.to_dict(), scenario_path,
                                  [cfg.seed], [])

    checkpoints: List[str] = []

    def on_checkpoint(agent: CosLightAgent, ep: int, steps: int) -> str:
        path = out / f"ckpt_step{steps}.bin"
        agent.save(path, {"episode": ep + 1, "steps": steps, "manifest": mhash})
        checkpoints.append(str(path))
        return str(path)

    agent, rows, summary = train(scenario, cfg, EnvConfig(gamma=cfg.gamma),
                                 resume=resume, on_checkpoint=on_checkpoint)
    ckpt = out / "checkpoint.bin"
    agent.save(ckpt, {"episode": summary["episodes"], "steps": summary["steps"],
                      "manifest": mhash})
    log_path = write_csv(out / "training_log.csv", TRAIN_LOG_HEADER, rows, mhash)
    outputs = [str(ckpt), log_path] + checkpoints
    write_manifest(out, "train", cfg.to_dict(), scenario_path, [cfg.seed], outputs)
    return {
        "checkpoint_path": str(ckpt),
        "log_path": log_path,
        "manifest_path": mpath,
        "manifest_hash": mhash,
        "episodes": summary["episodes"],
        "steps": summary["steps"],
        "first10_reward": summary["first10_reward"],
        "final10_reward": summary["final10_reward"],
    }


def _peek_meta(checkpoint_path: str) -> dict:
    import json
    import struct
    try:
        blob = Path(checkpoint_path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read checkpoint {checkpoint_path}: {exc}") from exc
    magic = b"CSLB0001"
    if blob[:len(magic)] != magic:
        raise InputError(f"{checkpoint_path}: not a checkpoint")
    try:
        (hlen,) = struct.unpack_from("<I", blob, len(magic))
        header = json.loads(blob[len(magic) + 4:len(magic) + 4 + hlen].decode())
    except Exception as exc:
        raise InputError(f"{checkpoint_path}: corrupt checkpoint header") from exc
    return header.get("meta", {})


def load_agent(checkpoint_path: str, scenario) -> CosLightAgent:
    """Rebuild an agent with the checkpoint's stored config, then load weights."""
    cfg = train_config_from_dict(_peek_meta(checkpoint_path).get("config", {}))
    agent = CosLightAgent(scenario, cfg, np.random.Generator(np.random.PCG64(0)))
    agent.load(checkpoint_path)
    return agent


def eval_cmd(controller: str, scenario_path: str, seeds: Sequence[int],
             episodes: int, checkpoint: Optional[str] = None,
             out_dir: Optional[str] = None,
             ftc_duration_s: int = 30) -> dict:
    scenario = load_scenario(scenario_path)
    agent = None
    if controller == "coslight":
        if not checkpoint:
            raise InputError("controller 'coslight' requires --checkpoint")
        agent = load_agent(checkpoint, scenario)
    out = _resolve_out(out_dir, f"eval-{controller}")
    config = {"controller": controller, "episodes": episodes,
              "checkpoint": sha256_file(checkpoint) if checkpoint else None,
              "ftc_duration_s": ftc_duration_s}
    mhash, mpath = write_manifest(out, "eval", config, scenario_path, seeds, [])
    result = evaluate(scenario, controller, seeds, episodes,
                      EnvConfig(), agent=agent,
                      ftc_cfg=FtcConfig(duration_s=ftc_duration_s))

    scen_rows = list(result["scenario_rows"])
    arr = np.array([[r[3], r[4], r[5], r[6]] for r in scen_rows]) if scen_rows else None
    if arr is not None:
        scen_rows.append(["mean", episodes, sum(r[2] for r in result["scenario_rows"]),
                          arr[:, 0].mean(), arr[:, 1].mean(), arr[:, 2].mean(),
                          arr[:, 3].mean()])
        scen_rows.append(["std", episodes, 0,
                          arr[:, 0].std(), arr[:, 1].std(), arr[:, 2].std(),
                          arr[:, 3].std()])
    scen_csv = write_csv(out / "scenario_metrics.csv", EVAL_SCENARIO_HEADER,
                         scen_rows, mhash)
    inter_csv = write_csv(out / "intersection_metrics.csv",
                          EVAL_INTERSECTION_HEADER, result["intersection_rows"], mhash)
    write_manifest(out, "eval", config, scenario_path, seeds, [scen_csv, inter_csv])
    return {
        "scenario_csv": scen_csv,
        "intersection_csv": inter_csv,
        "manifest_path": mpath,
        "manifest_hash": mhash,
        "aggregate": result["aggregate"],
    }


def dump_cmd(kind: str, checkpoint: str, scenario_path: str, episodes: int = 1,
             out_dir: Optional[str] = None, seed: int = 0) -> dict:
    if kind not in ("matrix", "embeddings"):
        raise InputError(f"unknown dump kind {kind!r}")
    scenario = load_scenario(scenario_path)
    agent = load_agent(checkpoint, scenario)
    out = _resolve_out(out_dir, f"dump-{kind}")
    config = {"kind": kind, "episodes": episodes, "seed": seed,
              "checkpoint": sha256_file(checkpoint)}
    mhash, mpath = write_manifest(out, "dump", config, scenario_path, [seed], [])
    if kind == "matrix":
        rows = dump_matrix(agent, scenario, episodes, seed=seed)
        header = ["episode", "when", "row"] + [f"m{j}" for j in range(agent.n)]
        path = write_csv(out / "matrix.csv", header, rows, mhash)
    else:
        rows = dump_embeddings(agent, scenario, episodes, seed=seed)
        dim = len(rows[0]) - 3 if rows else 0
        header = ["episode", "step", "intersection"] + [f"e{j}" for j in range(dim)]
        path = write_csv(out / "embeddings.csv", header, rows, mhash)
    write_manifest(out, "dump", config, scenario_path, [seed], [path])
    return {"csv_path": path, "rows": len(rows), "manifest_path": mpath,
            "manifest_hash": mhash}
