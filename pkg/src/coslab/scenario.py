"""Scenario files: grid/avenue generation, JSON schema, parsing.

Schema (``coslab-scenario-v1``, JSON)::

    {
      "format": "coslab-scenario-v1",
      "kind": "grid" | "avenue" | "lattice",
      "rows": 4, "cols": 4,              # grid/avenue
      "nodes": [[r, c], ...],            # lattice only
      "lane": {"length_m": 300, "capacity": 40,
               "free_flow_s": 21.6, "sat_rate": 0.5},
      "episode_s": 3600,
      "control_interval_s": 15,
      "turn_probs": {"L": 0.2, "S": 0.6, "R": 0.2},
      "flows": [
        {"entry": ["i0", "N"], "hourly": 94.0, "base": 1.0,
         "components": [{"mean_s": 900.0, "std_s": 600.0, "weight": 1.2}, ...],
         "clip": [0.0, null], "turns": null}
      ]
    }

Generated files are byte-deterministic for a given (kind, dims, seed, scale).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .net import LaneParams, RoadNetwork, build_grid, build_lattice, validate
from .sim import (
    DEFAULT_TURN_PROBS,
    FlowSpec,
    GaussianComponent,
    RateProfile,
    SimConfig,
)

FORMAT = "coslab-scenario-v1"

# Hourly entry rates for the 16 boundary approaches of the default 4x4 grid:
# min 66, max 136, mean 94.5 veh/h.
GRID44_HOURLY = (66, 70, 74, 78, 82, 86, 90, 94, 94, 97, 101, 105, 109, 113, 117, 136)


class InputError(ValueError):
    """Bad scenario/config/file input; maps to exit code 3 at the CLI."""


@dataclass
class Scenario:
    network: RoadNetwork
    flows: List[FlowSpec]
    sim_config: SimConfig
    lane_params: LaneParams
    raw: dict

    @property
    def n(self) -> int:
        return self.network.n


def _mixture_components(rng: np.random.Generator, n: int = 2) -> List[dict]:
    comps = []
    for _ in range(n):
        comps.append({
            "mean_s": round(float(rng.uniform(600.0, 3000.0)), 1),
            "std_s": round(float(rng.uniform(400.0, 900.0)), 1),
            "weight": round(float(rng.uniform(0.5, 1.5)), 3),
        })
    return comps


def generate_scenario(kind: str, rows: int, cols: int, seed: int = 0,
                      demand_scale: float = 1.0,
                      lane: Optional[dict] = None,
                      episode_s: int = 3600,
                      control_interval_s: int = 15) -> dict:
    """Build a scenario document for a grid or avenue lattice."""
    if kind not in ("grid", "avenue"):
        raise InputError(f"unknown scenario kind: {kind!r}")
    if rows < 1 or cols < 1:
        raise InputError("rows and cols must be >= 1")
    lane_params = LaneParams(**(lane or {}))
    network = build_grid(rows, cols, lane_params)
    rng = np.random.Generator(np.random.PCG64(seed))

    entries = list(network.sources)  # deterministic order from the builder
    n_entries = len(entries)
    if kind == "grid":
        if n_entries == len(GRID44_HOURLY):
            hourly = list(GRID44_HOURLY)
        else:
            hourly = [int(rng.integers(66, 137)) for _ in range(n_entries)]
        order = rng.permutation(n_entries)
        hourly = [hourly[j] for j in order]
    else:
        # Two arterial corridors: east-west entries on the middle rows.
        arterial_rows = sorted({rows // 2, (rows - 1) // 2})
        hourly = []
        for iid, arm in entries:
            pos = network.by_id[iid].pos
            if arm in ("E", "W") and pos[0] in arterial_rows:
                hourly.append(600)
            else:
                hourly.append(95)

    flows = []
    for (iid, arm), rate in zip(entries, hourly):
        flows.append({
            "entry": [iid, arm],
            "hourly": round(rate * demand_scale, 3),
            "base": 1.0,
            "components": _mixture_components(rng),
            "clip": [0.0, None],
            "turns": None,
        })
    return {
        "format": FORMAT,
        "kind": kind,
        "rows": rows,
        "cols": cols,
        "lane": {
            "length_m": lane_params.length_m,
            "capacity": lane_params.capacity,
            "free_flow_s": lane_params.free_flow_s,
            "sat_rate": lane_params.sat_rate,
        },
        "episode_s": episode_s,
        "control_interval_s": control_interval_s,
        "turn_probs": dict(DEFAULT_TURN_PROBS),
        "flows": flows,
    }


def dump_scenario(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read scenario {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise InputError(f"scenario format must be {FORMAT!r}")
    try:
        lane_params = LaneParams(**doc.get("lane", {}))
        kind = doc.get("kind", "grid")
        if kind in ("grid", "avenue"):
            network = build_grid(int(doc["rows"]), int(doc["cols"]), lane_params)
        elif kind == "lattice":
            nodes = [(int(r), int(c)) for r, c in doc["nodes"]]
            network = build_lattice(nodes, lane_params)
        else:
            raise InputError(f"unknown scenario kind: {kind!r}")
        episode_s = int(doc.get("episode_s", 3600))
        control_s = int(doc.get("control_interval_s", 15))
        sim_cfg = SimConfig(episode_s=episode_s, control_interval_s=control_s)
        turn_probs = doc.get("turn_probs", dict(DEFAULT_TURN_PROBS))
        if abs(sum(turn_probs.get(d, 0.0) for d in "LSR") - 1.0) > 1e-9:
            raise InputError("turn_probs must sum to 1")
        flows = []
        horizon = episode_s
        for f in doc["flows"]:
            comps = tuple(GaussianComponent(c["mean_s"], c["std_s"], c["weight"])
                          for c in f.get("components", []))
            clip = f.get("clip", [0.0, None])
            profile = RateProfile(hourly=float(f["hourly"]), base=float(f.get("base", 1.0)),
                                  components=comps,
                                  clip=(float(clip[0]), None if clip[1] is None else float(clip[1])),
                                  horizon_s=horizon)
            entry = (str(f["entry"][0]), str(f["entry"][1]))
            if entry not in set(network.sources):
                raise InputError(f"flow entry {entry} is not a boundary approach")
            turns = None if f.get("turns") is None else tuple(f["turns"])
            flows.append(FlowSpec(entry=entry, profile=profile, turns=turns,
                                  turn_probs=dict(turn_probs)))
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed scenario: {exc}") from exc
    problems = validate(network)
    if problems:
        raise InputError("scenario network invalid: " + "; ".join(problems[:5]))
    return Scenario(network=network, flows=flows, sim_config=sim_cfg,
                    lane_params=lane_params, raw=doc)
