"""Classical controllers: fixed-time cycling and max-pressure greedy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .env import TrafficEnv
from .sim import Simulation


@dataclass(frozen=True)
class FtcConfig:
    """Fixed-time control: cycle through ``order`` holding each phase ``duration_s``."""
    order: Tuple[int, ...] = (0, 1, 2, 3)
    duration_s: int = 30
    offset_seed: int = 0

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")


def ftc_offsets(n: int, cfg: FtcConfig) -> np.ndarray:
    """Per-intersection random offsets in [0, cycle) drawn from the seeded rng."""
    rng = np.random.Generator(np.random.PCG64(cfg.offset_seed))
    cycle = cfg.duration_s * len(cfg.order)
    return rng.integers(0, cycle, size=n)


def ftc_action(offset: int, t: int, cfg: FtcConfig) -> int:
    """Open-loop phase choice at time ``t`` for an intersection with ``offset``."""
    return cfg.order[((t + offset) // cfg.duration_s) % len(cfg.order)]


def maxpressure_action(sim: Simulation, iid: str) -> int:
    """Greedy phase with the maximum phase pressure; ties go to the lowest index."""
    best, best_p = 0, None
    for p in range(8):
        pr = sim.pressure_phase(iid, p)
        if best_p is None or pr > best_p:
            best, best_p = p, pr
    return best


class FixedTimeController:
    name = "ftc"

    def __init__(self, cfg: FtcConfig = FtcConfig()):
        self.cfg = cfg
        self._offsets: np.ndarray | None = None

    def reset(self, env: TrafficEnv) -> None:
        self._offsets = ftc_offsets(env.n, self.cfg)

    def actions(self, env: TrafficEnv, obs: np.ndarray) -> List[int]:
        t = env.sim.clock
        return [int(ftc_action(int(off), t, self.cfg)) for off in self._offsets]


class MaxPressureController:
    name = "maxpressure"

    def reset(self, env: TrafficEnv) -> None:
        pass

    def actions(self, env: TrafficEnv, obs: np.ndarray) -> List[int]:
        return [maxpressure_action(env.sim, iid) for iid in (i.id for i in env.net.intersections)]
