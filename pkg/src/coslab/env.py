"""Synchronous multi-agent signal-control environment.

Every control interval each intersection picks one of the 8 phases; the
simulator then runs the interval at one-second resolution with those phases
held. Observations are an (N, 8, 7) array: one row per controlled movement
with the seven state features

    [current_phase, car_num, queue_length, occupancy, flow,
     stop_car_num, pressure]

and the per-intersection reward is the negative sum of four normalized
penalties (delay, wait, queue, pressure) averaged over the interval. The
breakdown components always sum to the total exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .net import CONTROLLED
from .scenario import Scenario
from .sim import Simulation

N_ACTIONS = 8
N_MOVEMENTS = 8
N_FEATURES = 7
FEATURE_NAMES = ("current_phase", "car_num", "queue_length", "occupancy",
                 "flow", "stop_car_num", "pressure")


class ContractViolation(ValueError):
    """An action outside the environment's contract."""


@dataclass(frozen=True)
class EnvConfig:
    gamma: float = 0.99                  # advertised discount; not used by the dynamics
    w_delay: float = 1.0
    w_wait: float = 1.0
    w_queue: float = 1.0
    w_pressure: float = 1.0
    time_norm: Optional[float] = None    # default: control interval (seconds)
    count_norm: Optional[float] = None   # default: lane capacity (vehicles)


@dataclass
class RewardBreakdown:
    delay_term: float
    wait_term: float
    queue_term: float
    pressure_term: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.delay_term + self.wait_term + self.queue_term + self.pressure_term

    def as_tuple(self) -> Tuple[float, float, float, float, float]:
        return (self.total, self.delay_term, self.wait_term,
                self.queue_term, self.pressure_term)


@dataclass
class Transition:
    obs: np.ndarray          # (N, 8, 7)
    hidden: np.ndarray       # (N, H) actor recurrent state before acting
    ids: np.ndarray          # (N, k) collaborator selections
    logp_ids: np.ndarray     # (N,)
    actions: np.ndarray      # (N,)
    logp_actions: np.ndarray # (N,)
    rewards: np.ndarray      # (N,)
    next_obs: np.ndarray     # (N, 8, 7)
    done: bool


class TrafficEnv:
    """One rollout worker's environment; independent instances share nothing."""

    def __init__(self, scenario: Scenario, cfg: EnvConfig = EnvConfig(), seed: int = 0):
        self.scenario = scenario
        self.cfg = cfg
        self.net = scenario.network
        self.sim_cfg = scenario.sim_config
        self.n = self.net.n
        self._iids = [i.id for i in self.net.intersections]
        self.time_norm = cfg.time_norm if cfg.time_norm is not None \
            else float(self.sim_cfg.control_interval_s)
        self.count_norm = cfg.count_norm if cfg.count_norm is not None \
            else float(scenario.lane_params.capacity)
        self.sim = Simulation(self.net, scenario.flows, self.sim_cfg)
        self._phases: Dict[str, Optional[int]] = {iid: 0 for iid in self._iids}
        self._seed = seed
        self.reset(seed)

    @property
    def steps_per_episode(self) -> int:
        return self.sim_cfg.episode_s // self.sim_cfg.control_interval_s

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        if seed is not None:
            self._seed = seed
        self.sim.reset(self._seed)
        self._phases = {iid: 0 for iid in self._iids}
        self.sim.reset_interval_stats()
        return self.observe()

    def observe(self) -> np.ndarray:
        obs = np.zeros((self.n, N_MOVEMENTS, N_FEATURES))
        sim = self.sim
        for a, inter in enumerate(self.net.intersections):
            iid = inter.id
            phase_idx = self._phases[iid]
            green = set(inter.phase_table[phase_idx].movements) if phase_idx is not None else set()
            for m in CONTROLLED:
                mv = inter.movements[m]
                lane = self.net.lanes[mv.in_lane]
                car = sim.lane_occ[mv.in_lane]
                queued = len(sim.queues[(iid, m)])
                row = obs[a, m - 1]
                row[0] = 1.0 if m in green else 0.0
                row[1] = car
                row[2] = queued
                row[3] = car / lane.capacity
                row[4] = sim.movement_flow(iid, m)
                row[5] = sim.lane_queued[mv.in_lane]
                row[6] = sim.movement_pressure(iid, m)
        return obs

    def reward_breakdown(self, interval_stats: Dict[str, Dict[str, float]]
                         ) -> List[RewardBreakdown]:
        cfg = self.cfg
        out = []
        for iid in self._iids:
            s = interval_stats[iid]
            out.append(RewardBreakdown(
                delay_term=-cfg.w_delay * s["delay"] / self.time_norm,
                wait_term=-cfg.w_wait * s["wait"] / self.time_norm,
                queue_term=-cfg.w_queue * s["queue"] / self.count_norm,
                pressure_term=-cfg.w_pressure * s["pressure"] / self.count_norm,
            ))
        return out

    def step(self, actions: Sequence[int]):
        """Hold the chosen phases for one control interval.

        Returns (obs, rewards, done, info); info carries the per-intersection
        RewardBreakdown and the raw interval stats.
        """
        actions = list(actions)
        if len(actions) != self.n:
            raise ContractViolation(f"expected {self.n} actions, got {len(actions)}")
        for a in actions:
            if not (0 <= int(a) < N_ACTIONS):
                raise ContractViolation(f"action {a} outside 0..{N_ACTIONS - 1}")
        for iid, a in zip(self._iids, actions):
            self._phases[iid] = int(a)
        self.sim.reset_interval_stats()
        for _ in range(self.sim_cfg.control_interval_s // self.sim_cfg.tick_s):
            self.sim.tick(self._phases)
        stats = self.sim.interval_stats()
        breakdown = self.reward_breakdown(stats)
        rewards = np.array([b.total for b in breakdown])
        obs = self.observe()
        done = self.sim.clock >= self.sim_cfg.episode_s
        info = {
            "clock": self.sim.clock,
            "breakdown": breakdown,
            "interval": stats,
            "entered": self.sim.entered,
            "exited": self.sim.exited,
        }
        return obs, rewards, done, info
