"""Deterministic store-and-forward traffic simulation.

Dynamics, one 1-second tick at a time:

1. Arrivals are drawn per entry flow from a Poisson law whose rate is the
   flow's clipped Gaussian-mixture profile evaluated at the current second.
   A vehicle samples its full route (a sequence of turn directions) at spawn
   and is admitted onto its entry lane as soon as that lane has room.
2. A vehicle traverses each lane in free-flow time, then joins the FIFO
   queue of its movement at the lane's downstream intersection.
3. While a movement is green (its phase is active, or it is an uncontrolled
   right turn), a fractional accumulator earns ``sat_rate`` credit per tick
   and whole credits discharge queued vehicles onto their next lane, head of
   line first. Discharge blocks when the target lane is at capacity
   (spillback), and credit resets when the queue drains.
4. Vehicles on a sink-bound boundary lane leave the network when their
   free-flow traversal completes; their exit time is the exact (fractional)
   arrival instant.

Waiting time accrues one second per tick spent queued. Per-vehicle delay is
measured against a free-flow baseline that replays the same route through
the same tick quantization and discharge latency on an empty network, so an
unimpeded trip has exactly zero delay.

A Simulation instance is single-threaded; independent instances share no
mutable state.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .net import (
    ARMS,
    CONTROLLED,
    DIRECTIONS,
    MOVEMENT_INDEX,
    MOVEMENTS,
    OPPOSITE,
    RoadNetwork,
    dest_arm,
)

RIGHT_TURNS = (9, 10, 11, 12)
ALL_GREEN = "all"
_EPS = 1e-9

DEFAULT_TURN_PROBS = {"L": 0.2, "S": 0.6, "R": 0.2}


@dataclass(frozen=True)
class GaussianComponent:
    mean_s: float
    std_s: float
    weight: float


@dataclass
class RateProfile:
    """Piecewise arrival-rate profile built from a mixture of Gaussians.

    ``rate(t)`` returns vehicles/hour: the mixture shape is normalized by its
    own hourly mean and scaled to the target ``hourly`` rate, then clipped.
    With a non-binding clip the hour-long average equals ``hourly`` exactly.
    """

    hourly: float
    base: float = 1.0
    components: Tuple[GaussianComponent, ...] = ()
    clip: Tuple[float, Optional[float]] = (0.0, None)
    horizon_s: int = 3600

    def __post_init__(self):
        if self.hourly < 0:
            raise ValueError("hourly rate must be >= 0")
        ts = np.arange(self.horizon_s, dtype=np.float64)
        self._shape_mean = float(np.mean(self._shape(ts)))
        if self._shape_mean <= 0:
            raise ValueError("rate profile shape must be positive on average")

    def _shape(self, t):
        s = np.full_like(np.asarray(t, dtype=np.float64), self.base, dtype=np.float64)
        for c in self.components:
            z = (np.asarray(t, dtype=np.float64) - c.mean_s) / max(c.std_s, 1e-6)
            s = s + c.weight * np.exp(-0.5 * z * z)
        return s

    def rate(self, t: float) -> float:
        r = self.hourly * float(self._shape(t)) / self._shape_mean
        lo, hi = self.clip
        r = max(r, lo)
        if hi is not None:
            r = min(r, hi)
        return r

    def hourly_mean(self) -> float:
        ts = np.arange(self.horizon_s, dtype=np.float64)
        rates = self.hourly * self._shape(ts) / self._shape_mean
        rates = np.maximum(rates, self.clip[0])
        if self.clip[1] is not None:
            rates = np.minimum(rates, self.clip[1])
        return float(rates.mean())


@dataclass
class FlowSpec:
    """Demand at one boundary approach: entry point, rate profile, and routing."""

    entry: Tuple[str, str]                      # (intersection id, arm)
    profile: RateProfile
    turns: Optional[Tuple[str, ...]] = None     # fixed route; None = sample per vehicle
    turn_probs: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TURN_PROBS))


@dataclass(frozen=True)
class SimConfig:
    tick_s: int = 1
    episode_s: int = 3600
    control_interval_s: int = 15
    seed: int = 0

    def __post_init__(self):
        if self.control_interval_s % self.tick_s != 0:
            raise ValueError("control interval must be divisible by tick")
        if self.episode_s % self.control_interval_s != 0:
            raise ValueError("episode length must be divisible by control interval")


class Vehicle:
    __slots__ = ("vid", "entry_time", "turns", "lane_seq", "leg", "due",
                 "queued_since", "accum_wait", "exit_time", "freeflow_s")

    def __init__(self, vid: int, turns, lane_seq):
        self.vid = vid
        self.entry_time: Optional[int] = None
        self.turns = turns
        self.lane_seq = lane_seq
        self.leg = 0
        self.due = math.inf
        self.queued_since: Optional[int] = None
        self.accum_wait = 0.0
        self.exit_time: Optional[float] = None
        self.freeflow_s = 0.0


@dataclass
class CompletedTrip:
    vid: int
    entry_time: int
    exit_time: float
    freeflow_s: float
    wait_s: float

    @property
    def trip_s(self) -> float:
        return self.exit_time - self.entry_time

    @property
    def delay_s(self) -> float:
        return self.trip_s - self.freeflow_s


class Simulation:
    """Mutable traffic state over one road network and one demand realization."""

    def __init__(self, network: RoadNetwork, flows: Sequence[FlowSpec],
                 config: SimConfig = SimConfig()):
        self.net = network
        self.flows = list(flows)
        self.cfg = config
        self.reset(config.seed)

    # -- lifecycle -------------------------------------------------------------

    def reset(self, seed: Optional[int] = None) -> None:
        if seed is not None:
            self._seed = int(seed)
        self.rng = np.random.Generator(np.random.PCG64(self._seed))
        self.clock = 0
        self._next_vid = 0
        self.entered = 0
        self.exited = 0
        self.completed: List[CompletedTrip] = []

        net = self.net
        self.lane_occ: Dict[str, int] = {lid: 0 for lid in net.lanes}
        self.lane_queued: Dict[str, int] = {lid: 0 for lid in net.lanes}
        self.running: Dict[str, deque] = {lid: deque() for lid in net.lanes}
        self.queues: Dict[Tuple[str, int], deque] = {}
        self.acc: Dict[Tuple[str, int], float] = {}
        self.flow_count: Dict[Tuple[str, int], int] = {}
        for inter in net.intersections:
            for m in MOVEMENTS:
                key = (inter.id, m)
                self.queues[key] = deque()
                self.acc[key] = 0.0
                self.flow_count[key] = 0
        self.in_queued: Dict[str, int] = {i.id: 0 for i in net.intersections}
        self.in_occ: Dict[str, int] = {i.id: 0 for i in net.intersections}
        self.qs_sum: Dict[str, float] = {i.id: 0.0 for i in net.intersections}
        self.backlog: List[deque] = [deque() for _ in self.flows]

        # Static lookups.
        self._lane_movement: Dict[str, Tuple[str, int]] = {}
        for inter in net.intersections:
            for (arm, d), lid in inter.in_lanes.items():
                self._lane_movement[lid] = (inter.id, MOVEMENT_INDEX[(arm, d)])
        self._out_lane_ids = {i.id: i.outgoing_lane_ids() for i in net.intersections}
        self.reset_interval_stats()

    def reset_interval_stats(self) -> None:
        ids = [i.id for i in self.net.intersections]
        self._ticks_in_interval = 0
        self._queue_sum = {i: 0.0 for i in ids}
        self._wait_sum = {i: 0.0 for i in ids}
        self._delay_sum = {i: 0.0 for i in ids}
        self._pressure_abs_sum = {i: 0.0 for i in ids}
        for key in self.flow_count:
            self.flow_count[key] = 0

    # -- demand ----------------------------------------------------------------

    def _sample_turn(self, probs: Dict[str, float]) -> str:
        u = self.rng.random()
        acc = 0.0
        for d in DIRECTIONS:
            acc += probs.get(d, 0.0)
            if u < acc:
                return d
        return DIRECTIONS[-1]

    def _build_route(self, flow: FlowSpec) -> Tuple[Tuple[str, ...], Tuple[str, ...]]:
        """Walk the topology sampling turns until the route leaves the network.

        The segment lane taken out of each intersection carries the slot of
        the *next* turn, so turns are picked one hop ahead. Past ``max_hops``
        the route is completed with straight-throughs, which always reach a
        boundary on a finite lattice.
        """
        iid, arm = flow.entry
        fixed = flow.turns
        max_hops = 4 * (self.net.n + 4)

        def pick(step: int) -> str:
            if fixed is not None:
                return fixed[step] if step < len(fixed) else "S"
            return self._sample_turn(flow.turn_probs) if step < max_hops else "S"

        turns: List[str] = [pick(0)]
        inter = self.net.by_id[iid]
        lanes: List[str] = [inter.in_lanes[(arm, turns[0])]]
        cur_iid, cur_arm = iid, arm
        step = 0
        while True:
            inter = self.net.by_id[cur_iid]
            out_arm = dest_arm(cur_arm, turns[step])
            nb = inter.neighbors[out_arm]
            if nb is None:
                lanes.append(inter.out_lanes[(out_arm, turns[step])])
                return tuple(turns), tuple(lanes)
            turns.append(pick(step + 1))
            lanes.append(inter.out_lanes[(out_arm, turns[step + 1])])
            cur_iid, cur_arm = nb, OPPOSITE[out_arm]
            step += 1

    def freeflow_route_time(self, entry_t: int, lane_seq: Sequence[str]) -> float:
        """Free-flow baseline: same route, empty network, same tick quantization."""
        place = float(entry_t)
        for i, lid in enumerate(lane_seq):
            lane = self.net.lanes[lid]
            due = place + lane.free_flow_s
            if i == len(lane_seq) - 1:
                return due - entry_t
            join_clock = math.ceil(due - _EPS)
            latency = math.ceil(1.0 / lane.sat_rate) - 1
            place = float(join_clock + latency)
        return 0.0

    def _spawn(self, t: int) -> None:
        for f_idx, flow in enumerate(self.flows):
            lam = flow.profile.rate(t) / 3600.0 * self.cfg.tick_s
            n = int(self.rng.poisson(lam)) if lam > 0 else 0
            for _ in range(n):
                turns, lane_seq = self._build_route(flow)
                veh = Vehicle(self._next_vid, turns, lane_seq)
                self._next_vid += 1
                self.backlog[f_idx].append(veh)

    def _admit(self, t: int) -> None:
        for q in self.backlog:
            while q:
                veh = q[0]
                lane = self.net.lanes[veh.lane_seq[0]]
                if self.lane_occ[lane.id] >= lane.capacity:
                    break
                q.popleft()
                veh.entry_time = t
                veh.due = t + lane.free_flow_s
                veh.freeflow_s = self.freeflow_route_time(t, veh.lane_seq)
                self.lane_occ[lane.id] += 1
                self.in_occ[lane.downstream] += 1
                self.running[lane.id].append(veh)
                self.entered += 1

    # -- dynamics ----------------------------------------------------------------

    def tick(self, phases: Dict[str, Optional[int]]) -> None:
        """Advance one second with the given active phase index per intersection."""
        t = self.clock
        self._spawn(t)
        self._admit(t)
        self.clock = t + 1
        self._advance_running()
        self._discharge(phases)
        self._collect_tick_stats()

    def _advance_running(self) -> None:
        clock = self.clock
        for lid, dq in self.running.items():
            if not dq:
                continue
            lane = self.net.lanes[lid]
            if lane.downstream is None:
                while dq and dq[0].due <= clock + _EPS:
                    veh = dq.popleft()
                    veh.exit_time = veh.due
                    self.lane_occ[lid] -= 1
                    self.exited += 1
                    self.completed.append(CompletedTrip(
                        veh.vid, veh.entry_time, veh.exit_time,
                        veh.freeflow_s, veh.accum_wait))
            else:
                iid, m = self._lane_movement[lid]
                queue = self.queues[(iid, m)]
                while dq and dq[0].due <= clock + _EPS:
                    veh = dq.popleft()
                    veh.queued_since = clock
                    queue.append(veh)
                    self.lane_queued[lid] += 1
                    self.in_queued[iid] += 1
                    self.qs_sum[iid] += clock

    def _discharge(self, phases: Dict[str, Optional[int]]) -> None:
        clock = self.clock
        for inter in self.net.intersections:
            iid = inter.id
            phase_idx = phases.get(iid)
            if phase_idx is None:          # all-red: only right turns run
                green: Tuple[int, ...] = RIGHT_TURNS
            elif phase_idx == ALL_GREEN:   # diagnostic mode: every movement runs
                green = tuple(MOVEMENTS)
            else:
                green = inter.phase_table[phase_idx].movements + RIGHT_TURNS
            for m in green:
                key = (iid, m)
                queue = self.queues[key]
                if not queue:
                    self.acc[key] = 0.0
                    continue
                mv = inter.movements[m]
                lane_in = self.net.lanes[mv.in_lane]
                sat = lane_in.sat_rate * self.cfg.tick_s
                credit = min(self.acc[key] + sat, max(1.0, math.ceil(sat)))
                n = int(credit)
                while n > 0 and queue:
                    veh = queue[0]
                    target = self.net.lanes[veh.lane_seq[veh.leg + 1]]
                    if self.lane_occ[target.id] >= target.capacity:
                        break
                    queue.popleft()
                    waited = clock - veh.queued_since
                    veh.accum_wait += waited
                    self.lane_queued[mv.in_lane] -= 1
                    self.in_queued[iid] -= 1
                    self.in_occ[iid] -= 1
                    self.qs_sum[iid] -= veh.queued_since
                    self.lane_occ[mv.in_lane] -= 1
                    veh.queued_since = None
                    veh.leg += 1
                    veh.due = clock + target.free_flow_s
                    self.lane_occ[target.id] += 1
                    if target.downstream is not None:
                        self.in_occ[target.downstream] += 1
                    self.running[target.id].append(veh)
                    self.flow_count[key] += 1
                    credit -= 1.0
                    n -= 1
                self.acc[key] = 0.0 if not queue else credit

    def _collect_tick_stats(self) -> None:
        self._ticks_in_interval += 1
        clock = self.clock
        for inter in self.net.intersections:
            iid = inter.id
            qcnt = self.in_queued[iid]
            self._queue_sum[iid] += qcnt
            if qcnt:
                wait_mass = qcnt * clock - self.qs_sum[iid]
                self._wait_sum[iid] += wait_mass / qcnt
                # Approach delay: stopped time spread over everyone approaching.
                self._delay_sum[iid] += wait_mass / self.in_occ[iid]
            self._pressure_abs_sum[iid] += abs(self.pressure_intersection(iid))

    # -- measurements ------------------------------------------------------------

    def queue_length(self, iid: str) -> int:
        """Queued vehicles over all incoming lanes of the intersection."""
        return self.in_queued[iid]

    def pressure_intersection(self, iid: str) -> int:
        """Queued on incoming lanes minus queued on the lanes its outgoing lanes feed."""
        out = 0
        for lid in self._out_lane_ids[iid]:
            out += self.lane_queued[lid]
        return self.in_queued[iid] - out

    def movement_pressure(self, iid: str, m: int) -> int:
        mv = self.net.by_id[iid].movements[m]
        return self.lane_occ[mv.in_lane] - self.lane_occ[mv.out_lane]

    def pressure_phase(self, iid: str, phase_index: int) -> int:
        """Sum of per-movement in/out vehicle-count differences for one phase."""
        inter = self.net.by_id[iid]
        ph = inter.phase_table[phase_index]
        return sum(self.movement_pressure(iid, m) for m in ph.movements)

    def in_network(self) -> int:
        return self.entered - self.exited

    def count_active_vehicles(self) -> int:
        """Full scan over lanes; oracle for the conservation invariant."""
        return sum(self.lane_occ.values())

    def interval_stats(self) -> Dict[str, Dict[str, float]]:
        """Per-intersection interval averages.

        ``queue``: queued vehicles; ``wait``: current-stop wait per queued
        vehicle (s); ``delay``: current-stop wait spread over all vehicles on
        the incoming lanes (s); ``pressure``: |in - out| queue imbalance.
        """
        ticks = max(1, self._ticks_in_interval)
        out = {}
        for inter in self.net.intersections:
            iid = inter.id
            out[iid] = {
                "queue": self._queue_sum[iid] / ticks,
                "wait": self._wait_sum[iid] / ticks,
                "delay": self._delay_sum[iid] / ticks,
                "pressure": self._pressure_abs_sum[iid] / ticks,
            }
        return out

    def movement_flow(self, iid: str, m: int) -> int:
        return self.flow_count[(iid, m)]

    def vehicle_metrics(self) -> Dict[str, float]:
        """Aggregates over completed trips: mean trip time, delay, and wait."""
        if not self.completed:
            return {"completed": 0, "trip_time": 0.0, "delay": 0.0, "wait": 0.0}
        trips = np.array([c.trip_s for c in self.completed])
        delays = np.array([c.delay_s for c in self.completed])
        waits = np.array([c.wait_s for c in self.completed])
        return {
            "completed": len(self.completed),
            "trip_time": float(trips.mean()),
            "delay": float(delays.mean()),
            "wait": float(waits.mean()),
        }

    # -- test hooks ----------------------------------------------------------------

    def inject_vehicle(self, entry_iid: str, entry_arm: str, turns: Sequence[str]) -> Vehicle:
        """Place a vehicle with a fixed route directly at an entry (scripted tests)."""
        flow = FlowSpec((entry_iid, entry_arm), RateProfile(hourly=0.0),
                        turns=tuple(turns))
        route_turns, lane_seq = self._build_route(flow)
        veh = Vehicle(self._next_vid, route_turns, lane_seq)
        self._next_vid += 1
        t = self.clock
        lane = self.net.lanes[lane_seq[0]]
        if self.lane_occ[lane.id] >= lane.capacity:
            raise RuntimeError("entry lane full")
        veh.entry_time = t
        veh.due = t + lane.free_flow_s
        veh.freeflow_s = self.freeflow_route_time(t, lane_seq)
        self.lane_occ[lane.id] += 1
        self.in_occ[lane.downstream] += 1
        self.running[lane.id].append(veh)
        self.entered += 1
        return veh
