"""Road-network topology: lanes, the 12 movements, phases, and grid builders.

Conventions
-----------
* Intersections sit on a lattice; row 0 is the north edge. Arms are compass
  labels N/E/S/W; the approach of a movement names the arm the traffic comes
  *from* (traffic on the N approach travels southbound).
* Each arm carries 3 incoming and 3 outgoing lanes, one per turn slot
  (L/S/R), so every 4-arm intersection has 12 incoming and 12 outgoing lanes.
* A directed road segment between two adjacent intersections is a single
  Lane object: it is simultaneously an outgoing lane of the upstream
  intersection and an incoming lane of the downstream one. Boundary arms get
  separate entry (source-fed) and exit (sink-bound) lanes.
* Movements are numbered 1..12; 1..8 are signal-controlled (through and left
  turns), 9..12 are right turns that run on every tick. A movement's slot on
  its destination arm equals its own turn direction, which makes the
  movement -> outgoing-lane map a bijection.

Networks are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

ARMS = ("N", "E", "S", "W")
DIRECTIONS = ("L", "S", "R")
OPPOSITE = {"N": "S", "S": "N", "E": "W", "W": "E"}

# movement index -> (approach arm, turn direction)
MOVEMENTS: Dict[int, Tuple[str, str]] = {
    1: ("N", "S"), 2: ("N", "L"),
    3: ("E", "S"), 4: ("E", "L"),
    5: ("S", "S"), 6: ("S", "L"),
    7: ("W", "S"), 8: ("W", "L"),
    9: ("N", "R"), 10: ("E", "R"), 11: ("S", "R"), 12: ("W", "R"),
}
CONTROLLED = tuple(range(1, 9))
MOVEMENT_INDEX = {v: k for k, v in MOVEMENTS.items()}

# Destination arm for (approach, direction) under right-hand traffic.
_LEFT_OF = {"N": "E", "E": "S", "S": "W", "W": "N"}   # left turn seen from the approach
_RIGHT_OF = {"N": "W", "E": "N", "S": "E", "W": "S"}


def dest_arm(approach: str, direction: str) -> str:
    if direction == "S":
        return OPPOSITE[approach]
    if direction == "L":
        return _LEFT_OF[approach]
    return _RIGHT_OF[approach]


@dataclass(frozen=True)
class Phase:
    """Two non-conflicting controlled movements released together."""
    id: str
    movements: Tuple[int, int]


def standard_phase_table() -> Tuple[Phase, ...]:
    """The fixed 8-phase table A..H; A pairs movements 1 and 5."""
    pairs = [(1, 5), (2, 6), (3, 7), (4, 8), (1, 2), (3, 4), (5, 6), (7, 8)]
    return tuple(Phase("ABCDEFGH"[i], p) for i, p in enumerate(pairs))


def movements_conflict(m1: int, m2: int) -> bool:
    """Standard conflict rule for controlled movements.

    Compatible pairs: same approach, or same turn type from opposite
    approaches (the two throughs or the two protected lefts of one axis).
    """
    a1, d1 = MOVEMENTS[m1]
    a2, d2 = MOVEMENTS[m2]
    if a1 == a2:
        return False
    if d1 == d2 and OPPOSITE[a1] == a2:
        return False
    return True


@dataclass
class Lane:
    """One directed lane. ``upstream``/``downstream`` are intersection ids or
    None at the network boundary (source-fed entry / sink-bound exit lanes)."""
    id: str
    length_m: float = 300.0
    capacity: int = 40
    free_flow_s: float = 21.6
    sat_rate: float = 0.5
    upstream: Optional[str] = None
    downstream: Optional[str] = None


@dataclass(frozen=True)
class LaneParams:
    length_m: float = 300.0
    capacity: int = 40
    free_flow_s: float = 21.6
    sat_rate: float = 0.5


@dataclass
class Movement:
    index: int
    approach: str
    direction: str
    in_lane: str
    out_lane: str          # canonical target: destination-arm lane in the same slot
    controlled: bool


@dataclass
class Intersection:
    id: str
    index: int
    pos: Tuple[int, int]
    neighbors: Dict[str, Optional[str]]
    in_lanes: Dict[Tuple[str, str], str] = field(default_factory=dict)
    out_lanes: Dict[Tuple[str, str], str] = field(default_factory=dict)
    movements: Dict[int, Movement] = field(default_factory=dict)
    phase_table: Tuple[Phase, ...] = field(default_factory=standard_phase_table)

    @property
    def arm_count(self) -> int:
        return 4

    def incoming_lane_ids(self) -> List[str]:
        return [self.in_lanes[(a, d)] for a in ARMS for d in DIRECTIONS]

    def outgoing_lane_ids(self) -> List[str]:
        return [self.out_lanes[(a, d)] for a in ARMS for d in DIRECTIONS]


@dataclass
class RoadNetwork:
    intersections: List[Intersection]
    lanes: Dict[str, Lane]
    links: List[Tuple[str, str, str]]        # (lane_id, upstream iid, downstream iid)
    sources: List[Tuple[str, str]]           # boundary (intersection, arm) entry points
    sinks: List[Tuple[str, str]]

    def __post_init__(self):
        self.by_id = {i.id: i for i in self.intersections}

    @property
    def n(self) -> int:
        return len(self.intersections)


def _grid_iid(row: int, col: int, cols: int) -> str:
    return f"i{row * cols + col}"


def build_lattice(nodes: List[Tuple[int, int]], lane_params: LaneParams = LaneParams(),
                  cols_hint: Optional[int] = None) -> RoadNetwork:
    """Build a network from explicit lattice node coordinates.

    Adjacent coordinates are linked; missing neighbors become boundary arms
    with sources and sinks. Ids are row-major over the supplied node list.
    """
    nodes = sorted(set((int(r), int(c)) for r, c in nodes))
    if not nodes:
        raise ValueError("need at least one node")
    cols = cols_hint if cols_hint is not None else (max(c for _, c in nodes) + 1)
    coord_to_iid = {rc: _grid_iid(rc[0], rc[1], cols) for rc in nodes}
    offsets = {"N": (-1, 0), "S": (1, 0), "E": (0, 1), "W": (0, -1)}

    lanes: Dict[str, Lane] = {}
    links: List[Tuple[str, str, str]] = []
    sources: List[Tuple[str, str]] = []
    sinks: List[Tuple[str, str]] = []
    intersections: List[Intersection] = []

    def mk_lane(lid: str, up: Optional[str], down: Optional[str]) -> str:
        lanes[lid] = Lane(lid, lane_params.length_m, lane_params.capacity,
                          lane_params.free_flow_s, lane_params.sat_rate, up, down)
        return lid

    for idx, (r, c) in enumerate(nodes):
        iid = coord_to_iid[(r, c)]
        neighbors = {}
        for arm, (dr, dc) in offsets.items():
            neighbors[arm] = coord_to_iid.get((r + dr, c + dc))
        inter = Intersection(id=iid, index=idx, pos=(r, c), neighbors=neighbors)

        for arm in ARMS:
            nb = neighbors[arm]
            for d in DIRECTIONS:
                if nb is None:
                    inter.out_lanes[(arm, d)] = mk_lane(f"out-{iid}-{arm}{d}", iid, None)
                    inter.in_lanes[(arm, d)] = mk_lane(f"in-{iid}-{arm}{d}", None, iid)
                else:
                    # Outgoing segment toward nb; created once, by its upstream owner.
                    out_id = f"{iid}-{arm}{d}"
                    if out_id not in lanes:
                        mk_lane(out_id, iid, nb)
                        links.append((out_id, iid, nb))
                    inter.out_lanes[(arm, d)] = out_id
                    # Incoming segment owned by nb: it leaves nb via the facing arm.
                    in_id = f"{nb}-{OPPOSITE[arm]}{d}"
                    if in_id not in lanes:
                        mk_lane(in_id, nb, iid)
                        links.append((in_id, nb, iid))
                    inter.in_lanes[(arm, d)] = in_id
            if nb is None:
                sources.append((iid, arm))
                sinks.append((iid, arm))

        for m, (appr, d) in MOVEMENTS.items():
            inter.movements[m] = Movement(
                index=m, approach=appr, direction=d,
                in_lane=inter.in_lanes[(appr, d)],
                out_lane=inter.out_lanes[(dest_arm(appr, d), d)],
                controlled=m in CONTROLLED,
            )
        intersections.append(inter)

    return RoadNetwork(intersections, lanes, links, sources, sinks)


def build_grid(rows: int, cols: int, lane_params: LaneParams = LaneParams()) -> RoadNetwork:
    """rows x cols lattice of 4-arm intersections with row-major ids."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    nodes = [(r, c) for r in range(rows) for c in range(cols)]
    return build_lattice(nodes, lane_params, cols_hint=cols)


def validate(network: RoadNetwork) -> List[str]:
    """Check all structural invariants; returns violations (empty list = ok)."""
    bad: List[str] = []
    sources = set(network.sources)
    sinks = set(network.sinks)
    link_by_lane = {}
    for lane_id, up, down in network.links:
        if lane_id in link_by_lane:
            bad.append(f"duplicate link for lane {lane_id}")
        link_by_lane[lane_id] = (up, down)

    # Reverse map: which (intersection, arm, slot) consumes each lane.
    consumers: Dict[str, List[str]] = {}
    for inter in network.intersections:
        for key, lid in inter.in_lanes.items():
            consumers.setdefault(lid, []).append(inter.id)

    for lid, lane in network.lanes.items():
        if lane.capacity < 1:
            bad.append(f"lane {lid}: capacity < 1")
        if lane.free_flow_s <= 0 or lane.sat_rate <= 0 or lane.length_m <= 0:
            bad.append(f"lane {lid}: non-positive parameter")

    for inter in network.intersections:
        table = inter.phase_table
        if len(table) != 8:
            bad.append(f"{inter.id}: phase table has {len(table)} phases, expected 8")
        seen = set()
        counts = {m: 0 for m in CONTROLLED}
        for ph in table:
            ms = frozenset(ph.movements)
            if len(ms) != 2 or not ms <= set(CONTROLLED):
                bad.append(f"{inter.id}: phase {ph.id} is not a pair of controlled movements")
                continue
            if ms in seen:
                bad.append(f"{inter.id}: duplicate phase movement set {sorted(ms)}")
            seen.add(ms)
            m1, m2 = ph.movements
            if movements_conflict(m1, m2):
                bad.append(f"{inter.id}: phase {ph.id} pairs conflicting movements {m1},{m2}")
            for m in ph.movements:
                if m in counts:
                    counts[m] += 1
        for m, k in counts.items():
            if k != 2:
                bad.append(f"{inter.id}: movement multiplicity {k} != 2 for movement {m}")
        if table and set(table[0].movements) != {1, 5}:
            bad.append(f"{inter.id}: first phase must pair movements 1 and 5")

        for m, mv in inter.movements.items():
            for lid, role in ((mv.in_lane, "in"), (mv.out_lane, "out")):
                if lid not in network.lanes:
                    bad.append(f"{inter.id}: movement {m} references unknown lane {lid}")

        for (arm, d), lid in inter.out_lanes.items():
            lane = network.lanes.get(lid)
            if lane is None:
                bad.append(f"{inter.id}: missing out-lane {lid}")
                continue
            if lane.upstream != inter.id:
                bad.append(f"{inter.id}: out-lane {lid} not owned by this intersection")
            if lane.downstream is None:
                if (inter.id, arm) not in sinks:
                    bad.append(f"{inter.id}: boundary out-lane {lid} has no sink")
            else:
                got = consumers.get(lid, [])
                if len(got) != 1 or got[0] != lane.downstream:
                    bad.append(f"unlinked lane: interior out-lane {lid} must feed exactly "
                               f"one downstream in-lane (found {got})")
                if link_by_lane.get(lid) != (inter.id, lane.downstream):
                    bad.append(f"link table inconsistent for lane {lid}")

        for (arm, d), lid in inter.in_lanes.items():
            lane = network.lanes.get(lid)
            if lane is None:
                bad.append(f"{inter.id}: missing in-lane {lid}")
                continue
            if lane.downstream != inter.id:
                bad.append(f"{inter.id}: in-lane {lid} does not terminate here")
            if lane.upstream is None and (inter.id, arm) not in sources:
                bad.append(f"{inter.id}: boundary in-lane {lid} has no source")
    return bad
