"""Robots in the plane driven by global or local pulses.

Robots carry lights that neighbors read, see each other within the visibility
radius ``phi`` and take LOOK snapshots within ``phi - y_cap``.  A pulse of
robot ``i`` at time ``t`` hands control to a protocol; phases triggered there
finish before ``t + 1``:

* LOOK is an instant at ``t``,
* COMPUTE is an instant at ``t + compute_delay``,
* MOVE spans ``[t, t + move_duration]`` with linear motion along the segment.

Light and Nlight writes are timestamped; ordinary reads return the value
most recently written strictly before the reader's instant, so under global
pulses everyone sees the previous round's values.
"""

from __future__ import annotations

import copy
import heapq
import math
import random
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Sequence

from . import trace as tr
from .topology import Graph, Point2D, closed_neighborhood, distance, geometric_graph

GLOBAL = "GLOBAL"
LOCAL = "LOCAL"


class ConfigurationError(ValueError):
    """A world or protocol parameter violates its declared domain."""


@dataclass(frozen=True)
class WorldConfig:
    k: int
    phi: float = 1.0
    y_cap: float = 0.2
    sigma: float = 0.05
    compute_delay: float = 0.1
    move_duration: float = 0.9

    def __post_init__(self):
        if self.k < 1:
            raise ConfigurationError(f"robot count must be positive, got {self.k}")
        if not self.sigma > 0:
            raise ConfigurationError("sigma must be positive")
        if not 0 < self.y_cap < self.phi:
            raise ConfigurationError(f"need 0 < y_cap < phi, got y_cap={self.y_cap}, phi={self.phi}")
        if not (0 < self.compute_delay < 1 and 0 < self.move_duration < 1):
            raise ConfigurationError("phases must finish before the next pulse")

    @property
    def look_radius(self) -> float:
        return self.phi - self.y_cap


@dataclass(frozen=True)
class PulseSchedule:
    mode: str
    offsets: tuple[float, ...]

    def __post_init__(self):
        if self.mode not in (GLOBAL, LOCAL):
            raise ConfigurationError(f"unknown schedule mode {self.mode!r}")
        if any(not 0 <= o < 1 for o in self.offsets):
            raise ConfigurationError("offsets must lie in [0, 1)")
        if self.mode == GLOBAL and any(self.offsets):
            raise ConfigurationError("global pulses have zero offsets")
        if self.mode == LOCAL and len(set(self.offsets)) != len(self.offsets):
            raise ConfigurationError("local pulse offsets must be pairwise distinct")

    @classmethod
    def global_pulses(cls, k: int) -> "PulseSchedule":
        return cls(GLOBAL, (0.0,) * k)

    @classmethod
    def local_pulses(cls, offsets: Sequence[float], seed: int = 0) -> "PulseSchedule":
        """Local schedule; duplicate offsets are nudged apart deterministically."""
        rng = random.Random(seed)
        out: list[float] = []
        for o in offsets:
            o = float(o)
            while o in out:
                o = (o + rng.uniform(1e-6, 1e-3)) % 1.0
            out.append(o)
        return cls(LOCAL, tuple(out))

    @classmethod
    def seeded_local(cls, k: int, seed: int) -> "PulseSchedule":
        rng = random.Random(seed)
        return cls.local_pulses([round(rng.random(), 6) for _ in range(k)], seed)

    @property
    def max_offset(self) -> float:
        return max(self.offsets)


def pulse_sequence(schedule: PulseSchedule, horizon: int) -> list[tuple[float, int]]:
    """(time, robot) pairs for ``horizon`` pulses of every robot, in time order."""
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    return sorted((o + n, i) for i, o in enumerate(schedule.offsets) for n in range(horizon))


# -- robots and the pluggable LCM algorithm -----------------------------------


@dataclass
class RobotState:
    position: Point2D
    nlight: int = 1
    light: int = 0
    max_n: int = 1
    lc: bool = False
    clock: int = 0
    user_state: Any = None
    color: Any = None
    target: Point2D | None = None


@dataclass(frozen=True)
class SnapshotEntry:
    offset: Point2D
    light: int
    nlight: int
    color: Any = None


@dataclass(frozen=True)
class Snapshot:
    entries: tuple[SnapshotEntry, ...]
    # observer bookkeeping for the trace; not meant for algorithms
    ids: tuple[int, ...] = field(default=(), compare=False)


class LcmAlgorithm(Protocol):
    def compute(self, snapshot: Snapshot, user_state: Any) -> tuple[Point2D, Any, Any]:
        """Return (displacement toward target, new user state, new color)."""


class Stay:
    name = "stay"

    def compute(self, snapshot, user_state):
        return (0.0, 0.0), user_state, None


class Centroid:
    name = "centroid"

    def compute(self, snapshot, user_state):
        pts = [e.offset for e in snapshot.entries] + [(0.0, 0.0)]
        return (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts)), user_state, None


class StepEast:
    name = "step-east"

    def __init__(self, step: float):
        self.step = step

    def compute(self, snapshot, user_state):
        return (self.step, 0.0), user_state, None


def make_algorithm(name: str, config: WorldConfig) -> LcmAlgorithm:
    if name == "stay":
        return Stay()
    if name == "centroid":
        return Centroid()
    if name == "step-east":
        return StepEast(config.y_cap / 2)
    raise ConfigurationError(f"unknown LCM algorithm {name!r}")


class StopAdversary:
    """Chooses how far along its allowance each MOVE gets before stopping.

    ``mode`` is ``"zero"`` (stop as early as allowed), ``"one"`` (go the full
    distance), ``"seeded"`` (uniform draws) or ``"script"``; a script maps a
    robot id to the fractions of its successive moves and falls back to 0.
    """

    def __init__(self, mode: str = "zero", seed: int = 0, script: dict[int, Sequence[float]] | None = None):
        if mode not in ("zero", "one", "seeded", "script"):
            raise ConfigurationError(f"unknown stop mode {mode!r}")
        self.mode = mode
        self.rng = random.Random(seed)
        self.script = {int(k): list(v) for k, v in (script or {}).items()}

    def fraction(self, robot: int, move_index: int) -> float:
        if self.mode == "one":
            return 1.0
        if self.mode == "seeded":
            return self.rng.random()
        if self.mode == "script":
            seq = self.script.get(robot, [])
            return float(seq[move_index]) if move_index < len(seq) else 0.0
        return 0.0


def move_distance(d: float, sigma: float, y_cap: float, stop_fraction: float) -> float:
    """Distance actually travelled toward a target ``d`` away."""
    if d <= sigma:
        return d
    m = min(d, y_cap)
    return max(min(sigma, m), stop_fraction * m)


class NullTrace(tr.Trace):
    def append(self, event):
        pass


# -- the world ---------------------------------------------------------------

_PRIO_MOVE_END, _PRIO_COMPUTE, _PRIO_PULSE = 0, 1, 2


class World:
    def __init__(
        self,
        config: WorldConfig,
        positions: Sequence[Point2D],
        schedule: PulseSchedule,
        algorithm: LcmAlgorithm | None = None,
        stops: StopAdversary | None = None,
        trace: tr.Trace | None = None,
    ):
        if len(positions) != config.k or len(schedule.offsets) != config.k:
            raise ConfigurationError("positions, offsets and k disagree")
        self.config = config
        self.schedule = schedule
        self.algorithm = algorithm or Stay()
        self.stops = stops or StopAdversary()
        self.trace = trace if trace is not None else tr.Trace()
        self.robots = [RobotState(position=(float(p[0]), float(p[1]))) for p in positions]
        for r in self.robots:
            if not all(math.isfinite(c) for c in r.position):
                raise ConfigurationError(f"non-finite position {r.position}")
        k = config.k
        self._motion: list[tuple[float, Point2D, float, Point2D] | None] = [None] * k
        self._light_hist: list[tuple[list[float], list[Any]]] = [([], []) for _ in range(k)]
        self._nlight_hist: list[tuple[list[float], list[int]]] = [([], []) for _ in range(k)]
        self._light0: list[Any] = [0] * k
        self._nlight0: list[int] = [1] * k
        self.move_counts = [0] * k
        self.light_codec: Callable[[Any], Any] = lambda v: v
        self._queue: list = []
        self._seq = 0
        self._graph_cache: tuple[float, Graph] | None = None
        self._last_graph_edges: list | None = None
        self._last_pulse_time: float | None = None
        self.protocol = None
        self.pulses_done = [0] * k

    # -- state installation ----------------------------------------------------

    def install(self, states: Sequence[RobotState]) -> None:
        """Adopt initial robot variables; their lights count as written at -infinity."""
        for i, s in enumerate(states):
            s.position = self.robots[i].position
            self.robots[i] = s
            self._light0[i] = s.light
            self._nlight0[i] = s.nlight

    # -- geometry --------------------------------------------------------------

    def position_at(self, i: int, t: float) -> Point2D:
        m = self._motion[i]
        if m is None:
            return self.robots[i].position
        t0, p0, t1, p1 = m
        if t <= t0:
            return p0
        if t >= t1:
            return p1
        a = (t - t0) / (t1 - t0)
        return (p0[0] + a * (p1[0] - p0[0]), p0[1] + a * (p1[1] - p0[1]))

    def positions_at(self, t: float) -> list[Point2D]:
        return [self.position_at(i, t) for i in range(self.config.k)]

    def visibility_graph(self, t: float | None = None) -> Graph:
        if t is None:
            return geometric_graph([r.position for r in self.robots], self.config.phi)
        if self._graph_cache is not None and self._graph_cache[0] == t:
            return self._graph_cache[1]
        g = geometric_graph(self.positions_at(t), self.config.phi)
        self._graph_cache = (t, g)
        return g

    def closed_nbhd(self, i: int, t: float) -> list[int]:
        return sorted(closed_neighborhood(self.visibility_graph(t), i))

    # -- lights ----------------------------------------------------------------

    def read_light(self, j: int, t: float) -> Any:
        times, vals = self._light_hist[j]
        idx = bisect_left(times, t) - 1
        return vals[idx] if idx >= 0 else self._light0[j]

    def read_nlight(self, j: int, t: float) -> int:
        times, vals = self._nlight_hist[j]
        idx = bisect_left(times, t) - 1
        return vals[idx] if idx >= 0 else self._nlight0[j]

    def light_candidates(self, j: int, t0: float, t1: float) -> list[Any]:
        """Values of ``j``'s light in force at some instant of the open interval (t0, t1)."""
        times, vals = self._light_hist[j]
        idx = bisect_right(times, t0) - 1
        out = [vals[idx] if idx >= 0 else self._light0[j]]
        for n in range(idx + 1, len(times)):
            if times[n] >= t1:
                break
            out.append(vals[n])
        return out

    def write_light(self, i: int, t: float, light: Any) -> None:
        self.robots[i].light = light
        self._light_hist[i][0].append(t)
        self._light_hist[i][1].append(light)
        self.trace.emit(t, i, tr.LIGHT_SET, light=self.light_codec(light))

    def write_nlight(self, i: int, t: float, nlight: int) -> None:
        self.robots[i].nlight = nlight
        self._nlight_hist[i][0].append(t)
        self._nlight_hist[i][1].append(nlight)
        self.trace.emit(t, i, tr.LIGHT_SET, nlight=nlight)

    # -- phases ----------------------------------------------------------------

    def look(self, i: int, t: float) -> Snapshot:
        here = self.position_at(i, t)
        radius = self.config.look_radius
        entries, ids = [], []
        for j in range(self.config.k):
            if j == i:
                continue
            p = self.position_at(j, t)
            if distance(here, p) <= radius:
                ids.append(j)
                entries.append(
                    SnapshotEntry((p[0] - here[0], p[1] - here[1]), self.read_light(j, t),
                                  self.read_nlight(j, t), self.robots[j].color)
                )
        self.trace.emit(t, i, tr.LOOK, seen=ids, light=self.light_codec(self.robots[i].light))
        return Snapshot(tuple(entries), tuple(ids))

    def schedule_compute(self, i: int, t: float, snapshot: Snapshot) -> None:
        self._push(t + self.config.compute_delay, _PRIO_COMPUTE, ("compute", i, snapshot))

    def _do_compute(self, t: float, i: int, snapshot: Snapshot) -> None:
        r = self.robots[i]
        disp, r.user_state, r.color = self.algorithm.compute(snapshot, r.user_state)
        here = self.position_at(i, t)
        r.target = (here[0] + disp[0], here[1] + disp[1])
        self.trace.emit(t, i, tr.COMPUTE, target=list(r.target))

    def execute_move(self, i: int, t: float, target: Point2D | None = None, stop_fraction: float | None = None,
                     on_end: Callable[[float], None] | None = None) -> Point2D:
        """Start a MOVE toward ``target`` (default: the buffered COMPUTE result)."""
        r = self.robots[i]
        if target is None:
            target = r.target if r.target is not None else r.position
        if not all(math.isfinite(c) for c in target):
            raise ConfigurationError(f"non-finite move target {target}")
        if stop_fraction is None:
            stop_fraction = self.stops.fraction(i, self.move_counts[i])
        start = self.position_at(i, t)
        d = distance(start, target)
        travel = move_distance(d, self.config.sigma, self.config.y_cap, stop_fraction)
        if d == 0 or travel >= d:
            end = (float(target[0]), float(target[1]))
        else:
            a = travel / d
            end = (start[0] + a * (target[0] - start[0]), start[1] + a * (target[1] - start[1]))
        t_end = t + self.config.move_duration
        self._motion[i] = (t, start, t_end, end)
        self.move_counts[i] += 1
        r.target = None
        self.trace.emit(t, i, tr.MOVE_START, start=list(start), end=list(end), target=list(target))
        self._push(t_end, _PRIO_MOVE_END, ("move_end", i, on_end))
        return end

    def _do_move_end(self, t: float, i: int, on_end) -> None:
        self.robots[i].position = self._motion[i][3]
        self.trace.emit(t, i, tr.MOVE_END, position=list(self.robots[i].position))
        if on_end is not None:
            on_end(t)

    # -- event loop ------------------------------------------------------------

    def _push(self, t: float, prio: int, item: tuple) -> None:
        heapq.heappush(self._queue, (t, prio, self._seq, item))
        self._seq += 1

    def start(self, protocol, horizon: int) -> None:
        """Attach ``protocol`` and queue ``horizon`` pulses per robot."""
        self.protocol = protocol
        self.trace.emit(0.0, tr.SYSTEM, tr.META, **protocol.meta(self))
        for t, i in pulse_sequence(self.schedule, horizon):
            self._push(t, _PRIO_PULSE, ("pulse", i))

    def step(self) -> bool:
        """Process queued events through the next pulse; False once the queue is drained."""
        while self._queue:
            t, _, _, item = heapq.heappop(self._queue)
            kind = item[0]
            if kind == "pulse":
                self._do_pulse(t, item[1])
                self._drain_until_next_pulse()
                return True
            if kind == "compute":
                self._do_compute(t, item[1], item[2])
            else:
                self._do_move_end(t, item[1], item[2])
        return False

    def _drain_until_next_pulse(self) -> None:
        # non-pulse events that precede the next pulse belong to this step
        while self._queue and self._queue[0][1] != _PRIO_PULSE:
            t, _, _, item = heapq.heappop(self._queue)
            if item[0] == "compute":
                self._do_compute(t, item[1], item[2])
            else:
                self._do_move_end(t, item[1], item[2])

    def _do_pulse(self, t: float, i: int) -> None:
        if t != self._last_pulse_time:
            self._last_pulse_time = t
            g = self.visibility_graph(t)
            edges = g.edges
            if edges != self._last_graph_edges:
                self._last_graph_edges = edges
                self.trace.emit(t, tr.SYSTEM, tr.GRAPH, **tr.graph_payload(g))
                self.protocol.on_graph(self, t, g)
        self.trace.emit(t, i, tr.PULSE)
        self.protocol.on_pulse(self, i, t)
        self.pulses_done[i] += 1

    def run(self, protocol, horizon: int) -> tr.Trace:
        self.start(protocol, horizon)
        while self.step():
            pass
        return self.trace

    def clone(self) -> "World":
        return copy.deepcopy(self)
