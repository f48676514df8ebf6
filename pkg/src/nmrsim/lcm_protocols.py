"""Pulse-driven LCM synchronizers built on the neighborhood-mutual-remainder clock.

* ``MoveAtomicGlobal``: clock modulo MaxN+1 on global pulses.  LOOK/COMPUTE when
  the own light is 0; MOVE when no closed neighbor shows 0.
* ``MoveAtomicLocal``: the same idea on local pulses with a tripled clock,
  published as ``major.minor``; neighbors showing 0.2, 1.0 or 1.1 block MOVE and
  MOVE only happens in the middle third.
* ``Fsync``: min-clock modulo 6D+1 on local pulses with regular-register reads;
  LOOK/COMPUTE at light 2D and MOVE at light 4D.

Each ``*_step`` function is one robot's reaction to one of its pulses.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Any, Iterator, Sequence

from . import trace as tr
from .robot_world import ConfigurationError, RobotState, World
from .topology import Graph, diameter, max_closed_size

NLIGHT_REFRESH_MODES = ("pulse", "move")


@dataclass(frozen=True, order=True)
class TripledLight:
    major: int
    minor: int

    def __post_init__(self):
        if self.major < 0 or self.minor not in (0, 1, 2):
            raise ValueError(f"bad tripled light {self.major}.{self.minor}")

    @classmethod
    def from_clock(cls, lclock: int) -> "TripledLight":
        return cls(lclock // 3, lclock % 3)

    @classmethod
    def parse(cls, text: str) -> "TripledLight":
        major, minor = str(text).split(".")
        return cls(int(major), int(minor))

    @property
    def code(self) -> int:
        return 3 * self.major + self.minor

    def __str__(self) -> str:
        return f"{self.major}.{self.minor}"


# lights 0.2, 1.0 and 1.1 as clock codes
SHIELD_CODES = frozenset({2, 3, 4})
LOOK_CODE = 3


@dataclass(frozen=True)
class FsyncConfig:
    d_bound: int

    def __post_init__(self):
        if self.d_bound < 1:
            raise ConfigurationError(f"d_bound must be positive, got {self.d_bound}")

    @property
    def modulus(self) -> int:
        return 6 * self.d_bound + 1

    @property
    def look_light(self) -> int:
        return 2 * self.d_bound

    @property
    def move_light(self) -> int:
        return 4 * self.d_bound


class RegularRegisterAdversary:
    """Resolves reads that overlap a concurrent light write.

    Modes: ``newest``, ``oldest``, ``seeded`` or ``script``.  A script is a
    list of candidate indices consumed one per ambiguous read (0 = oldest);
    once exhausted, ``fallback`` decides.  Unambiguous reads never consume the
    script.  ``counts`` records the number of candidates at every ambiguous
    read, which lets an explorer enumerate all resolutions.
    """

    def __init__(self, mode: str = "newest", seed: int = 0, script: Sequence[int] = (), fallback: str = "newest"):
        if mode not in ("newest", "oldest", "seeded", "script") or fallback not in ("newest", "oldest"):
            raise ConfigurationError(f"unknown read adversary mode {mode!r}/{fallback!r}")
        self.mode = mode
        self.rng = random.Random(seed)
        self.script = list(script)
        self.fallback = fallback
        self.counts: list[int] = []

    def choose(self, reader: int, writer: int, t: float, candidates: Sequence[Any]) -> Any:
        if len(candidates) == 1:
            return candidates[0]
        self.counts.append(len(candidates))
        mode = self.mode
        if mode == "script":
            if self.script:
                return candidates[min(int(self.script.pop(0)), len(candidates) - 1)]
            mode = self.fallback
        if mode == "seeded":
            return candidates[self.rng.randrange(len(candidates))]
        return candidates[0] if mode == "oldest" else candidates[-1]


# -- shared helpers ------------------------------------------------------------


def _emit_state(w: World, i: int, t: float, **extra) -> None:
    r = w.robots[i]
    w.trace.emit(t, i, tr.STATE, max_n=r.max_n, lc=r.lc, clock=r.clock, nlight=r.nlight, **extra)


def _refresh_nlight_after_move(w: World, i: int):
    def done(t_end: float) -> None:
        w.write_nlight(i, t_end, len(w.closed_nbhd(i, t_end)))
    return done


def _initial_payload(w: World) -> list[dict]:
    return [
        {"light": w.light_codec(r.light), "nlight": r.nlight, "max_n": r.max_n, "lc": r.lc, "clock": r.clock,
         "position": list(r.position)}
        for r in w.robots
    ]


# -- move-atomic with global pulses -------------------------------------------------------


def global_move_atomic_step(w: World, i: int, t: float, nlight_refresh: str = "pulse") -> None:
    r = w.robots[i]
    nbhd = w.closed_nbhd(i, t)
    if nlight_refresh == "pulse":
        w.write_nlight(i, t, len(nbhd))
    r.max_n = max(w.read_nlight(j, t) for j in nbhd)
    if all(w.read_light(j, t) != 0 for j in nbhd) and not r.lc:
        w.execute_move(i, t, on_end=_refresh_nlight_after_move(w, i))
        r.lc = True
    elif r.light == 0 and r.lc:
        w.schedule_compute(i, t, w.look(i, t))
        r.lc = False
    r.clock = (r.clock + 1) % (r.max_n + 1)
    w.write_light(i, t, r.clock)
    _emit_state(w, i, t)


class MoveAtomicGlobal:
    name = "move-atomic-global"

    def __init__(self, nlight_refresh: str = "pulse"):
        if nlight_refresh not in NLIGHT_REFRESH_MODES:
            raise ConfigurationError(f"unknown nlight_refresh {nlight_refresh!r}")
        self.nlight_refresh = nlight_refresh

    def prepare(self, w: World) -> None:
        if w.schedule.mode != "GLOBAL":
            raise ConfigurationError(f"{self.name} needs a global pulse schedule")

    def meta(self, w: World) -> dict:
        return {"protocol": self.name, "k": w.config.k, "offsets": list(w.schedule.offsets),
                "nlight_refresh": self.nlight_refresh, "initial": _initial_payload(w)}

    def random_state(self, rng: random.Random, k: int) -> RobotState:
        return RobotState((0.0, 0.0), nlight=rng.randint(1, k), light=rng.randint(0, k), max_n=rng.randint(1, k),
                          lc=rng.random() < 0.5, clock=rng.randint(0, k))

    def domain(self, k: int) -> Iterator[RobotState]:
        for nl, li, lc, cl in itertools.product(range(1, k + 1), range(k + 1), (False, True), range(k + 1)):
            yield RobotState((0.0, 0.0), nlight=nl, light=li, max_n=1, lc=lc, clock=cl)

    def zero_state(self, k: int) -> RobotState:
        return RobotState((0.0, 0.0), nlight=1, light=0, max_n=1, lc=False, clock=0)

    def on_graph(self, w: World, t: float, g: Graph) -> None:
        pass

    def on_pulse(self, w: World, i: int, t: float) -> None:
        global_move_atomic_step(w, i, t, self.nlight_refresh)


# -- move-atomic with local pulses -------------------------------------------------------


def local_move_atomic_step(w: World, i: int, t: float, nlight_refresh: str = "pulse") -> None:
    r = w.robots[i]
    nbhd = w.closed_nbhd(i, t)
    if nlight_refresh == "pulse":
        w.write_nlight(i, t, len(nbhd))
    r.max_n = max(w.read_nlight(j, t) for j in nbhd)
    pre_clock = r.clock
    moved = looked = False
    if all(w.read_light(j, t) not in SHIELD_CODES for j in nbhd) and pre_clock % 3 == 1 and not r.lc:
        w.execute_move(i, t, on_end=_refresh_nlight_after_move(w, i))
        r.lc = True
        moved = True
    elif r.light == LOOK_CODE and r.lc:
        w.schedule_compute(i, t, w.look(i, t))
        r.lc = False
        looked = True
    r.clock = (r.clock + 1) % (3 * r.max_n + 3)
    w.write_light(i, t, r.clock)
    _emit_state(w, i, t, pre_clock=pre_clock, moved=moved, looked=looked)


class MoveAtomicLocal(MoveAtomicGlobal):
    name = "move-atomic-local"

    def __init__(self, nlight_refresh: str = "pulse"):
        super().__init__(nlight_refresh)

    def prepare(self, w: World) -> None:
        w.light_codec = lambda code: str(TripledLight.from_clock(code))

    def random_state(self, rng: random.Random, k: int) -> RobotState:
        top = 3 * k + 2
        return RobotState((0.0, 0.0), nlight=rng.randint(1, k), light=rng.randint(0, top), max_n=rng.randint(1, k),
                          lc=rng.random() < 0.5, clock=rng.randint(0, top))

    def domain(self, k: int) -> Iterator[RobotState]:
        top = 3 * k + 2
        for nl, li, lc, cl in itertools.product(range(1, k + 1), range(top + 1), (False, True), range(top + 1)):
            yield RobotState((0.0, 0.0), nlight=nl, light=li, max_n=1, lc=lc, clock=cl)

    def on_pulse(self, w: World, i: int, t: float) -> None:
        local_move_atomic_step(w, i, t, self.nlight_refresh)


# -- FSYNC via min-clock -----------------------------------------------------------------


def fsync_step(w: World, i: int, t: float, cfg: FsyncConfig, adv: RegularRegisterAdversary,
               trigger: str = "edge") -> None:
    r = w.robots[i]
    reads = []
    for j in w.closed_nbhd(i, t):
        if j == i:
            continue
        # one read per neighbor somewhere in the elapsed time unit
        reads.append([j, adv.choose(i, j, t, w.light_candidates(j, t - 1.0, t))])
    prev = r.light
    r.light = (min([prev] + [v for _, v in reads]) + 1) % cfg.modulus
    r.clock = r.light
    w.write_light(i, t, r.light)
    fresh = trigger == "level" or r.light != prev
    if r.light == cfg.look_light and fresh:
        w.schedule_compute(i, t, w.look(i, t))
    elif r.light == cfg.move_light and fresh:
        w.execute_move(i, t)
    w.trace.emit(t, i, tr.STATE, light=r.light, prev=prev, reads=reads)


class Fsync:
    name = "fsync"

    def __init__(self, cfg: FsyncConfig, adversary: RegularRegisterAdversary | None = None, trigger: str = "edge"):
        if trigger not in ("edge", "level"):
            raise ConfigurationError(f"unknown trigger {trigger!r}")
        self.cfg = cfg
        self.adversary = adversary or RegularRegisterAdversary()
        self.trigger = trigger

    def prepare(self, w: World) -> None:
        self.on_graph(w, 0.0, w.visibility_graph())

    def meta(self, w: World) -> dict:
        return {"protocol": self.name, "k": w.config.k, "offsets": list(w.schedule.offsets),
                "d_bound": self.cfg.d_bound, "trigger": self.trigger,
                "initial": [{"light": r.light, "position": list(r.position)} for r in w.robots]}

    def random_state(self, rng: random.Random, k: int) -> RobotState:
        v = rng.randrange(self.cfg.modulus)
        return RobotState((0.0, 0.0), light=v, clock=v)

    def domain(self, k: int) -> Iterator[RobotState]:
        for v in range(self.cfg.modulus):
            yield RobotState((0.0, 0.0), light=v, clock=v)

    def zero_state(self, k: int) -> RobotState:
        return RobotState((0.0, 0.0), light=0, clock=0)

    def on_graph(self, w: World, t: float, g: Graph) -> None:
        if not g.is_connected():
            raise ConfigurationError(f"fsync needs a connected graph (t={t})")
        if diameter(g) > self.cfg.d_bound:
            raise ConfigurationError(f"d_bound {self.cfg.d_bound} is below the diameter {diameter(g)} (t={t})")

    def on_pulse(self, w: World, i: int, t: float) -> None:
        fsync_step(w, i, t, self.cfg, self.adversary, self.trigger)


# -- initial configurations ------------------------------------------------------------


def adversarial_robot_init(w: World, protocol, seed: int) -> list[RobotState]:
    """Draw every protocol variable uniformly from its declared domain and install it."""
    rng = random.Random(seed)
    states = [protocol.random_state(rng, w.config.k) for _ in range(w.config.k)]
    protocol.prepare(w)
    w.install(states)
    return states


def install_states(w: World, protocol, states: Sequence[RobotState]) -> None:
    protocol.prepare(w)
    w.install([RobotState(s.position, s.nlight, s.light, s.max_n, s.lc, s.clock) for s in states])


def enumerate_robot_inits(protocol, k: int) -> Iterator[tuple[RobotState, ...]]:
    """Every joint initial state over the protocol's per-robot domain (small k only)."""
    return itertools.product(list(protocol.domain(k)), repeat=k)


# -- stabilization prefixes and windows ------------------------------------------------


def max_closed_over_trace(trace: tr.Trace) -> int:
    timeline = tr.GraphTimeline(trace)
    return max(max_closed_size(g, i) for g in timeline.graphs for i in range(g.node_count))


def default_start(trace: tr.Trace) -> float:
    """Time from which post-stabilization properties are asserted, by protocol."""
    meta = trace.meta
    protocol = meta["protocol"]
    if protocol == "nmr":
        return 2.0
    max_offset = max(meta.get("offsets", [0.0]))
    if protocol == "move-atomic-global":
        excluded = 2 + max_closed_over_trace(trace) + 1
        return max_offset + excluded
    if protocol == "move-atomic-local":
        excluded = 2 + 3 * max_closed_over_trace(trace) + 3
        return max_offset + excluded
    if protocol == "fsync":
        d = meta["d_bound"]
        # every robot has completed (6D+1) + 2D pulses
        return max_offset + (6 * d + 1) + 2 * d - 1
    raise ValueError(f"unknown protocol {protocol!r}")


def liveness_window(trace: tr.Trace) -> int:
    """Pulses within which every robot must LOOK, COMPUTE and MOVE after stabilization."""
    protocol = trace.meta["protocol"]
    m = max_closed_over_trace(trace)
    if protocol == "move-atomic-global":
        return 2 * (m + 1)
    if protocol == "move-atomic-local":
        return 2 * (3 * m + 3)
    if protocol == "fsync":
        return trace.meta["d_bound"] * 6 + 1
    raise ValueError(f"no liveness window for {protocol!r}")
