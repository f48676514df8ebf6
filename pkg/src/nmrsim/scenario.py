"""Scenario files: load, validate and execute one run per seed.

A scenario is a TOML document::

    name = "alg1-path3"
    protocol = "nmr"          # nmr | move-atomic-global | move-atomic-local | fsync
    horizon = 40
    seeds = [0]               # a list, "A:B" (half open) or "all" for enumerate mode

    [graph]                   # nmr only
    kind = "path"
    k = 3

    [world]                   # robot protocols only
    k = 3
    layout = "line"           # line | ring | random | explicit
    spacing = 0.9
    algorithm = "stay"

    [schedule]
    mode = "local"            # global | local
    offsets = "seeded"        # or an explicit list

    [init]
    mode = "adversarial"      # zeros | explicit | adversarial | enumerate

    [reads]                   # fsync only
    mode = "seeded"           # newest | oldest | seeded | script | exhaustive

Integer ranges such as ``k = [2, 6]`` are drawn per seed.
"""

from __future__ import annotations

import math
import random
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import checkers as ck
from . import lcm_protocols as lp
from . import nmr_core
from . import trace as tr
from .explore import ExplorationReport, explore
from .robot_world import (ConfigurationError, NullTrace, PulseSchedule, RobotState, StopAdversary, World, WorldConfig,
                          make_algorithm)
from .topology import GraphError, diameter, geometric_graph, graph_from_spec

PROTOCOLS = ("nmr", "move-atomic-global", "move-atomic-local", "fsync")
INIT_MODES = ("zeros", "explicit", "adversarial", "enumerate")
READ_MODES = ("newest", "oldest", "seeded", "script", "exhaustive")
LAYOUTS = ("line", "ring", "random", "explicit")

BUNDLED_DIR = Path(__file__).parent / "scenarios"


class ScenarioError(ValueError):
    """The scenario file is malformed or names values outside their domains."""


@dataclass
class Scenario:
    name: str
    protocol: str
    horizon: int
    seeds: list[int]
    graph: dict = field(default_factory=dict)
    world: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    init: dict = field(default_factory=dict)
    reads: dict = field(default_factory=dict)
    stops: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    checkers: list[str] | None = None
    checker_options: dict = field(default_factory=dict)
    start: float | None = None

    @property
    def exhaustive(self) -> bool:
        return self.reads.get("mode") == "exhaustive"


@dataclass
class RunOutcome:
    label: str
    seed: int
    trace: tr.Trace | None
    verdicts: list[ck.Verdict]
    stabilization: float | None
    exploration: ExplorationReport | None = None

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def summary(self) -> dict:
        out: dict[str, Any] = {
            "label": self.label,
            "seed": self.seed,
            "pass": self.passed,
            "stabilization": self.stabilization,
            "violations": {v.name: [len(v.late_violations), len(v.violations)] for v in self.verdicts},
        }
        if self.trace is not None:
            out["events"] = self.trace.counts()
        if self.exploration is not None:
            out["states"] = self.exploration.states
            out["branches"] = self.exploration.branches
        return out


# -- loading ------------------------------------------------------------------------


def resolve(name_or_path: str | Path) -> Path:
    """A path on disk, or the name of a bundled scenario."""
    p = Path(name_or_path)
    if p.is_file():
        return p
    bundled = BUNDLED_DIR / f"{name_or_path}.toml"
    if bundled.is_file():
        return bundled
    raise ScenarioError(f"no scenario file or bundled scenario named {str(name_or_path)!r}")


def bundled_names() -> list[str]:
    return sorted(p.stem for p in BUNDLED_DIR.glob("*.toml"))


def parse_seeds(value: Any) -> list[int] | str:
    if value == "all":
        return "all"
    if isinstance(value, int) and not isinstance(value, bool):
        return [value]
    if isinstance(value, str) and ":" in value:
        a, b = value.split(":", 1)
        try:
            lo, hi = int(a), int(b)
        except ValueError:
            raise ScenarioError(f"bad seed range {value!r}") from None
        return list(range(lo, hi))
    if isinstance(value, list) and all(isinstance(s, int) and not isinstance(s, bool) for s in value):
        return list(value)
    raise ScenarioError(f"seeds must be an int, a list, 'A:B' or 'all', got {value!r}")


def _section(doc: dict, key: str) -> dict:
    v = doc.get(key, {})
    if not isinstance(v, dict):
        raise ScenarioError(f"[{key}] must be a table")
    return dict(v)


def load(path: str | Path) -> Scenario:
    p = resolve(path)
    try:
        doc = tomllib.loads(p.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"{p}: {exc}") from None
    return from_dict(doc, default_name=p.stem)


def from_dict(doc: dict, default_name: str = "scenario") -> Scenario:
    known = {"name", "protocol", "horizon", "seeds", "graph", "world", "schedule", "init", "reads", "stops",
             "params", "checkers", "checker_options", "start"}
    extra = set(doc) - known
    if extra:
        raise ScenarioError(f"unknown top-level keys {sorted(extra)}")
    protocol = doc.get("protocol")
    if protocol not in PROTOCOLS:
        raise ScenarioError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    horizon = doc.get("horizon")
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        raise ScenarioError(f"horizon must be a positive integer, got {horizon!r}")
    checkers = doc.get("checkers")
    if checkers is not None:
        if not isinstance(checkers, list) or any(c not in ck.CHECKERS for c in checkers):
            raise ScenarioError(f"checkers must be a list drawn from {sorted(ck.CHECKERS)}")
    scn = Scenario(
        name=str(doc.get("name", default_name)),
        protocol=protocol,
        horizon=horizon,
        seeds=[],
        graph=_section(doc, "graph"),
        world=_section(doc, "world"),
        schedule=_section(doc, "schedule"),
        init=_section(doc, "init"),
        reads=_section(doc, "reads"),
        stops=_section(doc, "stops"),
        params=_section(doc, "params"),
        checkers=checkers,
        checker_options=_section(doc, "checker_options"),
        start=doc.get("start"),
    )
    seeds = parse_seeds(doc.get("seeds", [0]))
    scn.seeds = [0] if seeds == "all" else seeds
    validate(scn)
    if seeds == "all":
        scn.seeds = list(range(count_enumerated(scn)))
    return scn


def validate(scn: Scenario) -> None:
    """Structural checks plus a dry build of the first seed's setup."""
    mode = scn.init.get("mode", "adversarial")
    if mode not in INIT_MODES:
        raise ScenarioError(f"init.mode must be one of {INIT_MODES}, got {mode!r}")
    if scn.protocol == "nmr":
        if not scn.graph:
            raise ScenarioError("protocol nmr needs a [graph] table")
        if scn.exhaustive:
            raise ScenarioError("exhaustive reads only apply to fsync")
    else:
        if not scn.world:
            raise ScenarioError(f"protocol {scn.protocol} needs a [world] table")
        if scn.world.get("layout", "line") not in LAYOUTS:
            raise ScenarioError(f"world.layout must be one of {LAYOUTS}")
    if scn.reads.get("mode", "newest") not in READ_MODES:
        raise ScenarioError(f"reads.mode must be one of {READ_MODES}")
    if scn.protocol == "fsync":
        d = scn.params.get("d_bound")
        if not isinstance(d, int) or isinstance(d, bool) or d < 1:
            raise ScenarioError(f"fsync needs a positive integer params.d_bound, got {d!r}")
    if scn.exhaustive and mode != "enumerate" and mode != "explicit":
        raise ScenarioError("exhaustive reads need init.mode 'enumerate' or 'explicit'")
    if not scn.seeds:
        raise ScenarioError("the seed set is empty")
    try:
        if scn.protocol == "nmr":
            _nmr_graph(scn, scn.seeds[0])
        else:
            w, p = _robot_world(scn, scn.seeds[0])
            p.prepare(w)
    except (ConfigurationError, GraphError, ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"scenario {scn.name!r}: {exc}") from None


# -- building blocks ----------------------------------------------------------------


def _rng(seed: int, stream: str) -> random.Random:
    return random.Random(f"{seed}:{stream}")


def _draw_int(value: Any, seed: int, stream: str) -> int:
    if isinstance(value, list):
        if len(value) != 2 or value[0] > value[1]:
            raise ScenarioError(f"integer range must be [lo, hi], got {value!r}")
        return _rng(seed, stream).randint(int(value[0]), int(value[1]))
    return int(value)


def _nmr_graph(scn: Scenario, seed: int):
    spec = dict(scn.graph)
    if "k" in spec:
        spec["k"] = _draw_int(spec["k"], seed, "k")
    if spec.get("kind") == "random-connected" and "seed" not in spec:
        spec["seed"] = seed
    return graph_from_spec(spec)


def _positions(world: dict, k: int, seed: int) -> list[tuple[float, float]]:
    layout = world.get("layout", "line")
    if layout == "explicit":
        pts = world.get("positions")
        if not isinstance(pts, list) or len(pts) != k:
            raise ScenarioError(f"world.positions must list {k} points")
        return [(float(x), float(y)) for x, y in pts]
    if layout == "line":
        s = float(world.get("spacing", 0.9))
        return [(s * i, 0.0) for i in range(k)]
    if layout == "ring":
        s = float(world.get("spacing", 0.9))
        if k == 1:
            return [(0.0, 0.0)]
        r = s / (2 * math.sin(math.pi / k))
        return [(round(r * math.cos(2 * math.pi * i / k), 12), round(r * math.sin(2 * math.pi * i / k), 12))
                for i in range(k)]
    side = float(world.get("box", 2.0))
    rng = _rng(seed, "layout")
    return [(rng.uniform(0, side), rng.uniform(0, side)) for _ in range(k)]


def _schedule(scn: Scenario, k: int, seed: int) -> PulseSchedule:
    mode = scn.schedule.get("mode", "global" if scn.protocol == "move-atomic-global" else "local")
    if mode == "global":
        return PulseSchedule.global_pulses(k)
    if mode != "local":
        raise ScenarioError(f"schedule.mode must be global or local, got {mode!r}")
    offsets = scn.schedule.get("offsets", "seeded")
    if offsets == "seeded":
        return PulseSchedule.seeded_local(k, seed)
    if not isinstance(offsets, list) or len(offsets) != k:
        raise ScenarioError(f"schedule.offsets must be 'seeded' or a list of {k} numbers")
    return PulseSchedule.local_pulses([float(o) for o in offsets], seed)


def _protocol(scn: Scenario, seed: int):
    if scn.protocol == "move-atomic-global":
        return lp.MoveAtomicGlobal(scn.params.get("nlight_refresh", "pulse"))
    if scn.protocol == "move-atomic-local":
        return lp.MoveAtomicLocal(scn.params.get("nlight_refresh", "pulse"))
    mode = scn.reads.get("mode", "newest")
    adv = lp.RegularRegisterAdversary(
        "script" if mode == "exhaustive" else mode,
        seed=int(scn.reads.get("seed", seed)),
        script=scn.reads.get("script", []),
        fallback=scn.reads.get("fallback", "newest"),
    )
    return lp.Fsync(lp.FsyncConfig(scn.params["d_bound"]), adv, scn.params.get("trigger", "edge"))


def _robot_world(scn: Scenario, seed: int, trace: tr.Trace | None = None) -> tuple[World, Any]:
    wd = scn.world
    k = _draw_int(wd.get("k", 2), seed, "k")
    cfg = WorldConfig(k, **{key: float(wd[key]) for key in ("phi", "y_cap", "sigma") if key in wd})
    positions = _positions(wd, k, seed)
    stops = StopAdversary(scn.stops.get("mode", "zero"), int(scn.stops.get("seed", seed)),
                          scn.stops.get("script"))
    w = World(cfg, positions, _schedule(scn, k, seed), make_algorithm(wd.get("algorithm", "stay"), cfg), stops,
              trace)
    protocol = _protocol(scn, seed)
    if scn.protocol == "fsync":
        g = geometric_graph(positions, cfg.phi)
        if not g.is_connected():
            raise ConfigurationError("fsync needs a connected communication graph")
        if diameter(g) > protocol.cfg.d_bound:
            raise ConfigurationError(f"d_bound {protocol.cfg.d_bound} is below the diameter {diameter(g)}")
    return w, protocol


def _explicit_robot_states(scn: Scenario, k: int) -> list[RobotState]:
    rows = scn.init.get("states")
    if not isinstance(rows, list) or len(rows) != k:
        raise ScenarioError(f"init.states must list {k} tables")
    allowed = {"light", "nlight", "max_n", "lc", "clock"}
    out = []
    for row in rows:
        if set(row) - allowed:
            raise ScenarioError(f"unknown robot state keys {sorted(set(row) - allowed)}")
        light = row.get("light", 0)
        out.append(RobotState((0.0, 0.0), nlight=int(row.get("nlight", 1)), light=light,
                              max_n=int(row.get("max_n", 1)), lc=bool(row.get("lc", False)),
                              clock=int(row.get("clock", light))))
    return out


def count_enumerated(scn: Scenario) -> int:
    if scn.init.get("mode") != "enumerate":
        raise ScenarioError("seeds = 'all' needs init.mode = 'enumerate'")
    return sum(1 for _ in _enumeration(scn, 0))


def _enumeration(scn: Scenario, seed: int) -> Iterator:
    if scn.protocol == "nmr":
        g = _nmr_graph(scn, seed)
        return nmr_core.enumerate_nmr_inits(g, scn.init.get("n_published", "correct"))
    w, p = _robot_world(scn, seed)
    return lp.enumerate_robot_inits(p, w.config.k)


def _enumerated(scn: Scenario, index: int):
    for n, item in enumerate(_enumeration(scn, 0)):
        if n == index:
            return item
    raise ScenarioError(f"enumeration index {index} out of range")


# -- running --------------------------------------------------------------------------


def _label(scn: Scenario, seed: int) -> str:
    return f"init{seed}" if scn.init.get("mode") == "enumerate" else f"seed{seed}"


def _stabilization(trace: tr.Trace, verdicts: list[ck.Verdict]) -> float | None:
    times = [v.stabilization_time for v in verdicts]
    if any(t is None for t in times):
        return None
    return max(times, default=0.0)


def run_seed(scn: Scenario, seed: int, horizon: int | None = None, checkers: list[str] | None = None,
             sink=None) -> RunOutcome:
    """Execute one seed (or one enumerated initial configuration) and check the trace."""
    horizon = horizon or scn.horizon
    names = checkers or scn.checkers
    trace = tr.Trace(sink=sink)
    mode = scn.init.get("mode", "adversarial")
    if scn.protocol == "nmr":
        g = _nmr_graph(scn, seed)
        if mode == "zeros":
            init = nmr_core.zeros_init(g)
        elif mode == "explicit":
            init = nmr_core.explicit_init(g, scn.init["clocks"], scn.init.get("n_published"), scn.init.get("max_n"))
        elif mode == "enumerate":
            init = _enumerated(scn, seed)
        else:
            init = nmr_core.adversarial_nmr_init(g, seed)
        nmr_core.run_nmr(g, init, horizon, trace)
    else:
        w, p = _robot_world(scn, seed, trace)
        if mode == "adversarial":
            lp.adversarial_robot_init(w, p, seed)
        else:
            if mode == "zeros":
                states = [p.zero_state(w.config.k) for _ in range(w.config.k)]
            elif mode == "explicit":
                states = _explicit_robot_states(scn, w.config.k)
            else:
                states = list(_enumerated(scn, seed))
            lp.install_states(w, p, states)
        if scn.exhaustive:
            return _run_exhaustive(scn, seed, w, p, horizon)
        w.run(p, horizon)
    start = scn.start if scn.start is not None else lp.default_start(trace)
    verdicts = ck.run_checkers(trace, names, start=start, options=scn.checker_options)
    return RunOutcome(_label(scn, seed), seed, trace, verdicts, _stabilization(trace, verdicts))


def _run_exhaustive(scn: Scenario, seed: int, w: World, p, horizon: int) -> RunOutcome:
    w.trace = NullTrace()
    w.start(p, horizon)
    d = p.cfg.d_bound
    prefix = int(scn.params.get("prefix", (6 * d + 1) + 2 * d))
    report = explore(w, prefix)
    violations = [ck.Violation(float(prefix), (), rule) for rule, _ in report.violations]
    if report.truncated:
        violations.append(ck.Violation(float(prefix), (), "horizon-exhausted"))
    verdict = ck.Verdict("exhaustive", float(prefix), violations, [float(prefix)])
    # the verified bound is reported as the stabilization time
    return RunOutcome(_label(scn, seed), seed, None, [verdict], None if violations else float(prefix), report)
