"""Exhaustive exploration of regular-register read choices on a running world.

At every pulse the explorer first probes how many ambiguous reads the pulse
makes and how many candidates each has, then branches on every combination by
cloning the world and replaying the pulse with a scripted adversary.  Worlds
that agree on a caller-supplied key are explored once, so runs whose state
space is finite are covered for an unbounded horizon.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Hashable

from .checkers import cyclic_gap
from .robot_world import World


@dataclass
class ExplorationReport:
    states: int = 0
    branches: int = 0
    truncated: int = 0
    violations: list[tuple[str, tuple]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations and not self.truncated


def _last_two(w: World, j: int) -> tuple:
    times, vals = w._light_hist[j]
    if len(vals) >= 2:
        return (vals[-2], vals[-1])
    if vals:
        return (w._light0[j], vals[-1])
    return (None, w._light0[j])


def fsync_key(w: World, prefix: int) -> Hashable:
    """Everything the next pulse can depend on, with pulse counts saturated at ``prefix``."""
    nxt = w._queue[0][3][1] if w._queue else -1
    return (nxt, tuple(min(p, prefix) for p in w.pulses_done),
            tuple(_last_two(w, j) for j in range(w.config.k)))


def fsync_invariants(before: World, after: World, prefix: int) -> list[str]:
    """Post-prefix rules.

    Adjacent lights are within one of each other, and no pulse moves a light
    backwards or jumps over one of the trigger values 2D and 4D.
    """
    if min(after.pulses_done) < prefix:
        return []
    cfg = after.protocol.cfg
    m = cfg.modulus
    out = []
    g = after.visibility_graph(None)
    for a, b in g.edges:
        if cyclic_gap(after.robots[a].light, after.robots[b].light, m) > 1:
            out.append(f"agreement {a}-{b}")
    if min(before.pulses_done) >= prefix:
        for i in range(after.config.k):
            if after.pulses_done[i] != before.pulses_done[i]:
                old, new = before.robots[i].light, after.robots[i].light
                step = (new - old) % m
                if step > m // 2:
                    out.append(f"backwards {i}")
                elif any(0 < (v - old) % m < step for v in (cfg.look_light, cfg.move_light)):
                    out.append(f"skipped-trigger {i}")
    return out


def explore(world: World, prefix: int,
            key: Callable[[World, int], Hashable] = fsync_key,
            invariants: Callable[[World, World, int], list[str]] = fsync_invariants,
            max_states: int = 1_000_000) -> ExplorationReport:
    """Depth-first search over every adversary resolution, starting from a started ``world``.

    The world's protocol must carry a ``RegularRegisterAdversary`` as
    ``protocol.adversary``; its mode is switched to scripted replay.
    """
    report = ExplorationReport()
    seen: set = set()
    stack = [world]
    while stack:
        w = stack.pop()
        k = key(w, prefix)
        if k in seen:
            continue
        seen.add(k)
        report.states += 1
        if report.states > max_states:
            raise RuntimeError(f"more than {max_states} states")
        probe = w.clone()
        adv = probe.protocol.adversary
        adv.mode, adv.script, adv.counts = "script", [], []
        if not probe.step():
            report.truncated += 1
            continue
        arities = list(adv.counts)
        for bad in invariants(w, probe, prefix):
            report.violations.append((bad, k))
        report.branches += 1
        for combo in itertools.product(*(range(n) for n in arities)):
            if all(c == n - 1 for c, n in zip(combo, arities)):
                continue  # the probe already took the newest value everywhere
            child = w.clone()
            cadv = child.protocol.adversary
            cadv.mode, cadv.script, cadv.counts = "script", list(combo), []
            child.step()
            for bad in invariants(w, child, prefix):
                report.violations.append((bad, k))
            report.branches += 1
            stack.append(child)
        stack.append(probe)
    return report
