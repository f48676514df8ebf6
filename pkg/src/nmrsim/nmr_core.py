"""Self-stabilizing neighborhood mutual remainder for l = Delta+1 under global pulses.

Every process publishes |N[i]|, takes the maximum published value over its
closed neighborhood, and runs a clock modulo that maximum plus one.  A process
is in the critical section exactly at the pulses where its clock reads 1.

Reads are synchronous: all processes see their neighbors' state as of the end
of the previous pulse.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterator, Sequence

from . import trace as tr
from .topology import Graph, closed_neighborhood


@dataclass(frozen=True)
class NmrProcessState:
    n_published: int
    max_n: int
    clock: int


@dataclass(frozen=True)
class NmrConfiguration:
    states: tuple[NmrProcessState, ...]
    pulse: int = 0

    def validate(self, k: int) -> None:
        if len(self.states) != k:
            raise ValueError(f"configuration has {len(self.states)} states for {k} processes")
        for i, s in enumerate(self.states):
            if not (1 <= s.n_published <= k and 1 <= s.max_n <= k and 0 <= s.clock <= k):
                raise ValueError(f"process {i} state {s} outside its domain for k={k}")

    @property
    def clocks(self) -> tuple[int, ...]:
        return tuple(s.clock for s in self.states)

    @property
    def max_ns(self) -> tuple[int, ...]:
        return tuple(s.max_n for s in self.states)


@dataclass(frozen=True)
class SectionFlag:
    critical: bool
    rendezvous: bool


def nmr_step(g: Graph, c: NmrConfiguration) -> tuple[NmrConfiguration, list[SectionFlag]]:
    prev = c.states
    nxt = []
    for i in range(g.node_count):
        nbhd = closed_neighborhood(g, i)
        max_n = max(prev[j].n_published for j in nbhd)
        clock = (prev[i].clock + 1) % (max_n + 1)
        nxt.append(NmrProcessState(len(nbhd), max_n, clock))
    flags = []
    for i in range(g.node_count):
        critical = nxt[i].clock == 1
        rendezvous = not critical and all(nxt[j].clock != 1 for j in closed_neighborhood(g, i))
        flags.append(SectionFlag(critical, rendezvous))
    return NmrConfiguration(tuple(nxt), c.pulse + 1), flags


def run_nmr(g: Graph, initial: NmrConfiguration, horizon: int, trace: tr.Trace | None = None) -> tr.Trace:
    """Apply ``horizon`` pulses; pulse ``n`` is stamped at time ``n`` (1-based)."""
    if horizon < 1:
        raise ValueError(f"horizon must be at least 1, got {horizon}")
    if not g.is_connected():
        raise ValueError("the communication graph must be connected")
    initial.validate(g.node_count)
    out = trace if trace is not None else tr.Trace()
    out.emit(
        0.0,
        tr.SYSTEM,
        tr.META,
        protocol="nmr",
        k=g.node_count,
        initial=[[s.n_published, s.max_n, s.clock] for s in initial.states],
    )
    c = initial
    for _ in range(horizon):
        c, flags = nmr_step(g, c)
        t = float(c.pulse)
        if c.pulse == 1:
            out.emit(t, tr.SYSTEM, tr.GRAPH, **tr.graph_payload(g))
        for i, (s, f) in enumerate(zip(c.states, flags)):
            out.emit(t, i, tr.PULSE)
            out.emit(t, i, tr.STATE, n=s.n_published, max_n=s.max_n, clock=s.clock)
            if f.critical:
                out.emit(t, i, tr.ENTER_CS)
                out.emit(t, i, tr.EXIT_CS)
            elif f.rendezvous:
                out.emit(t, i, tr.RENDEZVOUS)
    return out


def final_configuration(g: Graph, initial: NmrConfiguration, pulses: int) -> NmrConfiguration:
    c = initial
    for _ in range(pulses):
        c, _ = nmr_step(g, c)
    return c


# -- initial configurations -------------------------------------------------


def zeros_init(g: Graph) -> NmrConfiguration:
    """All clocks 0 and both size variables at their domain minimum 1."""
    return NmrConfiguration(tuple(NmrProcessState(1, 1, 0) for _ in range(g.node_count)))


def explicit_init(g: Graph, clocks: Sequence[int], n_published: Sequence[int] | None = None,
                  max_n: Sequence[int] | None = None) -> NmrConfiguration:
    k = g.node_count
    n_pub = list(n_published) if n_published is not None else [1] * k
    mx = list(max_n) if max_n is not None else [1] * k
    c = NmrConfiguration(tuple(NmrProcessState(n, m, cl) for n, m, cl in zip(n_pub, mx, clocks)))
    if len(clocks) != k:
        raise ValueError(f"expected {k} clocks, got {len(clocks)}")
    c.validate(k)
    return c


def adversarial_nmr_init(g: Graph, seed: int) -> NmrConfiguration:
    rng = random.Random(seed)
    k = g.node_count
    return NmrConfiguration(
        tuple(NmrProcessState(rng.randint(1, k), rng.randint(1, k), rng.randint(0, k)) for _ in range(k))
    )


def enumerate_nmr_inits(g: Graph, n_published: str | Sequence[int] = "correct") -> Iterator[NmrConfiguration]:
    """Every clock vector in {0..k}^k.

    ``n_published`` fixes the size variables: ``"correct"`` uses |N[i]|,
    ``"ones"`` uses the domain minimum, or pass an explicit vector.  ``max_n``
    is overwritten before it is first used, so it is set equal to
    ``n_published``.
    """
    k = g.node_count
    if n_published == "correct":
        n_pub = [len(closed_neighborhood(g, i)) for i in range(k)]
    elif n_published == "ones":
        n_pub = [1] * k
    else:
        n_pub = list(n_published)
    for clocks in itertools.product(range(k + 1), repeat=k):
        yield NmrConfiguration(tuple(NmrProcessState(n, n, c) for n, c in zip(n_pub, clocks)))
