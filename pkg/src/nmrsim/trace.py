"""Timestamped event log written by the engines and consumed by the checkers.

One event per JSONL line: ``{"kind": ..., "payload": {...}, "subject": i, "time": t}``.
Payloads hold JSON-native values only so that a parsed trace compares equal to
the in-memory one.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Iterator

from .topology import Graph

PULSE = "PULSE"
ENTER_CS = "ENTER_CS"
EXIT_CS = "EXIT_CS"
RENDEZVOUS = "RENDEZVOUS"
LOOK = "LOOK"
COMPUTE = "COMPUTE"
MOVE_START = "MOVE_START"
MOVE_END = "MOVE_END"
LIGHT_SET = "LIGHT_SET"
GRAPH = "GRAPH"
STATE = "STATE"
META = "META"

KINDS = frozenset(
    [PULSE, ENTER_CS, EXIT_CS, RENDEZVOUS, LOOK, COMPUTE, MOVE_START, MOVE_END, LIGHT_SET, GRAPH, STATE, META]
)

# subject id for events that concern the whole system (GRAPH, META)
SYSTEM = -1


class TraceError(ValueError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    time: float
    subject: int
    kind: str
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(
            {"time": self.time, "subject": self.subject, "kind": self.kind, "payload": self.payload},
            sort_keys=True,
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, line: str) -> "TraceEvent":
        d = json.loads(line)
        if d.get("kind") not in KINDS:
            raise TraceError(f"unknown event kind {d.get('kind')!r}")
        return cls(float(d["time"]), int(d["subject"]), d["kind"], d.get("payload", {}))


class Trace:
    """Append-only event list with a few indexing helpers."""

    def __init__(self, events: Iterable[TraceEvent] = (), sink: IO[str] | None = None):
        self.events: list[TraceEvent] = []
        self._sink = sink
        for e in events:
            self.append(e)

    def append(self, event: TraceEvent) -> None:
        self.events.append(event)
        if self._sink is not None:
            self._sink.write(event.to_json() + "\n")

    def emit(self, time: float, subject: int, kind: str, **payload: Any) -> None:
        self.append(TraceEvent(time, subject, kind, payload))

    def __iter__(self) -> Iterator[TraceEvent]:
        return iter(self.events)

    def __len__(self) -> int:
        return len(self.events)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Trace) and self.events == other.events

    def of_kind(self, *kinds: str) -> list[TraceEvent]:
        return [e for e in self.events if e.kind in kinds]

    @property
    def meta(self) -> dict:
        for e in self.events:
            if e.kind == META:
                return e.payload
        return {}

    @property
    def subjects(self) -> list[int]:
        m = self.meta
        if "k" in m:
            return list(range(m["k"]))
        return sorted({e.subject for e in self.events if e.subject != SYSTEM})

    def pulse_times(self, subject: int | None = None) -> list[float]:
        """Pulse instants, for one subject or (deduplicated) for the whole system."""
        if subject is None:
            return sorted({e.time for e in self.events if e.kind == PULSE})
        return [e.time for e in self.events if e.kind == PULSE and e.subject == subject]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.events:
            out[e.kind] = out.get(e.kind, 0) + 1
        return out

    def dumps(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "Trace":
        return cls(TraceEvent.from_json(line) for line in text.splitlines() if line.strip())

    @classmethod
    def read(cls, path: str | Path) -> "Trace":
        return cls.loads(Path(path).read_text())


class GraphTimeline:
    """Answers "which graph was in force at time t" from the GRAPH events of a trace."""

    def __init__(self, trace: Trace):
        evs = trace.of_kind(GRAPH)
        if not evs:
            raise TraceError("trace has no GRAPH events")
        k = len(trace.subjects) or 1
        self.times = [e.time for e in evs]
        self.graphs = [
            Graph.from_edges(e.payload.get("k", k), e.payload["edges"], require_connected=False) for e in evs
        ]

    def at(self, t: float) -> Graph:
        idx = bisect_right(self.times, t) - 1
        return self.graphs[max(idx, 0)]

    def between(self, t0: float, t1: float) -> list[Graph]:
        """Every graph in force at some instant of [t0, t1]."""
        lo = max(bisect_right(self.times, t0) - 1, 0)
        hi = bisect_right(self.times, t1)
        return self.graphs[lo:max(hi, lo + 1)]


def graph_payload(g: Graph) -> dict:
    return {"k": g.node_count, "edges": [[i, j] for i, j in g.edges]}
