"""Trace checkers for the mutual-remainder properties and the LCM synchronization models.

Every checker is a pure function ``check_*(trace, start=..., ...) -> Verdict``.
Violations are reported over the whole trace; the verdict passes when none of
them happens at or after ``start`` (the declared stabilization prefix ends at
``start``).  Window-based rules timestamp a violation with the window's first
instant, so "the suffix from t passes" means "no window starting at or after t
fails".

"In the critical section" means an ENTER_CS..EXIT_CS span for process traces
and a LOOK..COMPUTE span for robot traces.  Trying sections are empty in every
implemented protocol, so rendezvous only asks for critical-section freedom.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from . import trace as tr
from .lcm_protocols import default_start, liveness_window
from .topology import closed_neighborhood, max_closed_size, max_degree


@dataclass(frozen=True)
class Violation:
    time: float
    subjects: tuple[int, ...]
    rule: str

    def to_dict(self) -> dict:
        return {"time": self.time, "subjects": list(self.subjects), "rule": self.rule}


@dataclass
class Verdict:
    name: str
    start: float
    violations: list[Violation]
    instants: list[float] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return all(v.time < self.start for v in self.violations)

    @property
    def late_violations(self) -> list[Violation]:
        return [v for v in self.violations if v.time >= self.start]

    @property
    def stabilization_time(self) -> float | None:
        """Earliest evaluated instant from which the rule holds; None means never."""
        if not self.violations:
            return 0.0
        last = max(v.time for v in self.violations)
        idx = bisect_right(self.instants, last)
        return self.instants[idx] if idx < len(self.instants) else None

    def to_dict(self) -> dict:
        return {
            "checker": self.name,
            "pass": self.passed,
            "start": self.start,
            "stabilization_time": self.stabilization_time,
            "violations": len(self.violations),
            "late_violations": [v.to_dict() for v in self.late_violations[:20]],
        }


def _verdict(name: str, start: float, violations: list[Violation], instants) -> Verdict:
    violations.sort(key=lambda v: (v.time, v.subjects, v.rule))
    return Verdict(name, start, violations, sorted(set(instants)))


def merge(name: str, verdicts: Sequence[Verdict]) -> Verdict:
    start = verdicts[0].start
    return _verdict(name, start, [v for vd in verdicts for v in vd.violations],
                    [t for vd in verdicts for t in vd.instants])


# -- trace views -------------------------------------------------------------


def cs_spans(trace: tr.Trace) -> dict[int, list[tuple[float, float]]]:
    """Critical-section occupancy per subject as closed time intervals."""
    spans: dict[int, list[tuple[float, float]]] = defaultdict(list)
    open_at: dict[int, float] = {}
    cs_events = trace.of_kind(tr.ENTER_CS, tr.EXIT_CS)
    if cs_events:
        for e in cs_events:
            if e.kind == tr.ENTER_CS:
                if e.subject in open_at:
                    raise tr.TraceError(f"subject {e.subject} re-enters the critical section at {e.time}")
                open_at[e.subject] = e.time
            else:
                if e.subject not in open_at:
                    raise tr.TraceError(f"subject {e.subject} exits without entering at {e.time}")
                spans[e.subject].append((open_at.pop(e.subject), e.time))
        for s, t0 in open_at.items():
            spans[s].append((t0, float("inf")))
        return spans
    for e in trace.of_kind(tr.LOOK, tr.COMPUTE):
        if e.kind == tr.LOOK:
            spans[e.subject].append((e.time, e.time))
        elif spans[e.subject]:
            t0, _ = spans[e.subject][-1]
            spans[e.subject][-1] = (t0, e.time)
    return spans


def _occupancy(spans: Mapping[int, list[tuple[float, float]]], instants: Sequence[float]) -> list[set[int]]:
    occ: list[set[int]] = [set() for _ in instants]
    for s, lst in spans.items():
        for t0, t1 in lst:
            for n in range(bisect_left(instants, t0), bisect_right(instants, t1)):
                occ[n].add(s)
    return occ


def move_intervals(trace: tr.Trace) -> list[tuple[int, float, float]]:
    out = []
    open_at: dict[int, float] = {}
    for e in trace.of_kind(tr.MOVE_START, tr.MOVE_END):
        if e.kind == tr.MOVE_START:
            if e.subject in open_at:
                raise tr.TraceError(f"robot {e.subject} starts a MOVE inside another at {e.time}")
            open_at[e.subject] = e.time
        else:
            if e.subject not in open_at:
                raise tr.TraceError(f"robot {e.subject} ends a MOVE it never started at {e.time}")
            out.append((e.subject, open_at.pop(e.subject), e.time))
    if open_at:
        raise tr.TraceError(f"unbalanced MOVE intervals for robots {sorted(open_at)}")
    return out


# -- mutual remainder ------------------------------------------------------------


def check_l_exclusion(trace: tr.Trace, l: int | None = None, start: float = 0.0) -> Verdict:
    """At most ``l`` members of every N[i] in the critical section at once (default l = Delta+1)."""
    spans = cs_spans(trace)
    if not any(spans.values()):
        return _verdict("l-exclusion", start, [], trace.pulse_times())
    timeline = tr.GraphTimeline(trace)
    instants = trace.pulse_times()
    violations = []
    for n, inside in enumerate(_occupancy(spans, instants)):
        if not inside:
            continue
        g = timeline.at(instants[n])
        bound = l if l is not None else max_degree(g) + 1
        for i in range(g.node_count):
            busy = closed_neighborhood(g, i) & inside
            if len(busy) > bound:
                violations.append(Violation(instants[n], tuple(sorted(busy)), "l-exclusion"))
    return _verdict("l-exclusion", start, violations, instants)


def fairness_bounds_from_state(trace: tr.Trace) -> dict[int, int]:
    last: dict[int, int] = {}
    for e in trace.of_kind(tr.STATE):
        if "max_n" in e.payload:
            last[e.subject] = e.payload["max_n"] + 1
    return last


def check_global_fairness(trace: tr.Trace, bounds: Mapping[int, int] | Sequence[int] | None = None,
                          start: float = 0.0) -> Verdict:
    """Each subject enters the critical section at least once per window of ``bounds[i]`` of its pulses.

    Without ``bounds`` the window is the subject's final MaxN + 1.
    """
    if bounds is None:
        bounds = fairness_bounds_from_state(trace)
    if not isinstance(bounds, Mapping):
        bounds = dict(enumerate(bounds))
    spans = cs_spans(trace)
    violations, instants = [], []
    for s in trace.subjects:
        pulses = trace.pulse_times(s)
        b = bounds[s]
        entries = sorted(t0 for t0, _ in spans.get(s, []))
        for w in range(len(pulses) - b + 1):
            lo, hi = pulses[w], pulses[w + b - 1]
            instants.append(lo)
            if bisect_right(entries, hi) == bisect_left(entries, lo):
                violations.append(Violation(lo, (s,), "fairness"))
    return _verdict("fairness", start, violations, instants)


def check_local_rendezvous(trace: tr.Trace, start: float = 0.0) -> Verdict:
    """Every window of |N[i]|+1 consecutive pulse instants has one where N[i] is CS-free."""
    timeline = tr.GraphTimeline(trace)
    instants = trace.pulse_times()
    occ = _occupancy(cs_spans(trace), instants)
    violations, evaluated = [], []
    for n, t in enumerate(instants):
        g = timeline.at(t)
        for i in range(g.node_count):
            b = len(closed_neighborhood(g, i)) + 1
            if n + b > len(instants):
                continue
            evaluated.append(t)
            if all(closed_neighborhood(timeline.at(instants[m]), i) & occ[m] for m in range(n, n + b)):
                violations.append(Violation(t, (i,), "rendezvous"))
    return _verdict("rendezvous", start, violations, evaluated)


def check_maxn(trace: tr.Trace, start: float = 0.0) -> Verdict:
    """Published MaxN equals max |N[j]| over the closed neighborhood."""
    timeline = tr.GraphTimeline(trace)
    violations, instants = [], []
    for e in trace.of_kind(tr.STATE):
        if "max_n" not in e.payload:
            continue
        instants.append(e.time)
        if e.payload["max_n"] != max_closed_size(timeline.at(e.time), e.subject):
            violations.append(Violation(e.time, (e.subject,), "maxn"))
    return _verdict("maxn", start, violations, instants)


def check_nmr(trace: tr.Trace, start: float = 0.0) -> Verdict:
    """Fairness, (Delta+1)-exclusion, rendezvous and MaxN correctness together."""
    return merge("nmr", [
        check_global_fairness(trace, start=start),
        check_l_exclusion(trace, start=start),
        check_local_rendezvous(trace, start=start),
        check_maxn(trace, start=start),
    ])


# -- LCM models ---------------------------------------------------------------------


def check_move_atomic(trace: tr.Trace, start: float = 0.0) -> Verdict:
    """No MOVE of r_i overlaps a LOOK..COMPUTE span of a closed neighbor r_j.

    r_j counts as a neighbor if it is adjacent to r_i when the MOVE starts, or
    if r_j's LOOK snapshot contains r_i.
    """
    moves = move_intervals(trace)
    timeline = tr.GraphTimeline(trace)
    looks = []
    for e in trace.of_kind(tr.LOOK, tr.COMPUTE):
        if e.kind == tr.LOOK:
            looks.append([e.time, e.time, e.subject, set(e.payload.get("seen", ()))])
        else:
            for lk in reversed(looks):
                if lk[2] == e.subject:
                    lk[1] = e.time
                    break
    looks.sort(key=lambda x: x[0])
    look_starts = [x[0] for x in looks]
    longest = max((x[1] - x[0] for x in looks), default=0.0)
    violations = []
    for i, s, e in moves:
        nbrs = closed_neighborhood(timeline.at(s), i)
        for a, b, j, seen in looks[bisect_left(look_starts, s - longest):bisect_right(look_starts, e)]:
            if j == i or b < s or a > e:
                continue
            if j in nbrs or i in seen:
                violations.append(Violation(max(s, a), tuple(sorted((i, j))), "move-atomic"))
    return _verdict("move-atomic", start, violations, trace.pulse_times())


def check_lcm_liveness(trace: tr.Trace, window: int | None = None, start: float = 0.0) -> Verdict:
    """Each robot logs LOOK, COMPUTE and MOVE_START in every ``window`` of its own pulses."""
    if window is None:
        window = liveness_window(trace)
    by_kind: dict[tuple[int, str], list[float]] = defaultdict(list)
    for e in trace.of_kind(tr.LOOK, tr.COMPUTE, tr.MOVE_START):
        by_kind[(e.subject, e.kind)].append(e.time)
    violations, instants = [], []
    for s in trace.subjects:
        pulses = trace.pulse_times(s)
        for w in range(len(pulses) - window + 1):
            lo, hi = pulses[w], pulses[w + window - 1] + 1.0
            instants.append(lo)
            for kind in (tr.LOOK, tr.COMPUTE, tr.MOVE_START):
                times = by_kind[(s, kind)]
                if bisect_left(times, hi) == bisect_left(times, lo):
                    violations.append(Violation(lo, (s,), f"liveness-{kind}"))
    return _verdict("liveness", start, violations, instants)


def _light_history(trace: tr.Trace) -> dict[int, tuple[list[float], list]]:
    hist: dict[int, tuple[list[float], list]] = defaultdict(lambda: ([], []))
    for e in trace.of_kind(tr.LIGHT_SET):
        if "light" in e.payload:
            hist[e.subject][0].append(e.time)
            hist[e.subject][1].append(e.payload["light"])
    return hist


def check_guard_shield(trace: tr.Trace, start: float = 0.0) -> Verdict:
    """Before r_i LOOKs, every neighbor's latest pulse saw r_i showing 0.2 or 1.0."""
    timeline = tr.GraphTimeline(trace)
    hist = _light_history(trace)
    initial = [r["light"] for r in trace.meta.get("initial", [])]
    pulses = {s: trace.pulse_times(s) for s in trace.subjects}
    shield = {"0.2", "1.0"}
    violations, instants = [], []
    for e in trace.of_kind(tr.LOOK):
        i, p = e.subject, e.time
        instants.append(p)
        for j in closed_neighborhood(timeline.at(p), i):
            if j == i:
                continue
            idx = bisect_left(pulses[j], p) - 1
            if idx < 0:
                continue
            q = pulses[j][idx]
            times, vals = hist[i]
            n = bisect_left(times, q) - 1
            seen = vals[n] if n >= 0 else (initial[i] if initial else None)
            if str(seen) not in shield:
                violations.append(Violation(p, (i, j), "guard-shield"))
    return _verdict("guard-shield", start, violations, instants)


def check_move_slot(trace: tr.Trace, start: float = 0.0) -> Verdict:
    """MOVE only at pulses whose pre-increment clock is 1 mod 3."""
    violations, instants = [], []
    for e in trace.of_kind(tr.STATE):
        if "pre_clock" not in e.payload:
            continue
        instants.append(e.time)
        if e.payload.get("moved") and e.payload["pre_clock"] % 3 != 1:
            violations.append(Violation(e.time, (e.subject,), "move-slot"))
    return _verdict("move-slot", start, violations, instants)


def cyclic_gap(a: int, b: int, modulus: int) -> int:
    d = abs(a - b) % modulus
    return min(d, modulus - d)


def check_light_agreement(trace: tr.Trace, modulus: int | None = None, start: float = 0.0) -> Verdict:
    """Adjacent lights differ by at most one in cyclic order, at every write instant."""
    if modulus is None:
        modulus = 6 * trace.meta["d_bound"] + 1
    timeline = tr.GraphTimeline(trace)
    lights = {i: r["light"] for i, r in enumerate(trace.meta.get("initial", []))}
    writes = [e for e in trace.of_kind(tr.LIGHT_SET) if "light" in e.payload]
    violations, instants = [], []
    n = 0
    while n < len(writes):
        t = writes[n].time
        while n < len(writes) and writes[n].time == t:
            lights[writes[n].subject] = writes[n].payload["light"]
            n += 1
        instants.append(t)
        for a, b in timeline.at(t).edges:
            if a in lights and b in lights and cyclic_gap(lights[a], lights[b], modulus) > 1:
                violations.append(Violation(t, (a, b), "agreement"))
    return _verdict("agreement", start, violations, instants)


def check_fsync(trace: tr.Trace, start: float = 0.0, d_bound: int | None = None) -> Verdict:
    """The post-``start`` timeline splits into alternating LOOK+COMPUTE and MOVE periods.

    In each period every robot runs that phase exactly once (the first and
    last period may be cut short by the trace window), and no period overlaps
    the next.  With a known D, LOOK must happen at light 2D and MOVE at 4D.
    """
    if d_bound is None:
        d_bound = trace.meta.get("d_bound")
    k = len(trace.subjects)
    hist = _light_history(trace)
    phases: list[tuple[float, float, int, str]] = []
    open_look: dict[int, int] = {}
    violations = []
    for e in trace.events:
        if e.time < start:
            continue
        if e.kind == tr.LOOK:
            open_look[e.subject] = len(phases)
            phases.append((e.time, e.time, e.subject, "LC"))
            if d_bound is not None and e.payload.get("light") != 2 * d_bound:
                violations.append(Violation(e.time, (e.subject,), "fsync-look-light"))
        elif e.kind == tr.COMPUTE and e.subject in open_look:
            n = open_look.pop(e.subject)
            a, _, s, kind = phases[n]
            phases[n] = (a, e.time, s, kind)
        elif e.kind == tr.MOVE_START:
            phases.append((e.time, e.time, e.subject, "MOVE"))
            if d_bound is not None:
                times, vals = hist[e.subject]
                n = bisect_right(times, e.time) - 1
                if n < 0 or vals[n] != 4 * d_bound:
                    violations.append(Violation(e.time, (e.subject,), "fsync-move-light"))
        elif e.kind == tr.MOVE_END:
            for n in range(len(phases) - 1, -1, -1):
                a, b, s, kind = phases[n]
                if s == e.subject and kind == "MOVE":
                    phases[n] = (a, e.time, s, kind)
                    break
    phases.sort(key=lambda p: (p[0], p[2]))
    runs: list[list[tuple[float, float, int, str]]] = []
    for p in phases:
        if runs and runs[-1][0][3] == p[3]:
            runs[-1].append(p)
        else:
            runs.append([p])
    instants = [r[0][0] for r in runs]
    for n, run in enumerate(runs):
        t0 = run[0][0]
        robots = [p[2] for p in run]
        if len(set(robots)) != len(robots):
            violations.append(Violation(t0, tuple(sorted(set(robots))), f"fsync-repeat-{run[0][3]}"))
        if 0 < n < len(runs) - 1 and len(set(robots)) != k:
            missing = tuple(sorted(set(trace.subjects) - set(robots)))
            violations.append(Violation(t0, missing, f"fsync-missing-{run[0][3]}"))
        if n + 1 < len(runs) and max(p[1] for p in run) >= runs[n + 1][0][0]:
            violations.append(Violation(t0, tuple(sorted(set(robots))), "fsync-overlap"))
    return _verdict("fsync", start, violations, instants)


# -- stabilization ----------------------------------------------------------------------


def measure_stabilization(trace: tr.Trace, checker: Callable[..., Verdict], **kwargs) -> float | None:
    """Earliest instant from which ``checker`` passes on the rest of the trace (None: never)."""
    return checker(trace, start=0.0, **kwargs).stabilization_time


CHECKERS: dict[str, Callable[..., Verdict]] = {
    "nmr": check_nmr,
    "fairness": check_global_fairness,
    "l-exclusion": check_l_exclusion,
    "rendezvous": check_local_rendezvous,
    "maxn": check_maxn,
    "move-atomic": check_move_atomic,
    "liveness": check_lcm_liveness,
    "guard-shield": check_guard_shield,
    "move-slot": check_move_slot,
    "agreement": check_light_agreement,
    "fsync": check_fsync,
}

DEFAULT_CHECKERS = {
    "nmr": ["nmr"],
    "move-atomic-global": ["move-atomic", "liveness"],
    "move-atomic-local": ["move-atomic", "liveness", "guard-shield", "move-slot"],
    "fsync": ["agreement", "fsync"],
}


def run_checkers(trace: tr.Trace, names: Sequence[str] | None = None, start: float | None = None,
                 options: Mapping[str, dict] | None = None) -> list[Verdict]:
    if names is None:
        names = DEFAULT_CHECKERS[trace.meta["protocol"]]
    if start is None:
        start = default_start(trace)
    out = []
    for name in names:
        if name not in CHECKERS:
            raise KeyError(f"unknown checker {name!r}")
        out.append(CHECKERS[name](trace, start=start, **dict((options or {}).get(name, {}))))
    return out
