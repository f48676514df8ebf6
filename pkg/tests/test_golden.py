from pathlib import Path

import pytest

from nmrsim import checkers as ck
from nmrsim import scenario as sc
from nmrsim import trace as tr

GOLDEN = Path(__file__).parent / "golden"
NAMES = ["example-move-atomic-global", "example-move-atomic-local", "example-fsync"]


def run(name):
    scn = sc.load(sc.resolve(name))
    return sc.run_seed(scn, scn.seeds[0])


def times(trace, kind):
    out = {}
    for e in trace.of_kind(kind):
        out.setdefault(e.subject, []).append(e.time)
    return out


@pytest.mark.parametrize("name", NAMES)
def test_trace_matches_golden_file(name):
    out = run(name)
    assert out.passed
    assert out.trace.dumps() == (GOLDEN / f"{name}.jsonl").read_text()


def test_global_example_runs_with_period_four():
    t = run(NAMES[0]).trace
    looks, moves = times(t, tr.LOOK), times(t, tr.MOVE_START)
    assert looks == {0: [0.0, 4.0, 8.0, 12.0], 1: [2.0, 6.0, 10.0, 14.0], 2: [3.0, 7.0, 11.0, 15.0]}
    assert moves == {0: [1.0, 5.0, 9.0, 13.0], 1: [1.0, 5.0, 9.0, 13.0], 2: [4.0, 8.0, 12.0]}


def test_local_example_alternates_the_two_robots():
    t = run(NAMES[1]).trace
    assert times(t, tr.LOOK) == {0: [3.0, 12.0, 21.0], 1: [8.5, 17.5, 26.5]}
    assert times(t, tr.MOVE_START) == {0: [10.0, 19.0, 28.0], 1: [6.5, 15.5, 24.5]}
    # a MOVE by one robot never falls inside the other's LOOK..COMPUTE span
    assert ck.check_move_atomic(t).passed


def test_fsync_example_groups_phases():
    t = run(NAMES[2]).trace
    looks, moves = times(t, tr.LOOK), times(t, tr.MOVE_START)
    for rnd in range(3):
        ls = [looks[i][rnd] for i in range(3)]
        ms = [moves[i][rnd] for i in range(3)]
        assert max(ls) - min(ls) < 2.0
        assert max(ls) < min(ms)
        if rnd + 1 < 3:
            assert max(ms) < min(looks[i][rnd + 1] for i in range(3))
    assert all(e.payload["light"] == 4 for e in t.of_kind(tr.LOOK))
