import pytest

from nmrsim import scenario as sc
from nmrsim.explore import explore, fsync_key

import oracles

# (enumeration index, reachable states); the counts come from the abstract pair model
PAIRS = [(0, 160), (9, 176), (13, 176), (27, 176), (41, 178), (48, 169)]


@pytest.fixture(scope="module")
def pair_scenario():
    return sc.load(sc.resolve("fsync-k2-exhaustive"))


@pytest.mark.parametrize("index,expected", PAIRS)
def test_engine_explorer_matches_abstract_pair_model(pair_scenario, index, expected):
    a, b = (s.light for s in sc._enumerated(pair_scenario, index))
    assert len(oracles.fsync_pair_states(a, b, 7, 9)) == expected
    out = sc.run_seed(pair_scenario, index)
    assert out.exploration.states == expected
    assert out.passed and out.stabilization == 9.0


def test_abstract_pair_model_keeps_neighbors_within_one():
    for a in range(7):
        for b in range(7):
            for _, na, nb, x, _, y, _ in oracles.fsync_pair_states(a, b, 7, 2):
                if na >= 1 and nb >= 1:
                    assert oracles.cyclic_gap(x, y, 7) <= 1


def test_explorer_reports_invariant_violations(pair_scenario):
    w, p = sc._robot_world(pair_scenario, 0)
    from nmrsim.lcm_protocols import install_states
    install_states(w, p, sc._enumerated(pair_scenario, 3))
    w.start(p, 40)

    def never_differ(before, after, prefix):
        return ["differ"] if after.robots[0].light != after.robots[1].light else []

    report = explore(w, 0, fsync_key, never_differ)
    assert report.violations and not report.passed


def test_short_horizon_is_reported_as_truncation(pair_scenario):
    w, p = sc._robot_world(pair_scenario, 0)
    w.start(p, 3)
    report = explore(w, 9)
    assert report.truncated and not report.passed
