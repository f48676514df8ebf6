import pytest
from hypothesis import given, strategies as st

from nmrsim import scenario as sc
from nmrsim import trace as tr
from nmrsim.lcm_protocols import (LOOK_CODE, SHIELD_CODES, Fsync, FsyncConfig, MoveAtomicGlobal, MoveAtomicLocal,
                                  RegularRegisterAdversary, TripledLight, adversarial_robot_init,
                                  enumerate_robot_inits)
from nmrsim.robot_world import ConfigurationError, PulseSchedule, Stay, World, WorldConfig

import oracles


def scenario(protocol, k, states=None, horizon=30, offsets=None, params=None, reads=None, init=None, spacing=0.9):
    doc = {
        "name": "t", "protocol": protocol, "horizon": horizon, "seeds": [0],
        "world": {"k": k, "layout": "line", "spacing": spacing, "algorithm": "stay"},
        "schedule": {"mode": "local", "offsets": offsets} if offsets else {"mode": "global"},
        "init": init or ({"mode": "explicit", "states": states} if states else {"mode": "zeros"}),
    }
    if params:
        doc["params"] = params
    if reads:
        doc["reads"] = reads
    return sc.from_dict(doc)


def events(trace, kind, robot=None):
    return [e for e in trace.of_kind(kind) if robot is None or e.subject == robot]


@given(st.integers(0, 40))
def test_tripled_light_roundtrip(code):
    light = TripledLight.from_clock(code)
    assert light.code == code
    assert TripledLight.parse(str(light)) == light


def test_tripled_light_codes():
    assert {str(TripledLight.from_clock(c)) for c in SHIELD_CODES} == {"0.2", "1.0", "1.1"}
    assert str(TripledLight.from_clock(LOOK_CODE)) == "1.0"
    with pytest.raises(ValueError):
        TripledLight(0, 3)


def test_fsync_config():
    cfg = FsyncConfig(2)
    assert (cfg.modulus, cfg.look_light, cfg.move_light) == (13, 4, 8)
    with pytest.raises(ConfigurationError):
        FsyncConfig(0)


def test_read_adversary_modes():
    assert RegularRegisterAdversary("oldest").choose(0, 1, 0.0, [1, 2]) == 1
    assert RegularRegisterAdversary("newest").choose(0, 1, 0.0, [1, 2]) == 2
    adv = RegularRegisterAdversary("script", script=[0], fallback="newest")
    assert adv.choose(0, 1, 0.0, [5]) == 5  # unambiguous reads do not consume the script
    assert adv.choose(0, 1, 0.0, [1, 2]) == 1
    assert adv.choose(0, 1, 0.0, [1, 2]) == 2
    assert adv.counts == [2, 2]
    with pytest.raises(ConfigurationError):
        RegularRegisterAdversary("latest")


def test_single_robot_global_looks_and_moves_every_other_pulse():
    out = sc.run_seed(scenario("move-atomic-global", 1), 0)
    assert out.passed
    moves = [e.time for e in events(out.trace, tr.MOVE_START)]
    looks = [e.time for e in events(out.trace, tr.LOOK)]
    assert moves[:3] == [1.0, 3.0, 5.0]
    assert looks[:3] == [2.0, 4.0, 6.0]


def test_global_schedule_matches_oracle_on_a_static_line():
    states = [{"light": c, "nlight": 3, "max_n": 3, "lc": lc, "clock": c}
              for c, lc in ((0, True), (2, False), (1, True))]
    out = sc.run_seed(scenario("move-atomic-global", 3, states, horizon=24), 0)
    nb = [(0, 1), (1, 2)]
    # the engine has pulse t -> oracle pulse index t; same pre-state
    looks, moves = oracles.alg2_events(3, nb, [0, 2, 1], [True, False, True], 24)
    for i in range(3):
        assert [int(e.time) for e in events(out.trace, tr.LOOK, i)] == looks[i]
        assert [int(e.time) for e in events(out.trace, tr.MOVE_START, i)] == moves[i]


def anti_phased_pair(refresh):
    states = [{"light": 0, "nlight": 1, "max_n": 1, "lc": False, "clock": 0},
              {"light": 1, "nlight": 1, "max_n": 1, "lc": False, "clock": 1}]
    return scenario("move-atomic-global", 2, states, horizon=40, params={"nlight_refresh": refresh})


def test_nlight_written_only_after_moves_can_deadlock():
    out = sc.run_seed(anti_phased_pair("move"), 0)
    assert not events(out.trace, tr.MOVE_START)
    assert not out.passed


def test_nlight_refreshed_every_pulse_recovers():
    out = sc.run_seed(anti_phased_pair("pulse"), 0)
    assert events(out.trace, tr.MOVE_START)
    assert out.passed


def test_all_zero_lights_advance_together():
    out = sc.run_seed(scenario("move-atomic-global", 4), 0)
    clocks = {}
    for e in events(out.trace, tr.STATE):
        clocks.setdefault(e.time, []).append(e.payload["clock"])
    assert all(len(set(v)) == 1 for t, v in clocks.items() if t >= 2)


def test_local_pair_never_overlaps_a_move_with_a_look():
    states = [{"light": 0, "nlight": 2, "max_n": 2, "lc": True, "clock": 0},
              {"light": 4, "nlight": 2, "max_n": 2, "lc": False, "clock": 4}]
    out = sc.run_seed(scenario("move-atomic-local", 2, states, offsets=[0.0, 0.5]), 0)
    assert out.passed
    assert all(e.payload["pre_clock"] % 3 == 1 for e in events(out.trace, tr.STATE) if e.payload["moved"])
    assert events(out.trace, tr.MOVE_START, 0) and events(out.trace, tr.MOVE_START, 1)


def test_local_single_robot_period():
    out = sc.run_seed(scenario("move-atomic-local", 1, offsets=[0.0], horizon=30), 0)
    moves = [e.time for e in events(out.trace, tr.MOVE_START)]
    assert [b - a for a, b in zip(moves, moves[1:])] == [6.0] * (len(moves) - 1)


def test_adversarial_init_is_deterministic_and_in_domain():
    def draw(seed):
        w = World(WorldConfig(4), [(0.0, 0.0)] * 4, PulseSchedule.global_pulses(4), Stay())
        return [(s.nlight, s.light, s.max_n, s.lc, s.clock)
                for s in adversarial_robot_init(w, MoveAtomicLocal(), seed)]
    assert draw(3) == draw(3)
    assert draw(3) != draw(4)
    for nl, li, mx, _, cl in draw(5):
        assert 1 <= nl <= 4 and 1 <= mx <= 4 and 0 <= li <= 14 and 0 <= cl <= 14


def test_enumeration_sizes():
    assert len(list(MoveAtomicGlobal().domain(2))) == 2 * 3 * 2 * 3
    assert sum(1 for _ in enumerate_robot_inits(Fsync(FsyncConfig(1)), 2)) == 49


def test_bad_protocol_parameters():
    with pytest.raises(ConfigurationError):
        MoveAtomicGlobal("sometimes")
    with pytest.raises(ConfigurationError):
        Fsync(FsyncConfig(1), trigger="both")


def test_d_bound_below_diameter_is_rejected():
    with pytest.raises(sc.ScenarioError, match="diameter"):
        scenario("fsync", 3, offsets=[0.0, 0.3, 0.6], params={"d_bound": 1})


def test_fsync_pair_from_zeros_moves_in_step():
    out = sc.run_seed(scenario("fsync", 2, offsets=[0.0, 0.5], params={"d_bound": 1}, horizon=30), 0)
    assert out.passed
    m0 = [e.time for e in events(out.trace, tr.MOVE_START, 0)]
    m1 = [e.time for e in events(out.trace, tr.MOVE_START, 1)]
    # the lead swaps at each wrap, when the follower skips 0
    assert [abs(b - a) for a, b in zip(m0, m1)] == [0.5] * len(m0) == [0.5] * len(m1)
    assert {b - a for a, b in zip(m0, m0[1:])} == {6.0, 7.0}


def test_level_trigger_repeats_look_on_a_stall():
    # a neighbor stuck one behind holds the light at the LOOK value for two pulses
    init = {"mode": "explicit", "states": [{"light": 1}, {"light": 2}]}
    common = dict(offsets=[0.0, 0.5], params={"d_bound": 1}, init=init, horizon=4, reads={"mode": "oldest"})
    level = sc.run_seed(scenario("fsync", 2, **{**common, "params": {"d_bound": 1, "trigger": "level"}}), 0)
    edge = sc.run_seed(scenario("fsync", 2, **common), 0)
    assert len(events(level.trace, tr.LOOK, 1)) > len(events(edge.trace, tr.LOOK, 1))


def test_min_clock_wrap_leaves_adjacent_lights_two_apart():
    # characterization: the plain min is not wrap aware, so a robot that sees a
    # neighbor's fresh 0 jumps from 6D to 1 while its other neighbor still shows 6D
    init = {"mode": "explicit", "states": [{"light": 0}, {"light": 0}, {"light": 0}]}
    out = sc.run_seed(scenario("fsync", 3, offsets=[0.0, 0.3, 0.6], params={"d_bound": 2}, init=init,
                               horizon=60, reads={"mode": "newest"}), 0)
    cur = [0, 0, 0]
    gaps = []
    for e in events(out.trace, tr.STATE):
        cur[e.subject] = e.payload["light"]
        gaps.append(max(oracles.cyclic_gap(a, b, 13) for a, b in zip(cur, cur[1:])))
    assert max(gaps) == 2
