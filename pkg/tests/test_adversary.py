import copy
from fractions import Fraction as F

import pytest

from byzsim.adversary import (
    Adversary,
    Fixed,
    FullMove,
    MinDelta,
    RandomFraction,
    RandomInRange,
    ScriptedPlacements,
    ScriptedStops,
    TrackMax,
    TrackMin,
    make_byzantine,
    make_stop,
    oscillation_controller,
)
from byzsim.algorithm import TrimmedMidrange
from byzsim.analysis import verify_fair
from byzsim.core import (
    Configuration,
    InvalidPrecondition,
    SimulationParams,
    correct_positions,
    diameter,
)
from byzsim.engine import CYCLE_LIMIT, run


def cfg(correct, byz, **kw):
    return Configuration.build(SimulationParams(len(correct) + len(byz), len(byz), **kw), correct, byz)


class TestPlacement:
    def test_track_max_and_min(self):
        c = cfg([0, 5, 9], [0], delta_default=1)
        assert TrackMax(2).place(c, ()) == {3: 11}
        assert TrackMin(F(1, 2)).place(c, ()) == {3: F(-1, 2)}

    def test_fixed(self):
        c = cfg([0, 5, 9, 1], [0, 0])
        assert Fixed([7, 8]).place(c, ()) == {4: 7, 5: 8}
        with pytest.raises(InvalidPrecondition):
            Fixed([1]).place(c, ())

    def test_random_in_range(self):
        c = cfg([0, 10, 20, 5], [0])
        a = [RandomInRange(4).place(c, [frozenset()] * t) for t in range(5)]
        b = [RandomInRange(4).place(c, [frozenset()] * t) for t in range(5)]
        assert a == b
        assert all(-20 <= p[4] <= 40 for p in a)

    def test_random_in_explicit_range(self):
        c = cfg([0, 10, 20, 5], [0])
        p = RandomInRange(1, lo=3, hi=4).place(c, ())
        assert 3 <= p[4] <= 4

    def test_scripted_placements(self):
        c = cfg([0, 1, 2, 3], [0])
        s = ScriptedPlacements([[1], [2]])
        assert [s.place(c, [None] * t)[4] for t in range(3)] == [1, 2, 1]

    def test_factories(self):
        assert isinstance(make_byzantine("track-min"), TrackMin)
        assert isinstance(make_stop("min-delta"), MinDelta)
        with pytest.raises(ValueError):
            make_stop("nope")


class TestStops:
    def test_constant_policies(self):
        args = ({0, 1}, {0: F(0), 1: F(1)}, {0: F(5), 1: F(5)}, {0: F(1), 1: F(1)})
        assert FullMove().choose(*args) == {0: 1, 1: 1}
        assert MinDelta().choose(*args) == {0: 0, 1: 0}

    def test_random_fraction_bounds(self):
        args = ({0, 1, 2}, {}, {}, {})
        fr = RandomFraction(9).choose(*args)
        assert set(fr) == {0, 1, 2} and all(0 <= v <= 1 for v in fr.values())
        assert fr == RandomFraction(9).choose(*args)

    def test_scripted_stops_default_full(self):
        s = ScriptedStops([{0: F(1, 4)}])
        assert s.choose({0, 1}, {}, {}, {}, ()) == {0: F(1, 4), 1: 1}

    def test_decide_matches_snapshot(self):
        c = cfg([0, 8], [0], delta_default=2)
        ch = Adversary(TrackMax(1), MinDelta()).decide(c, frozenset({0}), TrimmedMidrange(), [])
        assert ch.byzantine_placements == {2: 9} and ch.stop_fractions == {0: 0}


def oscillation(correct, f=1, phases=2, **kw):
    c = cfg(correct, [max(correct) + 1] * f, delta_default=F(1, 10**9))
    plan = oscillation_controller(c.params, c, phases=phases, **kw)
    params = SimulationParams(c.params.n, f, F(1, 10**9), F(1, 100), plan.cycles)
    return Configuration.build(params, correct, [max(correct) + 1] * f), plan


def replay(c, plan):
    return run(c, copy.deepcopy(plan.scheduler), copy.deepcopy(plan.adversary))


class TestOscillation:
    def test_first_phase_matches_hand_trace(self):
        c, plan = oscillation([0, 33, 66, 99], phases=1)
        trace = replay(c, plan)
        # block {33, 66} halves toward 99 until the gap is exactly d = 99/100,
        # then the top robot runs once and moves d/2
        right_end = next(i for i, ev in enumerate(trace.events) if len(ev.activated) == 1)
        before = sorted(trace.positions_at(right_end).values())[:4]
        after = trace.positions_at(right_end + 1)
        assert before[3] - before[1] == F(99, 100)
        top = max(trace.correct_ids, key=lambda r: trace.positions_at(right_end)[r])
        assert after[top] == 99 - F(99, 200)

    def test_block_gap_halves(self):
        c, plan = oscillation([0, 33, 66, 99], phases=1)
        trace = replay(c, plan)
        pos = [sorted(trace.positions_at(t)[i] for i in trace.correct_ids) for t in range(len(trace.events) + 1)]
        gaps = []
        for t, ev in enumerate(trace.events):
            if len(ev.activated) == 1:
                break
            gaps.append((pos[t][3] - pos[t][1], pos[t + 1][3] - pos[t + 1][1]))
        # every block step halves U_m - U_{f+1} except the last, which stops at d
        assert len(gaps) > 2
        assert all(after == before / 2 for before, after in gaps[:-1])
        assert gaps[-1][1] == F(99, 100)

    @pytest.mark.parametrize("correct", [[0, 50, 100], [0, 33, 66, 99], [0, 10, 20, 60, 100]])
    def test_total_loss_small(self, correct):
        c, plan = oscillation(correct, phases=6)
        trace = replay(c, plan)
        d0 = diameter(correct_positions(c))
        assert trace.terminal.kind == CYCLE_LIMIT
        assert min(trace.diameters()) >= d0 - 2 * d0 / 100
        assert verify_fair(trace.activation_log(), max(plan.pair_lengths), trace.correct_ids) == []

    def test_two_byzantine(self):
        c, plan = oscillation([0, 20, 40, 60, 80, 100], f=2, phases=3)
        trace = replay(c, plan)
        assert min(trace.diameters()) >= 98

    def test_replays_are_identical(self):
        c, plan = oscillation([0, 50, 100], phases=3)
        assert replay(c, plan).to_jsonl() == replay(c, plan).to_jsonl()

    @pytest.mark.parametrize("correct,f", [([0, 1], 1), ([0, 0, 5], 1), ([0, 1, 2, 3], 2)])
    def test_preconditions(self, correct, f):
        c = cfg(correct, [10] * f)
        with pytest.raises(InvalidPrecondition):
            oscillation_controller(c.params, c)

    def test_needs_byzantine(self):
        c = cfg([0, 5, 10], [])
        with pytest.raises(InvalidPrecondition):
            oscillation_controller(c.params, c)
