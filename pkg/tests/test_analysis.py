import dataclasses
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from byzsim import analysis
from byzsim.adversary import Adversary, FullMove, MinDelta, RandomFraction, TrackMax, TrackMin
from byzsim.algorithm import compute_destination
from byzsim.core import Configuration, InvalidPrecondition, PointMultiset, SimulationParams
from byzsim.engine import run
from byzsim.scheduler import FullySync, KBoundedRandom, RoundRobinFair


def cfg(correct, byz, **kw):
    return Configuration.build(SimulationParams(len(correct) + len(byz), len(byz), **kw), correct, byz)


def honest(seed=0, k=2, delta=1, cycles=400):
    c = cfg([0, 20, 45, 100], [101], delta_default=delta, max_cycles=cycles, epsilon=F(1, 100))
    return run(c, KBoundedRandom(k, seed), Adversary(TrackMax(1), RandomFraction(seed)))


def rogue(snapshot, f):
    return snapshot.max() + 100


class TestPlantedViolations:
    def test_rogue_rule_breaks_cautiousness(self):
        trace = run(cfg([0, 10], [100], max_cycles=3), FullySync(), Adversary(TrackMax(5), FullMove()), rogue)
        assert analysis.check_cautious(trace)
        assert analysis.check_atomicity(trace)

    def test_rogue_rule_grows_diameter(self):
        trace = run(cfg([0, 10], [100], max_cycles=2), RoundRobinFair(), Adversary(TrackMax(5), FullMove()), rogue)
        bad = analysis.check_diameter_monotone(trace)
        assert bad and bad[0].time == 1 and bad[0].witness == (10, 105)

    def test_tampered_move_breaks_delta_floor(self):
        trace = honest(cycles=5)
        ev = trace.events[0]
        rid = min(ev.activated)
        before = trace.positions_at(0)[rid]
        moved = dict(ev.end_positions)
        moved[rid] = before  # stayed put although destination was elsewhere
        if ev.destinations[rid] != before:
            trace.events[0] = dataclasses.replace(ev, end_positions=moved)
            assert analysis.check_delta_floor(trace)

    def test_tampered_snapshot_breaks_atomicity(self):
        trace = honest(cycles=5)
        ev = trace.events[1]
        trace.events[1] = dataclasses.replace(ev, snapshot=ev.snapshot.with_inserted(F(7)))
        assert analysis.check_atomicity(trace)

    def test_idle_epoch_is_trivial(self):
        trace = honest(cycles=8)
        start = trace.positions_at(0)
        frozen = [dataclasses.replace(ev, end_positions=start) for ev in trace.events]
        trace.events[:] = frozen
        bad = analysis.check_nontrivial(trace, F(1, 100))
        assert bad and bad[0].kind == "non-trivial"

    def test_summary(self):
        bad = analysis.check_diameter_monotone(
            run(cfg([0, 10], [100], max_cycles=2), RoundRobinFair(), Adversary(TrackMax(5), FullMove()), rogue))
        s = analysis.summarize("diameter-monotone", bad)
        assert s["violations"] == len(bad) and s["first"]["witness"] == ["10", "105"]
        assert analysis.summarize("x", [])["first"] is None


class TestHonestRuns:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32))
    def test_all_checks_clean(self, seed):
        trace = honest(seed)
        for check in (analysis.check_cautious, analysis.check_diameter_monotone,
                      analysis.check_delta_floor, analysis.check_atomicity):
            assert check(trace) == []
        assert analysis.check_nontrivial(trace, F(1, 100)) == []


class TestEpochs:
    def test_fully_sync_epochs_are_cycles(self):
        c = cfg([0, 100], [200], delta_default=10, max_cycles=5)
        trace = run(c, FullySync(), Adversary(TrackMax(1), MinDelta()))
        assert [(a, b) for a, b, _ in analysis.epochs(trace)] == [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5)]
        # ratios 90/100, 80/90, ...: the worst epoch is the first
        assert analysis.estimate_shrinking(trace).alpha_observed == F(9, 10)

    @pytest.mark.parametrize("k,f,expected", [(1, 1, F(15, 16)), (2, 1, F(63, 64)), (1, 2, F(31, 32))])
    def test_alpha_geometric_term(self, k, f, expected):
        # large delta: the geometric term dominates 1 - delta/d0
        assert analysis.epoch_alpha_bound(k, f, 100, 100) == expected

    def test_alpha_small_delta(self):
        assert analysis.epoch_alpha_bound(1, 1, F(1, 1000), 100) == 1 - F(1, 100_000)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_epoch_bound_holds(self, k):
        for seed in range(10):
            trace = honest(seed, k)
            checks, bad = analysis.check_epoch_bound(trace, k, 1, 1)
            assert bad == [] and checks
            assert all(c.d_end <= c.alpha_bound * c.d0 for c in checks)

    def test_planted_epoch_violation(self):
        # an idle adversary-stopped run: each epoch loses only delta=1/1000,
        # so claiming delta = d0 forces alpha = 15/16 and must be flagged
        c = cfg([0, 50, 100], [101], delta_default=F(1, 1000), max_cycles=6)
        trace = run(c, RoundRobinFair(), Adversary(TrackMax(1), MinDelta()))
        _, bad = analysis.check_epoch_bound(trace, 1, 1, 100)
        assert bad and bad[0].kind == "epoch-bound"

    def test_epoch_bound_precondition(self):
        trace = run(cfg([0, 9], [4], max_cycles=3), FullySync(), Adversary())
        with pytest.raises(InvalidPrecondition):
            analysis.check_epoch_bound(trace, 1, 1, 1)


class TestLimitDestinations:
    def test_multi_cycle_window(self):
        trace = honest(3)
        for t1 in range(0, min(20, len(trace.events)), 3):
            pos = trace.positions_at(t1)
            lowest = sorted(trace.correct_ids, key=lambda r: pos[r])[:2]
            assert analysis.check_limit_destinations(trace, lowest, t1, min(t1 + 5, len(trace.events) - 1)) == []

    def test_single_cycle_matches_destination_bound(self):
        trace = honest(4)
        for t, (before, event) in enumerate(trace.cycles()):
            u = PointMultiset(before[i] for i in trace.correct_ids)
            low2 = sorted(trace.correct_ids, key=lambda r: before[r])[:2]
            upper = (u.at(2) + u.max()) / 2
            single = analysis.check_limit_destinations(trace, low2, t, t)
            assert single == [] and all(d <= upper for d in event.destinations.values())

    def test_bad_s(self):
        with pytest.raises(InvalidPrecondition):
            analysis.check_limit_destinations(honest(cycles=3), [0], 0, 1)


class TestConvergenceTime:
    def test_exact(self):
        c = cfg([0, 100], [200], delta_default=10, max_cycles=20)
        trace = run(c, FullySync(), Adversary(TrackMax(1), MinDelta()))
        assert analysis.convergence_time(trace, 15).t_epsilon == 9
        assert analysis.convergence_time(trace, F(1, 2)).t_epsilon == 10

    def test_monotone_in_epsilon(self):
        trace = honest(2)
        times = [analysis.convergence_time(trace, F(1, 2**i)).t_epsilon for i in range(0, 8)]
        assert times == sorted(times)

    def test_never(self):
        trace = honest(cycles=2)
        assert analysis.convergence_time(trace, F(1, 10**9)).t_epsilon is None


class TestActivationLogs:
    def test_k_bounded_example(self):
        log = [{0}, {1}, {1}, {0}]
        assert analysis.verify_k_bounded(log, 2) == []
        bad = analysis.verify_k_bounded(log, 1)
        assert len(bad) == 1 and bad[0].time == 3

    def test_fair_example(self):
        log = [{0}, {1}, {1}, {1}, {0}]
        assert analysis.verify_fair(log, 4) == []
        assert analysis.verify_fair(log, 3)

    def test_fair_catches_idle_robot(self):
        assert analysis.verify_fair([{0}, {0}], 5, ids=[0, 1])

    def test_fair_window_positive(self):
        with pytest.raises(InvalidPrecondition):
            analysis.verify_fair([{0}], 0)


class TestSnapshotLemmas:
    def test_examples(self):
        u = PointMultiset([0, 8])
        assert analysis.check_snapshot_lemmas(u, PointMultiset([100]), 1) == []
        assert analysis.check_order_statistics(PointMultiset([1, 5, 9, 9]), 1) == []

    def test_detects_bad_multiset_counts(self):
        # three outliers against f = 2: one survives the trim and lies outside range(U)
        bad = analysis.check_snapshot_lemmas(PointMultiset([0, 1]), PointMultiset([50, 60, 70]), 2)
        assert bad and bad[0].kind == "range-trim"

    def test_brute_force_matches(self):
        u = PointMultiset([3, 1, 4, 1, 5, 9, 2])
        assert analysis.check_order_statistics(u, 2) == []
