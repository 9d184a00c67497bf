import os
from fractions import Fraction as F
from pathlib import Path

import pytest

from byzsim.core import InvalidConfiguration, UnknownScenario
from byzsim.engine import CONVERGED, CYCLE_LIMIT
from byzsim.scenarios import (
    ASSERTIONS,
    CATALOGUE,
    MULTIPLICITY_CONFIGURATIONS,
    build_scenario,
    coerce_overrides,
    run_scenario,
)

GOLDEN = Path(__file__).parent / "golden"


@pytest.mark.parametrize("name", sorted(CATALOGUE))
def test_scenario_assertions_hold(name):
    sc = build_scenario(name)
    assert all(check in ASSERTIONS for check, _ in sc.assertions)
    _, results = run_scenario(sc)
    failed = [r for r in results if not r.passed]
    assert failed == []


@pytest.mark.parametrize("name", sorted(CATALOGUE))
def test_golden_trace(name):
    trace, _ = run_scenario(build_scenario(name))
    path = GOLDEN / f"{name}.jsonl"
    if os.environ.get("BYZSIM_REGEN_GOLDEN"):
        trace.write(path)
    assert trace.to_jsonl().encode() == path.read_bytes()


def test_rerun_is_identical():
    sc = build_scenario("ss-kbounded", {"seed": "11"})
    a, _ = run_scenario(sc)
    b, _ = run_scenario(sc)
    assert a.to_jsonl() == b.to_jsonl()


def test_fs_convergence_rate():
    trace, _ = run_scenario(build_scenario("fs-convergence", {"delta": "10", "epsilon": "1/1000"}))
    assert trace.terminal.kind == CONVERGED and trace.terminal.t_epsilon == 10
    assert trace.diameters() == [F(100 - 10 * i) for i in range(11)]


def test_lb_n3f_is_stuck():
    trace, _ = run_scenario(build_scenario("lb-n3f"))
    assert trace.terminal.kind == CYCLE_LIMIT
    assert set(trace.diameters()) == {100}
    correct = trace.correct_ids
    assert all(trace.positions_at(t)[i] == trace.positions_at(0)[i]
               for t in range(len(trace.events) + 1) for i in correct)


@pytest.mark.parametrize("f,n", [(3, 6), (3, 5), (4, 7)])
def test_lb_n2f_other_sizes(f, n):
    _, results = run_scenario(build_scenario("lb-n2f", {"f": f, "n": n}))
    assert all(r.passed for r in results)


def test_lb_n2f_lone_correct_robot_is_already_gathered():
    trace, _ = run_scenario(build_scenario("lb-n2f", {"f": 1}))
    assert trace.terminal.kind == CONVERGED and trace.events == []


def test_ss_kbounded_overrides():
    sc = build_scenario("ss-kbounded", {"k": "3", "seed": "5", "n": "7", "f": "2"})
    assert sc.params.n == 7 and sc.extra["k"] == 3
    _, results = run_scenario(sc)
    assert all(r.passed for r in results)


def test_unknown_scenario():
    with pytest.raises(UnknownScenario):
        build_scenario("nope")


@pytest.mark.parametrize("overrides", [{"bogus": "1"}, {"n": "4", "f": "2"}, {"cycles": "3"}])
def test_bad_overrides(overrides):
    with pytest.raises(InvalidConfiguration):
        build_scenario("fs-convergence", overrides)


def test_coerce_types():
    assert coerce_overrides({"delta": "1/3", "k": "2"}) == {"delta": F(1, 3), "k": 2}


def test_multiplicity_setups_documented():
    assert set(MULTIPLICITY_CONFIGURATIONS) == {"C1", "C2", "C3"}
