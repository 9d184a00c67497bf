"""Named, reproducible constructions with built-in assertions.

The impossibility scenarios only show the adversary defeating the
trimmed-midrange rule; the underlying lower bounds speak about every
cautious algorithm, which no simulation can cover.
"""

from __future__ import annotations

import copy
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping, Optional

from . import analysis
from .adversary import (
    Adversary,
    ByzantineStrategy,
    Fixed,
    MinDelta,
    RandomFraction,
    ScriptedPlacements,
    StopPolicy,
    TrackMax,
    oscillation_controller,
)
from .algorithm import TrimmedMidrange
from .core import (
    Configuration,
    InvalidConfiguration,
    SimulationParams,
    UnknownScenario,
    parse_scalar,
    to_scalar,
)
from .engine import CONVERGED, CYCLE_LIMIT, ERROR, Trace, run
from .scheduler import FullySync, KBoundedRandom, SchedulerPolicy, Scripted

SEED_MASK = 2**64 - 1


@dataclass
class Scenario:
    name: str
    description: str
    params: SimulationParams
    initial: Configuration
    scheduler: SchedulerPolicy
    byz: ByzantineStrategy
    stop: StopPolicy
    assertions: list[tuple[str, bool]]
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class AssertionResult:
    check: str
    expected: bool
    actual: bool

    @property
    def passed(self) -> bool:
        return self.expected == self.actual


def _spread(m: int, width: Fraction) -> list[Fraction]:
    if m == 1:
        return [Fraction(0)]
    return [width * i / (m - 1) for i in range(m)]


# -- assertion registry ----------------------------------------------------

def _fs_rate(trace: Trace, sc: Scenario) -> bool:
    delta = min(r.delta for r in trace.initial.robots if r.is_correct)
    d = trace.diameters()
    return all(d[t + 1] <= max(Fraction(0), d[t] - delta) for t in range(len(d) - 1))


def _within(trace: Trace, sc: Scenario) -> bool:
    t = trace.terminal
    return t is not None and t.kind == CONVERGED and t.t_epsilon <= sc.extra["cycle_bound"]


def _floor(trace: Trace, sc: Scenario) -> bool:
    floor = sc.extra["diameter_floor"]
    return all(d >= floor for d in trace.diameters())


def _epoch(trace: Trace, sc: Scenario) -> bool:
    delta = min(r.delta for r in trace.initial.robots if r.is_correct)
    _, violations = analysis.check_epoch_bound(trace, sc.extra["k"], trace.params.f, delta)
    return not violations


ASSERTIONS: dict[str, Callable[[Trace, Scenario], bool]] = {
    "converged": lambda tr, sc: tr.terminal is not None and tr.terminal.kind == CONVERGED,
    "cycle-limit": lambda tr, sc: tr.terminal is not None and tr.terminal.kind == CYCLE_LIMIT,
    "trim-underflow": lambda tr, sc: (tr.terminal is not None and tr.terminal.kind == ERROR
                                      and tr.terminal.error == "TrimUnderflow"),
    "cautious": lambda tr, sc: not analysis.check_cautious(tr),
    "diameter-monotone": lambda tr, sc: not analysis.check_diameter_monotone(tr),
    "delta-floor": lambda tr, sc: not analysis.check_delta_floor(tr),
    "fs-rate": _fs_rate,
    "converged-within": _within,
    "epoch-bound": _epoch,
    "diameter-floor": _floor,
    "diameter-constant": lambda tr, sc: len(set(tr.diameters())) == 1,
    "k-bounded": lambda tr, sc: not analysis.verify_k_bounded(tr.activation_log(), sc.extra["k"]),
    "fair": lambda tr, sc: not analysis.verify_fair(tr.activation_log(), sc.extra["fair_window"],
                                                   tr.correct_ids),
}


# -- catalogue ---------------------------------------------------------------

def _fs_convergence(f=1, n=None, d0=100, delta=5, epsilon=Fraction(1, 1000), max_cycles=1000, seed=0):
    n = 2 * f + 1 if n is None else n
    if n <= 2 * f:
        raise InvalidConfiguration("fs-convergence needs n > 2f")
    d0, delta = to_scalar(d0), to_scalar(delta)
    params = SimulationParams(n, f, delta, to_scalar(epsilon), max_cycles, seed)
    initial = Configuration.build(params, _spread(n - f, d0), [d0 + 1] * f)
    return Scenario(
        "fs-convergence",
        "Fully synchronous scheduler, Byzantine robots just right of the correct ones, "
        "every robot stopped after delta: the diameter drops by min(delta, diam) per cycle.",
        params, initial, FullySync(), TrackMax(1), MinDelta(),
        [("converged", True), ("cautious", True), ("diameter-monotone", True),
         ("delta-floor", True), ("fs-rate", True), ("converged-within", True)],
        {"cycle_bound": math.ceil(d0 / delta) if d0 else 0},
    )


def _ss_kbounded(f=1, n=None, k=2, d0=100, delta=1, epsilon=Fraction(1, 100), max_cycles=10_000, seed=0):
    n = 3 * f + 1 if n is None else n
    if n <= 3 * f:
        raise InvalidConfiguration("ss-kbounded needs n > 3f")
    d0 = to_scalar(d0)
    params = SimulationParams(n, f, to_scalar(delta), to_scalar(epsilon), max_cycles, seed)
    m = n - f
    rng = random.Random((seed + 3) & SEED_MASK)
    inner = [d0 * Fraction(rng.randrange(0, 1001), 1000) for _ in range(m - 2)]
    initial = Configuration.build(params, [Fraction(0), *inner, d0][:m], [d0 + 1] * f)
    return Scenario(
        "ss-kbounded",
        "Semi-synchronous k-bounded random scheduler with n = 3f + 1 and random stops.",
        params, initial, KBoundedRandom(k, seed), TrackMax(1), RandomFraction((seed + 1) & SEED_MASK),
        [("converged", True), ("cautious", True), ("diameter-monotone", True),
         ("delta-floor", True), ("epoch-bound", True), ("k-bounded", True), ("fair", True)],
        {"k": k, "fair_window": k * m},
    )


def _fair_oscillation(f=1, n=None, d0=100, phases=8, delta=Fraction(1, 10**9), epsilon=None, seed=0):
    n = 3 * f + 1 if n is None else n
    d0 = to_scalar(d0)
    epsilon = d0 / 4 if epsilon is None else to_scalar(epsilon)
    probe = SimulationParams(n, f, to_scalar(delta), epsilon, 1, seed)
    initial = Configuration.build(probe, _spread(n - f, d0), [d0 + 1] * f)
    plan = oscillation_controller(probe, initial, phases=phases)
    params = SimulationParams(n, f, to_scalar(delta), epsilon, plan.cycles, seed)
    initial = Configuration.build(params, _spread(n - f, d0), [d0 + 1] * f)
    return Scenario(
        "fair-oscillation",
        "Fair but unbounded scheduler that alternately squeezes one side of the correct "
        "robots; the rule never converges and the diameter stays above 49*d0/50.",
        params, initial, plan.scheduler, plan.byzantine, plan.stop,
        [("converged", False), ("cycle-limit", True), ("diameter-floor", True), ("fair", True),
         ("cautious", True), ("diameter-monotone", True)],
        {"fair_window": max(plan.pair_lengths), "pair_lengths": plan.pair_lengths,
         "diameter_floor": 49 * d0 / 50, "d0": d0, "phases": phases},
    )


def _lb_n2f(f=2, n=None, d0=100, delta=1, seed=0):
    n = 2 * f if n is None else n
    if not f < n <= 2 * f:
        raise InvalidConfiguration("lb-n2f needs f < n <= 2f")
    d0 = to_scalar(d0)
    params = SimulationParams(n, f, to_scalar(delta), Fraction(1, 100), 100, seed)
    m = n - f
    byz = [d0 if i % 2 == 0 else Fraction(0) for i in range(f)]
    initial = Configuration.build(params, _spread(m, d0), byz)
    return Scenario(
        "lb-n2f",
        "n <= 2f: trimming 2f values from n observations leaves nothing, so the rule is "
        "undefined and the run stops with TrimUnderflow.",
        params, initial, FullySync(), Fixed(byz), MinDelta(),
        [("trim-underflow", True)],
    )


def _lb_n3f(f=2, n=None, d0=100, cycles=200, delta=1, seed=0):
    n = 3 * f if n is None else n
    if not 2 * f < n <= 3 * f:
        raise InvalidConfiguration("lb-n3f needs 2f < n <= 3f")
    a, b = Fraction(0), to_scalar(d0)
    params = SimulationParams(n, f, to_scalar(delta), Fraction(1, 100), cycles, seed)
    at_a = n - 2 * f
    correct = [a] * at_a + [b] * f
    initial = Configuration.build(params, correct, [a] * f)
    ids_a = [i for i in range(n - f) if i < at_a]
    ids_b = [i for i in range(n - f) if i >= at_a]
    relocate = [b] * at_a + [a] * (f - at_a)
    return Scenario(
        "lb-n3f",
        "2f < n <= 3f: Byzantine robots hop between the two occupied points so each "
        "activated group sees a configuration where staying put is the only cautious move.",
        params, initial, Scripted([ids_a, ids_b], repeat=True),
        ScriptedPlacements([[a] * f, relocate], repeat=True), MinDelta(),
        [("converged", False), ("cycle-limit", True), ("diameter-constant", True),
         ("k-bounded", True), ("fair", True), ("cautious", True), ("diameter-monotone", True)],
        {"k": 2, "fair_window": 2},
    )


CATALOGUE: dict[str, Callable[..., Scenario]] = {
    "fs-convergence": _fs_convergence,
    "ss-kbounded": _ss_kbounded,
    "fair-oscillation": _fair_oscillation,
    "lb-n2f": _lb_n2f,
    "lb-n3f": _lb_n3f,
}

_INT_KEYS = {"n", "f", "k", "seed", "max_cycles", "phases", "cycles"}
_SCALAR_KEYS = {"d0", "delta", "epsilon"}

# Documented only: these setups matter for robots without multiples
# detection, while every snapshot here is an exact multiset.
MULTIPLICITY_CONFIGURATIONS = {
    "C1": "all correct robots at A, Byzantine robots at B",
    "C2": "Byzantine robots at A, all correct robots at B",
    "C3": "correct robots split between A and B, Byzantine robots at either point",
}


def coerce_overrides(overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Turn ``--set key=value`` strings into typed builder arguments."""
    out = {}
    for key, value in overrides.items():
        if key in _INT_KEYS:
            out[key] = int(value) if isinstance(value, str) else value
        elif key in _SCALAR_KEYS:
            out[key] = parse_scalar(value) if isinstance(value, str) else to_scalar(value)
        else:
            raise InvalidConfiguration(f"unknown scenario override {key!r}")
    return out


def build_scenario(name: str, overrides: Optional[Mapping[str, Any]] = None) -> Scenario:
    try:
        builder = CATALOGUE[name]
    except KeyError:
        raise UnknownScenario(f"unknown scenario {name!r}; known: {', '.join(CATALOGUE)}") from None
    kwargs = coerce_overrides(overrides or {})
    try:
        return builder(**kwargs)
    except TypeError as exc:
        raise InvalidConfiguration(f"{name}: {exc}") from None


def run_scenario(scenario: Scenario) -> tuple[Trace, list[AssertionResult]]:
    # policies are stateful; copies keep the scenario re-runnable
    scheduler = copy.deepcopy(scenario.scheduler)
    adversary = Adversary(copy.deepcopy(scenario.byz), copy.deepcopy(scenario.stop))
    trace = run(scenario.initial, scheduler, adversary, TrimmedMidrange(), scenario.params)
    results = [
        AssertionResult(name, expected, bool(ASSERTIONS[name](trace, scenario)))
        for name, expected in scenario.assertions
    ]
    return trace, results
