"""ATOM cycle semantics, the run loop, and trace (de)serialization.

One call to :func:`step` is one atomic look-compute-move cycle for the
activated robots: Byzantine robots are repositioned first, every activated
correct robot then sees the same snapshot, computes its destination and
moves at least ``min(delta_i, dist)`` towards it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Protocol, Sequence

from .core import (
    AdversaryContractViolation,
    ByzSimError,
    Configuration,
    Kind,
    PointMultiset,
    RobotState,
    SchedulerContractViolation,
    SimulationParams,
    correct_positions,
    diameter,
    format_scalar,
    observed_snapshot,
    parse_scalar,
)
from .algorithm import RobotAlgorithm, TrimmedMidrange

ActivationLog = list[frozenset[int]]

CONVERGED = "Converged"
CYCLE_LIMIT = "CycleLimit"
ERROR = "Error"


@dataclass(frozen=True)
class AdversaryChoices:
    byzantine_placements: Mapping[int, Fraction] = field(default_factory=dict)
    stop_fractions: Mapping[int, Fraction] = field(default_factory=dict)


@dataclass(frozen=True)
class TraceEvent:
    """One cycle. ``time`` is the index of the configuration the cycle produced."""

    time: int
    activated: frozenset[int]
    snapshot: PointMultiset
    destinations: Mapping[int, Fraction]
    end_positions: Mapping[int, Fraction]
    correct_diameter: Fraction


@dataclass(frozen=True)
class Terminal:
    kind: str
    t_epsilon: Optional[int] = None
    error: Optional[str] = None

    def __str__(self) -> str:
        if self.kind == CONVERGED:
            return f"Converged({self.t_epsilon})"
        if self.kind == ERROR:
            return f"Error({self.error})"
        return self.kind


@dataclass
class Trace:
    params: SimulationParams
    initial: Configuration
    events: list[TraceEvent] = field(default_factory=list)
    terminal: Optional[Terminal] = None

    @property
    def correct_ids(self) -> tuple[int, ...]:
        return self.initial.correct_ids

    def activation_log(self) -> ActivationLog:
        return [e.activated for e in self.events]

    def diameters(self) -> list[Fraction]:
        """Correct diameter at times 0, 1, ..., len(events)."""
        return [diameter(correct_positions(self.initial))] + [e.correct_diameter for e in self.events]

    def cycles(self) -> Iterator[tuple[dict[int, Fraction], TraceEvent]]:
        """Yield ``(positions before the cycle, event)`` pairs."""
        before = self.initial.positions()
        for event in self.events:
            yield before, event
            before = dict(event.end_positions)

    def positions_at(self, t: int) -> dict[int, Fraction]:
        if t == 0:
            return self.initial.positions()
        return dict(self.events[t - 1].end_positions)

    def to_jsonl(self) -> str:
        return "".join(line + "\n" for line in _trace_records(self))

    @classmethod
    def from_jsonl(cls, text: str) -> Trace:
        return _trace_from_records(json.loads(line) for line in text.splitlines() if line.strip())

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def read(cls, path) -> Trace:
        with open(path, encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())


class Scheduler(Protocol):
    def next_activation(self, history: Sequence[frozenset[int]], correct_ids: Sequence[int]) -> frozenset[int]: ...


class Adversary(Protocol):
    def decide(self, config: Configuration, activated: frozenset[int],
               algorithm: RobotAlgorithm, history: Sequence[frozenset[int]]) -> AdversaryChoices: ...


def advance(start: Fraction, dest: Fraction, delta: Fraction, fraction: Fraction) -> Fraction:
    """Where a robot ends after being stopped at ``fraction`` of its path.

    The distance covered is ``max(min(delta, dist), fraction * dist)``.
    """
    dist = abs(dest - start)
    if dist == 0:
        return start
    moved = max(min(delta, dist), fraction * dist)
    if moved >= dist:
        return dest
    return start + moved if dest > start else start - moved


def step(config: Configuration, activated: Iterable[int], choices: AdversaryChoices,
         algorithm: RobotAlgorithm) -> tuple[Configuration, TraceEvent]:
    activated = frozenset(activated)
    if not activated:
        raise SchedulerContractViolation("empty activation set")
    correct = set(config.correct_ids)
    if not activated <= correct:
        raise SchedulerContractViolation(
            f"activation set contains non-correct ids {sorted(activated - correct)}")
    byz = set(config.byzantine_ids)
    bad = set(choices.byzantine_placements) - byz
    if bad:
        raise AdversaryContractViolation(f"placements for non-Byzantine ids {sorted(bad)}")
    bad = set(choices.stop_fractions) - activated
    if bad:
        raise AdversaryContractViolation(f"stop fractions for non-activated ids {sorted(bad)}")
    for rid, frac in choices.stop_fractions.items():
        if not 0 <= frac <= 1:
            raise AdversaryContractViolation(f"stop fraction {frac} for robot {rid} outside [0, 1]")

    placed = config.with_positions({rid: Fraction(p) for rid, p in choices.byzantine_placements.items()})
    snapshot = observed_snapshot(placed)
    f = config.params.f

    destinations: dict[int, Fraction] = {}
    moves: dict[int, Fraction] = {}
    for rid in sorted(activated):
        robot = placed.robot(rid)
        dest = algorithm(snapshot, f)
        destinations[rid] = dest
        frac = Fraction(choices.stop_fractions.get(rid, 0))
        moves[rid] = advance(robot.position, dest, robot.delta, frac)

    after = placed.with_positions(moves, time=config.time + 1)
    event = TraceEvent(
        time=after.time,
        activated=activated,
        snapshot=snapshot,
        destinations=destinations,
        end_positions=after.positions(),
        correct_diameter=diameter(correct_positions(after)),
    )
    return after, event


def run(initial: Configuration, scheduler: Scheduler, adversary: Adversary,
        algorithm: Optional[RobotAlgorithm] = None,
        params: Optional[SimulationParams] = None) -> Trace:
    params = params or initial.params
    algorithm = algorithm or TrimmedMidrange()
    trace = Trace(params, initial)
    if diameter(correct_positions(initial)) < params.epsilon:
        trace.terminal = Terminal(CONVERGED, t_epsilon=initial.time)
        return trace

    config = initial
    history: ActivationLog = []
    correct_ids = initial.correct_ids
    for _ in range(params.max_cycles):
        try:
            activated = frozenset(scheduler.next_activation(history, correct_ids))
            choices = adversary.decide(config, activated, algorithm, history)
            config, event = step(config, activated, choices, algorithm)
        except ByzSimError as exc:
            trace.terminal = Terminal(ERROR, error=type(exc).__name__)
            return trace
        trace.events.append(event)
        history.append(activated)
        if event.correct_diameter < params.epsilon:
            trace.terminal = Terminal(CONVERGED, t_epsilon=event.time)
            return trace
    trace.terminal = Terminal(CYCLE_LIMIT)
    return trace


# -- serialization ---------------------------------------------------------

def _dump(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _scalar_map(m: Mapping[int, Fraction]) -> dict[str, str]:
    return {str(k): format_scalar(v) for k, v in sorted(m.items())}


def _params_record(p: SimulationParams) -> dict:
    return {
        "n": p.n, "f": p.f,
        "delta_default": format_scalar(p.delta_default),
        "epsilon": format_scalar(p.epsilon),
        "max_cycles": p.max_cycles, "seed": p.seed,
    }


def _trace_records(trace: Trace) -> Iterator[str]:
    yield _dump({
        "type": "header",
        "params": _params_record(trace.params),
        "initial": {
            "time": trace.initial.time,
            "robots": [
                {"id": r.id, "kind": r.kind.value, "position": format_scalar(r.position),
                 "delta": format_scalar(r.delta)}
                for r in trace.initial.robots
            ],
        },
    })
    for e in trace.events:
        yield _dump({
            "type": "event",
            "time": e.time,
            "activated": sorted(e.activated),
            "snapshot": [format_scalar(x) for x in e.snapshot],
            "destinations": _scalar_map(e.destinations),
            "end_positions": _scalar_map(e.end_positions),
            "correct_diameter": format_scalar(e.correct_diameter),
        })
    if trace.terminal is not None:
        t = trace.terminal
        yield _dump({"type": "terminal", "kind": t.kind, "t_epsilon": t.t_epsilon, "error": t.error})


def _trace_from_records(records: Iterable[dict]) -> Trace:
    records = iter(records)
    header = next(records)
    if header.get("type") != "header":
        raise ValueError("trace must start with a header record")
    p = header["params"]
    params = SimulationParams(
        n=p["n"], f=p["f"], delta_default=parse_scalar(p["delta_default"]),
        epsilon=parse_scalar(p["epsilon"]), max_cycles=p["max_cycles"], seed=p["seed"])
    robots = tuple(
        RobotState(r["id"], Kind(r["kind"]), parse_scalar(r["position"]), parse_scalar(r["delta"]))
        for r in header["initial"]["robots"]
    )
    trace = Trace(params, Configuration(header["initial"]["time"], robots, params))
    for rec in records:
        if rec["type"] == "event":
            trace.events.append(TraceEvent(
                time=rec["time"],
                activated=frozenset(rec["activated"]),
                snapshot=PointMultiset(parse_scalar(x) for x in rec["snapshot"]),
                destinations={int(k): parse_scalar(v) for k, v in rec["destinations"].items()},
                end_positions={int(k): parse_scalar(v) for k, v in rec["end_positions"].items()},
                correct_diameter=parse_scalar(rec["correct_diameter"]),
            ))
        elif rec["type"] == "terminal":
            trace.terminal = Terminal(rec["kind"], rec.get("t_epsilon"), rec.get("error"))
        else:
            raise ValueError(f"unknown trace record type {rec['type']!r}")
    return trace
