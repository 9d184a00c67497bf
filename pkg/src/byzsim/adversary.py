"""Byzantine placement strategies, movement-stop policies, and the
scripted fair-but-unbounded adversary that keeps the trimmed-midrange rule
from converging.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .algorithm import RobotAlgorithm, TrimmedMidrange
from .core import (
    Configuration,
    InvalidPrecondition,
    ScalarLike,
    correct_positions,
    diameter,
    observed_snapshot,
    to_scalar,
)
from .engine import AdversaryChoices, step
from .scheduler import Scripted

RIGHT = "right"
LEFT = "left"


# -- Byzantine placement ---------------------------------------------------

class ByzantineStrategy:
    name = "abstract"

    def place(self, config: Configuration, history: Sequence[frozenset[int]]) -> dict[int, Fraction]:
        raise NotImplementedError


class Fixed(ByzantineStrategy):
    """Constant positions, listed in Byzantine-id order."""

    name = "fixed"

    def __init__(self, positions: Sequence[ScalarLike]):
        self.positions = [to_scalar(p) for p in positions]

    def __repr__(self):
        return f"Fixed({[str(p) for p in self.positions]})"

    def place(self, config, history):
        ids = config.byzantine_ids
        if len(self.positions) != len(ids):
            raise InvalidPrecondition(f"Fixed strategy has {len(self.positions)} positions for {len(ids)} Byzantine robots")
        return dict(zip(ids, self.positions))


class TrackMax(ByzantineStrategy):
    name = "track-max"

    def __init__(self, offset: ScalarLike = 1):
        self.offset = to_scalar(offset)

    def __repr__(self):
        return f"TrackMax({self.offset})"

    def place(self, config, history):
        target = correct_positions(config).max() + self.offset
        return {rid: target for rid in config.byzantine_ids}


class TrackMin(ByzantineStrategy):
    name = "track-min"

    def __init__(self, offset: ScalarLike = 1):
        self.offset = to_scalar(offset)

    def __repr__(self):
        return f"TrackMin({self.offset})"

    def place(self, config, history):
        target = correct_positions(config).min() - self.offset
        return {rid: target for rid in config.byzantine_ids}


class RandomInRange(ByzantineStrategy):
    """Seeded dyadic positions in ``[lo, hi]``.

    Without explicit bounds the interval is the correct range widened by one
    diameter on each side (at least 1), so Byzantine robots land both inside
    and outside ``range(U)``.
    """

    name = "random"

    def __init__(self, seed: int = 0, lo: Optional[ScalarLike] = None,
                 hi: Optional[ScalarLike] = None, resolution: int = 256):
        self.seed = seed
        self.lo = None if lo is None else to_scalar(lo)
        self.hi = None if hi is None else to_scalar(hi)
        self.resolution = resolution
        self._rng = random.Random(seed)

    def __repr__(self):
        return f"RandomInRange(seed={self.seed})"

    def place(self, config, history):
        u = correct_positions(config)
        width = max(diameter(u), Fraction(1))
        lo = u.min() - width if self.lo is None else self.lo
        hi = u.max() + width if self.hi is None else self.hi
        return {
            rid: lo + (hi - lo) * Fraction(self._rng.randrange(self.resolution + 1), self.resolution)
            for rid in config.byzantine_ids
        }


class ScriptedPlacements(ByzantineStrategy):
    """Per-cycle placement lists (Byzantine-id order), indexed by cycle."""

    name = "scripted"

    def __init__(self, script: Sequence[Sequence[ScalarLike]], repeat: bool = True):
        self.script = [[to_scalar(p) for p in row] for row in script]
        self.repeat = repeat

    def __repr__(self):
        return f"ScriptedPlacements(<{len(self.script)} rows>)"

    def place(self, config, history):
        t = len(history)
        if t >= len(self.script):
            if not self.repeat:
                return {}
            t %= len(self.script)
        return dict(zip(config.byzantine_ids, self.script[t]))


@dataclass(frozen=True)
class OscillationState:
    phase: str
    d: Fraction
    phase_step: int


class OscillationScript(ByzantineStrategy):
    """Right of the correct robots in right phases, left of them in left phases."""

    name = "oscillation"

    def __init__(self, states: Sequence[OscillationState], offset: ScalarLike = 1):
        self.states = list(states)
        self.offset = to_scalar(offset)

    def __repr__(self):
        return f"OscillationScript(<{len(self.states)} cycles>)"

    def state_at(self, t: int) -> OscillationState:
        return self.states[min(t, len(self.states) - 1)]

    def place(self, config, history):
        u = correct_positions(config)
        if self.state_at(len(history)).phase == RIGHT:
            target = u.max() + self.offset
        else:
            target = u.min() - self.offset
        return {rid: target for rid in config.byzantine_ids}


def place_byzantine(strategy: ByzantineStrategy, config: Configuration,
                    history: Sequence[frozenset[int]] = ()) -> dict[int, Fraction]:
    return strategy.place(config, history)


# -- stop policies ---------------------------------------------------------

class StopPolicy:
    name = "abstract"

    def choose(self, activated, positions, destinations, deltas, history=()) -> dict[int, Fraction]:
        raise NotImplementedError


class FullMove(StopPolicy):
    name = "full"

    def __repr__(self):
        return "FullMove()"

    def choose(self, activated, positions, destinations, deltas, history=()):
        return {rid: Fraction(1) for rid in sorted(activated)}


class MinDelta(StopPolicy):
    """Stop as early as allowed; the engine lifts this to the delta floor."""

    name = "min-delta"

    def __repr__(self):
        return "MinDelta()"

    def choose(self, activated, positions, destinations, deltas, history=()):
        return {rid: Fraction(0) for rid in sorted(activated)}


class RandomFraction(StopPolicy):
    name = "random"

    def __init__(self, seed: int = 0, resolution: int = 256):
        self.seed = seed
        self.resolution = resolution
        self._rng = random.Random(seed)

    def __repr__(self):
        return f"RandomFraction(seed={self.seed})"

    def choose(self, activated, positions, destinations, deltas, history=()):
        return {rid: Fraction(self._rng.randrange(self.resolution + 1), self.resolution)
                for rid in sorted(activated)}


class ScriptedStops(StopPolicy):
    """Per-cycle fraction maps; robots missing from a row get 1."""

    name = "scripted"

    def __init__(self, script: Sequence[Mapping[int, Fraction]]):
        self.script = [dict(row) for row in script]

    def __repr__(self):
        return f"ScriptedStops(<{len(self.script)} rows>)"

    def choose(self, activated, positions, destinations, deltas, history=()):
        t = len(history)
        row = self.script[t] if t < len(self.script) else {}
        return {rid: Fraction(row.get(rid, 1)) for rid in sorted(activated)}


def choose_stops(policy: StopPolicy, activated, positions, destinations, deltas,
                 history=()) -> dict[int, Fraction]:
    return policy.choose(activated, positions, destinations, deltas, history)


@dataclass
class Adversary:
    """Pairs a placement strategy with a stop policy for :func:`engine.run`."""

    byzantine: ByzantineStrategy = field(default_factory=lambda: TrackMax(1))
    stop: StopPolicy = field(default_factory=FullMove)

    def decide(self, config: Configuration, activated: frozenset[int],
               algorithm: RobotAlgorithm, history) -> AdversaryChoices:
        placements = self.byzantine.place(config, history)
        placed = config.with_positions(placements)
        snapshot = observed_snapshot(placed)
        positions = placed.positions()
        destinations = {rid: algorithm(snapshot, config.params.f) for rid in sorted(activated)}
        deltas = {rid: placed.robot(rid).delta for rid in activated}
        stops = self.stop.choose(activated, positions, destinations, deltas, history)
        return AdversaryChoices(placements, stops)


def make_byzantine(kind: str, *, seed: int = 0, offset: ScalarLike = 1,
                   fixed_positions: Sequence[ScalarLike] = ()) -> ByzantineStrategy:
    if kind == "fixed":
        return Fixed(fixed_positions)
    if kind == "track-max":
        return TrackMax(offset)
    if kind == "track-min":
        return TrackMin(offset)
    if kind == "random":
        return RandomInRange(seed)
    raise ValueError(f"unknown Byzantine strategy {kind!r}")


def make_stop(kind: str, *, seed: int = 0) -> StopPolicy:
    if kind == "full":
        return FullMove()
    if kind == "min-delta":
        return MinDelta()
    if kind == "random":
        return RandomFraction(seed)
    raise ValueError(f"unknown stop policy {kind!r}")


# -- oscillation controller ------------------------------------------------

@dataclass
class OscillationPlan:
    scheduler: Scripted
    byzantine: OscillationScript
    stop: ScriptedStops
    pair_lengths: list[int]
    d0: Fraction
    granularity: Fraction

    @property
    def cycles(self) -> int:
        return len(self.scheduler.script)

    @property
    def adversary(self) -> Adversary:
        return Adversary(self.byzantine, self.stop)


def _block_fractions(phase, block, pos, low, high, d):
    """Stop fractions that land the block's near edge exactly at distance d."""
    gap = high - low
    mid = (low + high) / 2
    if gap <= d or gap / 2 >= d:
        return {rid: Fraction(1) for rid in block}
    fracs = {}
    if phase == RIGHT:
        line = high - d
        for rid in block:
            x = pos[rid]
            fracs[rid] = (line - x) / (mid - x) if x < line else Fraction(1)
    else:
        line = low + d
        for rid in block:
            x = pos[rid]
            fracs[rid] = (x - line) / (x - mid) if x > line else Fraction(1)
    return fracs


def oscillation_controller(params, initial: Configuration, phases: int = 8,
                           granularity: Optional[ScalarLike] = None,
                           offset: ScalarLike = 1) -> OscillationPlan:
    """Precompute the fair adversary script that defeats trimmed midrange.

    Each phase pair: Byzantine robots go right of the correct ones, the
    block ``U_{f+1}..U_{m-1}`` is activated until ``U_m - U_{f+1}`` shrinks
    to the current granularity ``d``, then ``U_m`` runs once and loses at
    most ``d/2``; the left side mirrors this. ``d`` halves after every pair,
    so the diameter never drops by more than ``2*d0/100`` in total.

    The script is found by driving :func:`engine.step` itself, so the
    returned scheduler/strategy/stops replay it exactly.
    """
    n, f = params.n, params.f
    m = n - f
    if n <= 3 * f:
        raise InvalidPrecondition(f"oscillation adversary needs n > 3f, got n={n}, f={f}")
    if f < 1:
        raise InvalidPrecondition("oscillation adversary needs at least one Byzantine robot")
    u = correct_positions(initial)
    if len(set(u)) != len(u):
        raise InvalidPrecondition("correct robots must start at distinct positions")
    d0 = diameter(u)
    d = d0 / 100 if granularity is None else to_scalar(granularity)
    if d <= 0:
        raise InvalidPrecondition("granularity must be positive")
    granularity0 = d

    algorithm = TrimmedMidrange()
    states: list[OscillationState] = []
    script: list[frozenset[int]] = []
    stops: list[dict[int, Fraction]] = []
    pair_lengths = []
    config = initial

    def cycle(activated, fracs, phase, phase_step):
        nonlocal config
        state = OscillationState(phase, d, phase_step)
        states.append(state)
        placements = OscillationScript([state], offset).place(config, ())
        config, _ = step(config, activated, AdversaryChoices(placements, fracs), algorithm)
        script.append(frozenset(activated))
        stops.append(dict(fracs))

    for _ in range(phases):
        start = len(script)
        for phase in (RIGHT, LEFT):
            phase_step = 0
            while True:
                pos = config.positions()
                order = sorted(config.correct_ids, key=lambda r: (pos[r], r))
                if phase == RIGHT:
                    block, anchor = order[f:m - 1], order[m - 1]
                    low, high = pos[order[f]], pos[anchor]
                else:
                    block, anchor = order[1:m - f], order[0]
                    low, high = pos[anchor], pos[order[m - f - 1]]
                if phase_step > 0 and high - low <= d:
                    break
                cycle(block, _block_fractions(phase, block, pos, low, high, d), phase, phase_step)
                phase_step += 1
            cycle([anchor], {anchor: Fraction(1)}, phase, phase_step)
        pair_lengths.append(len(script) - start)
        d = d / 2

    return OscillationPlan(
        scheduler=Scripted(script),
        byzantine=OscillationScript(states, offset),
        stop=ScriptedStops(stops),
        pair_lengths=pair_lengths,
        d0=d0,
        granularity=granularity0,
    )
