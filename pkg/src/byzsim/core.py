"""Exact scalars, position multisets and robot-network state.

Every position, distance and bound in the simulator is a
:class:`fractions.Fraction`; nothing here ever touches a float.
"""

from __future__ import annotations

import bisect
import enum
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

Scalar = Fraction
ScalarLike = Union[Fraction, int, str]

_SCALAR_RE = re.compile(r"^\s*([+-]?\d+)(?:\s*/\s*(\d+))?\s*$")


class ByzSimError(Exception):
    """Base class for all simulator errors."""


class EmptyMultiset(ByzSimError):
    pass


class TrimUnderflow(ByzSimError):
    """Raised when trimming 2f values would leave nothing (n <= 2f)."""


class SchedulerContractViolation(ByzSimError):
    pass


class SchedulerExhausted(ByzSimError):
    pass


class AdversaryContractViolation(ByzSimError):
    pass


class InvalidPrecondition(ByzSimError):
    pass


class UnknownScenario(ByzSimError):
    pass


class InvalidConfiguration(ByzSimError):
    pass


def to_scalar(value: ScalarLike) -> Fraction:
    """Coerce ints, Fractions and ``"p/q"`` text to an exact scalar.

    Floats are rejected on purpose.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return parse_scalar(value)
    raise TypeError(f"cannot use {type(value).__name__} as an exact scalar")


def parse_scalar(text: str) -> Fraction:
    m = _SCALAR_RE.match(text)
    if m is None:
        raise ValueError(f"not a rational in p/q form: {text!r}")
    num = int(m.group(1))
    den = int(m.group(2)) if m.group(2) is not None else 1
    if den == 0:
        raise ValueError(f"zero denominator: {text!r}")
    return Fraction(num, den)


def format_scalar(value: Fraction) -> str:
    """Canonical text form: ``"p/q"`` with q > 1, or plain ``"p"``."""
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


class PointMultiset:
    """Immutable sorted multiset of scalars.

    Iteration yields elements in nondecreasing order. ``at(i)`` is the
    1-based order statistic, so ``U.at(f + 1)`` reads like the math.
    """

    __slots__ = ("_elements",)

    def __init__(self, elements: Iterable[ScalarLike] = ()):
        self._elements = tuple(sorted(to_scalar(x) for x in elements))

    @classmethod
    def _from_sorted(cls, elements: Sequence[Fraction]) -> PointMultiset:
        obj = cls.__new__(cls)
        obj._elements = tuple(elements)
        return obj

    @property
    def elements(self) -> tuple[Fraction, ...]:
        return self._elements

    def __len__(self) -> int:
        return len(self._elements)

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self._elements)

    def __contains__(self, x: object) -> bool:
        return x in self._elements

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointMultiset):
            return NotImplemented
        return self._elements == other._elements

    def __hash__(self) -> int:
        return hash(self._elements)

    def __repr__(self) -> str:
        inner = ", ".join(format_scalar(x) for x in self._elements)
        return f"PointMultiset({{{inner}}})"

    def at(self, i: int) -> Fraction:
        """1-based order statistic."""
        if not 1 <= i <= len(self._elements):
            raise IndexError(f"order statistic {i} out of 1..{len(self._elements)}")
        return self._elements[i - 1]

    def min(self) -> Fraction:
        if not self._elements:
            raise EmptyMultiset("min of empty multiset")
        return self._elements[0]

    def max(self) -> Fraction:
        if not self._elements:
            raise EmptyMultiset("max of empty multiset")
        return self._elements[-1]

    def multiplicity(self, x: ScalarLike) -> int:
        x = to_scalar(x)
        lo = bisect.bisect_left(self._elements, x)
        hi = bisect.bisect_right(self._elements, x)
        return hi - lo

    def with_inserted(self, x: ScalarLike) -> PointMultiset:
        x = to_scalar(x)
        els = list(self._elements)
        bisect.insort(els, x)
        return PointMultiset._from_sorted(els)

    def without(self, x: ScalarLike) -> PointMultiset:
        """Remove one occurrence of ``x``."""
        x = to_scalar(x)
        i = bisect.bisect_left(self._elements, x)
        if i == len(self._elements) or self._elements[i] != x:
            raise KeyError(format_scalar(x))
        return PointMultiset._from_sorted(self._elements[:i] + self._elements[i + 1:])

    def union(self, other: PointMultiset) -> PointMultiset:
        """Multiset sum (multiplicities add)."""
        return PointMultiset(self._elements + other._elements)

    def slice(self, start: int, stop: int) -> PointMultiset:
        """Order statistics ``start..stop`` inclusive, 1-based."""
        return PointMultiset._from_sorted(self._elements[start - 1:stop])

    def affine(self, a: ScalarLike, b: ScalarLike) -> PointMultiset:
        a, b = to_scalar(a), to_scalar(b)
        return PointMultiset(a * x + b for x in self._elements)


def diameter(points: PointMultiset) -> Fraction:
    if len(points) == 0:
        raise EmptyMultiset("diameter of empty multiset")
    return points.max() - points.min()


def range_of(points: PointMultiset) -> tuple[Fraction, Fraction]:
    if len(points) == 0:
        raise EmptyMultiset("range of empty multiset")
    return points.min(), points.max()


class Kind(enum.Enum):
    CORRECT = "correct"
    BYZANTINE = "byzantine"


@dataclass(frozen=True)
class SimulationParams:
    n: int
    f: int
    delta_default: Fraction = Fraction(1)
    epsilon: Fraction = Fraction(1, 100)
    max_cycles: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "delta_default", to_scalar(self.delta_default))
        object.__setattr__(self, "epsilon", to_scalar(self.epsilon))
        if self.n < 1:
            raise InvalidConfiguration(f"n must be positive, got {self.n}")
        if not 0 <= self.f < self.n:
            raise InvalidConfiguration(f"need 0 <= f < n, got f={self.f}, n={self.n}")
        if self.delta_default <= 0:
            raise InvalidConfiguration("delta must be > 0")
        if self.epsilon <= 0:
            raise InvalidConfiguration("epsilon must be > 0")
        if self.max_cycles < 1:
            raise InvalidConfiguration("max_cycles must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfiguration("seed must fit in 64 unsigned bits")

    @property
    def m(self) -> int:
        """Number of correct robots."""
        return self.n - self.f


@dataclass(frozen=True)
class RobotState:
    id: int
    kind: Kind
    position: Fraction
    delta: Fraction
    pending_destination: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "position", to_scalar(self.position))
        object.__setattr__(self, "delta", to_scalar(self.delta))
        if self.delta <= 0:
            raise InvalidConfiguration(f"robot {self.id}: delta must be > 0")

    @property
    def is_correct(self) -> bool:
        return self.kind is Kind.CORRECT


@dataclass(frozen=True)
class Configuration:
    time: int
    robots: tuple[RobotState, ...]
    params: SimulationParams = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "robots", tuple(sorted(self.robots, key=lambda r: r.id)))
        ids = [r.id for r in self.robots]
        if len(set(ids)) != len(ids):
            raise InvalidConfiguration("robot ids must be unique")
        if len(self.robots) != self.params.n:
            raise InvalidConfiguration(f"expected {self.params.n} robots, got {len(self.robots)}")
        nbyz = sum(1 for r in self.robots if not r.is_correct)
        if nbyz != self.params.f:
            raise InvalidConfiguration(f"expected {self.params.f} Byzantine robots, got {nbyz}")
        if self.time < 0:
            raise InvalidConfiguration("time must be nonnegative")

    @classmethod
    def build(
        cls,
        params: SimulationParams,
        correct: Sequence[ScalarLike],
        byzantine: Sequence[ScalarLike] = (),
        deltas: Optional[Mapping[int, ScalarLike]] = None,
        time: int = 0,
    ) -> Configuration:
        """Correct robots get ids ``0..m-1``, Byzantine ones ``m..n-1``."""
        if len(correct) != params.m:
            raise InvalidConfiguration(
                f"initial.correct has {len(correct)} positions, expected n - f = {params.m}")
        if len(byzantine) != params.f:
            raise InvalidConfiguration(
                f"initial.byzantine has {len(byzantine)} positions, expected f = {params.f}")
        deltas = dict(deltas or {})
        robots = []
        for i, pos in enumerate(correct):
            robots.append(RobotState(i, Kind.CORRECT, to_scalar(pos),
                                     to_scalar(deltas.pop(i, params.delta_default))))
        for j, pos in enumerate(byzantine):
            rid = params.m + j
            robots.append(RobotState(rid, Kind.BYZANTINE, to_scalar(pos),
                                     to_scalar(deltas.pop(rid, params.delta_default))))
        if deltas:
            raise InvalidConfiguration(f"delta overrides for unknown ids {sorted(deltas)}")
        return cls(time, tuple(robots), params)

    def robot(self, rid: int) -> RobotState:
        for r in self.robots:
            if r.id == rid:
                return r
        raise KeyError(rid)

    @property
    def correct_ids(self) -> tuple[int, ...]:
        return tuple(r.id for r in self.robots if r.is_correct)

    @property
    def byzantine_ids(self) -> tuple[int, ...]:
        return tuple(r.id for r in self.robots if not r.is_correct)

    def positions(self) -> dict[int, Fraction]:
        return {r.id: r.position for r in self.robots}

    def with_positions(self, updates: Mapping[int, Fraction], time: Optional[int] = None) -> Configuration:
        robots = tuple(
            RobotState(r.id, r.kind, updates.get(r.id, r.position), r.delta)
            for r in self.robots
        )
        return Configuration(self.time if time is None else time, robots, self.params)


def correct_positions(config: Configuration) -> PointMultiset:
    return PointMultiset(r.position for r in config.robots if r.is_correct)


def byzantine_positions(config: Configuration) -> PointMultiset:
    return PointMultiset(r.position for r in config.robots if not r.is_correct)


def observed_snapshot(config: Configuration) -> PointMultiset:
    """Positions of all robots, multiplicities intact."""
    return PointMultiset(r.position for r in config.robots)
