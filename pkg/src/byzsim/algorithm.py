"""The trimmed-midrange convergence rule and the algorithm interface."""

from __future__ import annotations

from fractions import Fraction
from typing import Protocol

from .core import EmptyMultiset, PointMultiset, TrimUnderflow


class RobotAlgorithm(Protocol):
    """An oblivious rule: observed snapshot and fault bound in, destination out."""

    def __call__(self, snapshot: PointMultiset, f: int) -> Fraction: ...


def trim_f(points: PointMultiset, f: int) -> PointMultiset:
    """Drop the f smallest and f largest values, counting multiplicity."""
    if f < 0:
        raise ValueError(f"f must be nonnegative, got {f}")
    if len(points) <= 2 * f:
        raise TrimUnderflow(f"cannot trim 2*{f} values from a multiset of size {len(points)}")
    return points.slice(f + 1, len(points) - f)


def midrange(points: PointMultiset) -> Fraction:
    # range midpoint, not the order-statistic median
    if len(points) == 0:
        raise EmptyMultiset("midrange of empty multiset")
    return (points.min() + points.max()) / 2


def compute_destination(snapshot: PointMultiset, f: int) -> Fraction:
    return midrange(trim_f(snapshot, f))


class TrimmedMidrange:
    """Callable wrapper so the engine can host other cautious rules."""

    name = "trimmed-midrange"

    def __call__(self, snapshot: PointMultiset, f: int) -> Fraction:
        return compute_destination(snapshot, f)

    def __repr__(self) -> str:
        return "TrimmedMidrange()"
