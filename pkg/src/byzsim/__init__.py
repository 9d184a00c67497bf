"""Byzantine-resilient convergence of oblivious robots on a line.

Exact-rational simulator for the trimmed-midrange rule under ATOM
schedulers, with trace checkers for its safety and shrinking properties
and scripted adversaries for the matching impossibility constructions.
"""

from .algorithm import TrimmedMidrange, compute_destination, midrange, trim_f
from .core import (
    ByzSimError,
    Configuration,
    EmptyMultiset,
    InvalidPrecondition,
    Kind,
    PointMultiset,
    RobotState,
    SimulationParams,
    TrimUnderflow,
    correct_positions,
    diameter,
    format_scalar,
    observed_snapshot,
    parse_scalar,
    range_of,
)
from .engine import AdversaryChoices, Trace, TraceEvent, run, step

__version__ = "0.1.0"

__all__ = [
    "AdversaryChoices", "ByzSimError", "Configuration", "EmptyMultiset", "InvalidPrecondition",
    "Kind", "PointMultiset", "RobotState", "SimulationParams", "Trace", "TraceEvent",
    "TrimUnderflow", "TrimmedMidrange", "compute_destination", "correct_positions", "diameter",
    "format_scalar", "midrange", "observed_snapshot", "parse_scalar", "range_of", "run", "step",
    "trim_f",
]
