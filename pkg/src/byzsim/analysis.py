"""Trace checkers.

Every checker is a pure function over a finished :class:`~byzsim.engine.Trace`
(or an activation log) and returns violations as data; an empty list means
the property held on that trace.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .algorithm import compute_destination, trim_f
from .core import InvalidPrecondition, PointMultiset, format_scalar
from .engine import Trace


@dataclass(frozen=True)
class Violation:
    kind: str
    time: int
    details: str
    witness: tuple[Fraction, ...] = ()


@dataclass(frozen=True)
class ShrinkEstimate:
    epochs: list[tuple[int, int, Fraction]]
    alpha_observed: Optional[Fraction]


@dataclass(frozen=True)
class EpochBoundCheck:
    k: int
    f: int
    delta: Fraction
    d0: Fraction
    alpha_bound: Fraction
    t_start: int
    t_end: int
    d_end: Fraction
    witness: PointMultiset = field(default_factory=PointMultiset)
    s_max: Optional[Fraction] = None


@dataclass(frozen=True)
class ConvergenceReport:
    epsilon: Fraction
    t_epsilon: Optional[int]
    final_diameter: Fraction


def _correct(trace: Trace, positions: dict[int, Fraction]) -> PointMultiset:
    return PointMultiset(positions[i] for i in trace.correct_ids)


def summarize(name: str, violations: Sequence[Violation]) -> dict:
    """Serializable summary: check name, violation count, first witness."""
    first = violations[0] if violations else None
    return {
        "check": name,
        "violations": len(violations),
        "first": None if first is None else {
            "kind": first.kind, "time": first.time, "details": first.details,
            "witness": [format_scalar(w) for w in first.witness],
        },
    }


# -- definitions -----------------------------------------------------------

def check_cautious(trace: Trace) -> list[Violation]:
    out = []
    for before, event in trace.cycles():
        u = _correct(trace, before)
        lo, hi = u.min(), u.max()
        for rid, dest in sorted(event.destinations.items()):
            if not lo <= dest <= hi:
                out.append(Violation("cautious", event.time - 1,
                                     f"robot {rid} destination outside range(U)", (dest, lo, hi)))
    return out


def check_diameter_monotone(trace: Trace) -> list[Violation]:
    out = []
    diams = trace.diameters()
    for t in range(1, len(diams)):
        if diams[t] > diams[t - 1]:
            out.append(Violation("diameter-monotone", t, "correct diameter increased",
                                 (diams[t - 1], diams[t])))
    return out


def check_nontrivial(trace: Trace, epsilon) -> list[Violation]:
    """Progress proxy: while diam >= epsilon, some correct robot moves
    before every correct robot has been activated once more."""
    epsilon = Fraction(epsilon)
    out = []
    diams = trace.diameters()
    for t0, t1, _ in epochs(trace):
        if diams[t0] < epsilon:
            continue
        moved = any(
            trace.positions_at(t)[i] != trace.positions_at(t - 1)[i]
            for t in range(t0 + 1, t1 + 1) for i in trace.correct_ids
        )
        if not moved:
            out.append(Violation("non-trivial", t0, "no correct robot moved during a full epoch",
                                 (diams[t0],)))
    return out


def check_delta_floor(trace: Trace) -> list[Violation]:
    """Each activated robot ends on [start, D_i] at least min(delta_i, dist) away."""
    out = []
    deltas = {r.id: r.delta for r in trace.initial.robots}
    for before, event in trace.cycles():
        for rid, dest in event.destinations.items():
            start, end = before[rid], event.end_positions[rid]
            dist = abs(dest - start)
            lo, hi = min(start, dest), max(start, dest)
            if not lo <= end <= hi or abs(end - start) < min(deltas[rid], dist):
                out.append(Violation("delta-floor", event.time - 1, f"robot {rid} moved illegally",
                                     (start, dest, end, deltas[rid])))
    return out


def check_atomicity(trace: Trace, algorithm=compute_destination) -> list[Violation]:
    """Recompute every destination from the event's single shared snapshot."""
    out = []
    f = trace.params.f
    for before, event in trace.cycles():
        expected_snapshot = PointMultiset(
            p for rid, p in before.items() if rid in trace.correct_ids
        ).union(PointMultiset(p for rid, p in event.end_positions.items() if rid not in trace.correct_ids))
        if expected_snapshot != event.snapshot:
            out.append(Violation("atomicity", event.time - 1, "snapshot does not match pre-move state"))
            continue
        expected = algorithm(event.snapshot, f)
        for rid, dest in sorted(event.destinations.items()):
            if dest != expected:
                out.append(Violation("atomicity", event.time - 1,
                                     f"robot {rid} destination differs from shared-snapshot recomputation",
                                     (dest, expected)))
    return out


# -- shrinking -------------------------------------------------------------

def epochs(trace: Trace) -> list[tuple[int, int, Fraction]]:
    """``(t_start, t_end, ratio)`` where ``t_end`` is the first time every
    correct robot has run since ``t_start``."""
    diams = trace.diameters()
    everyone = set(trace.correct_ids)
    out = []
    t0, seen = 0, set()
    for event in trace.events:
        seen |= event.activated
        if seen >= everyone:
            t1 = event.time
            ratio = Fraction(0) if diams[t0] == 0 else diams[t1] / diams[t0]
            out.append((t0, t1, ratio))
            t0, seen = t1, set()
    return out


def estimate_shrinking(trace: Trace) -> ShrinkEstimate:
    found = epochs(trace)
    alpha = max((r for _, _, r in found), default=None)
    return ShrinkEstimate(found, alpha)


def epoch_alpha_bound(k: int, f: int, delta, d0) -> Fraction:
    delta, d0 = Fraction(delta), Fraction(d0)
    geometric = 1 - Fraction(1, 2 ** (k * (f + 1) + 2))
    if d0 == 0:
        return geometric
    return max(1 - delta / d0, geometric)


def check_epoch_bound(trace: Trace, k: int, f: int, delta) -> tuple[list[EpochBoundCheck], list[Violation]]:
    """Per-epoch check of diam(t1) <= alpha * diam(t0) for k-bounded runs."""
    n = trace.params.n
    if n <= 3 * f:
        raise InvalidPrecondition(f"epoch bound needs n > 3f, got n={n}, f={f}")
    delta = Fraction(delta)
    m = n - f
    diams = trace.diameters()
    checks, out = [], []
    for t0, t1, _ in epochs(trace):
        d0 = diams[t0]
        if d0 == 0:
            continue
        alpha = epoch_alpha_bound(k, f, delta, d0)
        u0 = _correct(trace, trace.positions_at(t0))
        # side with the larger half-gap, as in the shrinking argument
        low_side = (u0.at(m) - u0.at(f + 1)) >= (u0.at(m - f) - u0.at(1))
        if low_side:
            s_ext = max(_correct(trace, trace.positions_at(t)).at(f + 1) for t in range(t0, t1 + 1))
            witness = _correct(trace, trace.positions_at(t1)).slice(1, f + 1)
        else:
            s_ext = min(_correct(trace, trace.positions_at(t)).at(m - f) for t in range(t0, t1 + 1))
            witness = _correct(trace, trace.positions_at(t1)).slice(m - f, m)
        check = EpochBoundCheck(k, f, delta, d0, alpha, t0, t1, diams[t1], witness, s_ext)
        checks.append(check)
        if diams[t1] > alpha * d0:
            out.append(Violation("epoch-bound", t1,
                                 f"epoch [{t0}, {t1}] shrank less than alpha",
                                 (d0, diams[t1], alpha)))
    return checks, out


def check_limit_destinations(trace: Trace, s_ids: Iterable[int], t1: int, t2: int) -> list[Violation]:
    """Destinations computed at times t1..t2 stay <= (S_max + U_m(t1)) / 2.

    ``t1 == t2`` is allowed and checks a single cycle.
    """
    s_ids = set(s_ids)
    f = trace.params.f
    if len(s_ids) != f + 1 or not s_ids <= set(trace.correct_ids):
        raise InvalidPrecondition(f"S must be exactly f + 1 = {f + 1} correct ids")
    if not 0 <= t1 <= t2 <= len(trace.events):
        raise InvalidPrecondition(f"bad window [{t1}, {t2}] for a trace of {len(trace.events)} events")
    s_max = max(trace.positions_at(t)[i] for t in range(t1, t2 + 1) for i in s_ids)
    u_m = _correct(trace, trace.positions_at(t1)).max()
    bound = (s_max + u_m) / 2
    out = []
    for event in trace.events[t1:t2 + 1]:
        for rid, dest in sorted(event.destinations.items()):
            if dest > bound:
                out.append(Violation("limit-destinations", event.time - 1,
                                     f"robot {rid} destination above (S_max + U_m(t1))/2",
                                     (dest, s_max, u_m)))
    return out


def convergence_time(trace: Trace, epsilon) -> ConvergenceReport:
    epsilon = Fraction(epsilon)
    if epsilon <= 0:
        raise InvalidPrecondition("epsilon must be > 0")
    diams = trace.diameters()
    t_eps = next((t for t, d in enumerate(diams) if d < epsilon), None)
    return ConvergenceReport(epsilon, t_eps, diams[-1])


# -- schedules -------------------------------------------------------------

def verify_k_bounded(activation_log: Sequence[Iterable[int]], k: int) -> list[Violation]:
    """Between two consecutive activations of any robot, no other robot runs more than k times."""
    log = [frozenset(s) for s in activation_log]
    when: dict[int, list[int]] = {}
    for t, active in enumerate(log):
        for rid in active:
            when.setdefault(rid, []).append(t)
    out = []
    for a, times in sorted(when.items()):
        for i, j in zip(times, times[1:]):
            counts: dict[int, int] = {}
            for t in range(i + 1, j):
                for b in log[t]:
                    counts[b] = counts.get(b, 0) + 1
            for b, c in sorted(counts.items()):
                if c > k:
                    out.append(Violation("k-bounded", j,
                                         f"robot {b} ran {c} times between activations of {a} at {i} and {j}",
                                         (Fraction(c), Fraction(k))))
    return out


def verify_fair(activation_log: Sequence[Iterable[int]], window: int,
                ids: Optional[Iterable[int]] = None) -> list[Violation]:
    """Every robot appears in every length-``window`` slice of the log.

    ``ids`` defaults to every robot seen in the log; pass the correct ids to
    catch robots that never run at all. A log shorter than the window is
    checked as a single slice.
    """
    if window < 1:
        raise InvalidPrecondition("window must be >= 1")
    log = [frozenset(s) for s in activation_log]
    everyone = set(ids) if ids is not None else set().union(*log) if log else set()
    if not log or len(everyone) <= 1:
        return []
    width = min(window, len(log))
    out = []
    reported: set[int] = set()
    for start in range(len(log) - width + 1):
        seen = set().union(*log[start:start + width])
        for rid in sorted(everyone - seen - reported):
            out.append(Violation("fair", start, f"robot {rid} idle for {width} cycles from {start}",
                                 (Fraction(rid),)))
            reported.add(rid)
    return out


# -- single-snapshot lemmas ------------------------------------------------

def check_snapshot_lemmas(correct: PointMultiset, byzantine: PointMultiset, f: int) -> list[Violation]:
    """Containment, nesting and destination bounds for one observed snapshot.

    Containment needs m > f (n > 2f); the other two need n > 3f and are
    skipped otherwise.
    """
    m = len(correct)
    n = m + len(byzantine)
    out = []
    p = correct.union(byzantine)
    tp = trim_f(p, f)
    if tp.min() < correct.min() or tp.max() > correct.max():
        out.append(Violation("range-trim", 0, "range(trim_f(P)) not inside range(U)",
                             (tp.min(), tp.max(), correct.min(), correct.max())))
    if n > 3 * f:
        tu = trim_f(correct, f)
        if tu.min() < tp.min() or tu.max() > tp.max():
            out.append(Violation("inside-range", 0, "range(trim_f(U)) not inside range(trim_f(P))",
                                 (tu.min(), tu.max(), tp.min(), tp.max())))
        dest = compute_destination(p, f)
        upper = (correct.at(f + 1) + correct.at(m)) / 2
        lower = (correct.at(1) + correct.at(m - f)) / 2
        if dest > upper:
            out.append(Violation("destination-mid", 0, "destination above (U_{f+1} + U_m)/2", (dest, upper)))
        if dest < lower:
            out.append(Violation("destination-mid", 0, "destination below (U_1 + U_{m-f})/2", (dest, lower)))
    return out


def check_order_statistics(correct: PointMultiset, f: int) -> list[Violation]:
    """Enumerate every (f+1)-element sub-multiset S of U and check
    U_{f+1} <= max(S) and U_{m-f} >= min(S)."""
    m = len(correct)
    if m < f + 1:
        raise InvalidPrecondition("need at least f + 1 correct positions")
    lo_stat, hi_stat = correct.at(f + 1), correct.at(m - f)
    out = []
    for combo in itertools.combinations(correct.elements, f + 1):
        if lo_stat > max(combo):
            out.append(Violation("uf-less-st", 0, "U_{f+1} > max(S)", (lo_stat, max(combo))))
        if hi_stat < min(combo):
            out.append(Violation("uf-less-st", 0, "U_{m-f} < min(S)", (hi_stat, min(combo))))
    return out
