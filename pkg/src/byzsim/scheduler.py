"""Activation policies.

Each policy decides which correct robots run a full cycle at the next
time step. Policies keep internal state (cursor, counters, RNG), so use
one instance per run.
"""

from __future__ import annotations

import random
from typing import Iterable, Sequence

from .core import SchedulerContractViolation, SchedulerExhausted


class SchedulerPolicy:
    name = "abstract"

    def next_activation(self, history: Sequence[frozenset[int]],
                        correct_ids: Sequence[int]) -> frozenset[int]:
        raise NotImplementedError


class FullySync(SchedulerPolicy):
    name = "full-sync"

    def next_activation(self, history, correct_ids):
        if not correct_ids:
            raise SchedulerContractViolation("no correct robots to activate")
        return frozenset(correct_ids)

    def __repr__(self):
        return "FullySync()"


class RoundRobinFair(SchedulerPolicy):
    """Singletons in id order, one robot per cycle."""

    name = "round-robin"

    def next_activation(self, history, correct_ids):
        if not correct_ids:
            raise SchedulerContractViolation("no correct robots to activate")
        ids = sorted(correct_ids)
        return frozenset({ids[len(history) % len(ids)]})

    def __repr__(self):
        return "RoundRobinFair()"


class KBoundedRandom(SchedulerPolicy):
    """Random activation sets that never break k-boundedness.

    ``waiting[a][b]`` counts activations of ``b`` since ``a`` last ran
    (every robot is treated as having just run at the start). A draw is
    repaired by pulling in every robot ``a`` whose window would otherwise
    see some ``b`` exceed ``k``; activating ``a`` closes its window.
    Activating everyone is always legal, so repair terminates.
    """

    name = "k-bounded"

    def __init__(self, k: int, seed: int = 0, p: float = 0.5):
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        self.k = k
        self.seed = seed
        self.p = p
        self._rng = random.Random(seed)
        self._waiting: dict[int, dict[int, int]] = {}

    def __repr__(self):
        return f"KBoundedRandom(k={self.k}, seed={self.seed})"

    def _ensure(self, ids: Sequence[int]) -> None:
        for a in ids:
            row = self._waiting.setdefault(a, {})
            for b in ids:
                if b != a:
                    row.setdefault(b, 0)

    def next_activation(self, history, correct_ids):
        ids = sorted(correct_ids)
        if not ids:
            raise SchedulerContractViolation("no correct robots to activate")
        self._ensure(ids)
        chosen = {i for i in ids if self._rng.random() < self.p}
        if not chosen:
            chosen = {self._rng.choice(ids)}
        changed = True
        while changed:
            changed = False
            for a in ids:
                if a in chosen:
                    continue
                if any(self._waiting[a][b] + 1 > self.k for b in chosen):
                    chosen.add(a)
                    changed = True
        for a in ids:
            if a in chosen:
                for b in self._waiting[a]:
                    self._waiting[a][b] = 0
            else:
                for b in chosen:
                    self._waiting[a][b] += 1
        return frozenset(chosen)


class Scripted(SchedulerPolicy):
    """Replays a fixed list of activation sets; ``repeat`` loops it forever."""

    name = "scripted"

    def __init__(self, script: Iterable[Iterable[int]], repeat: bool = False):
        self.script = [frozenset(s) for s in script]
        self.repeat = repeat
        self._cursor = 0

    def __repr__(self):
        return f"Scripted(<{len(self.script)} sets>, repeat={self.repeat})"

    def next_activation(self, history, correct_ids):
        if self._cursor >= len(self.script):
            if not self.repeat or not self.script:
                raise SchedulerExhausted(f"script of {len(self.script)} sets exhausted")
            self._cursor = 0
        chosen = self.script[self._cursor]
        self._cursor += 1
        if not chosen or not chosen <= set(correct_ids):
            raise SchedulerContractViolation(f"scripted set {sorted(chosen)} is not a nonempty subset of correct ids")
        return chosen


def next_activation(policy: SchedulerPolicy, history, correct_ids) -> frozenset[int]:
    return policy.next_activation(history, correct_ids)


def make_scheduler(kind: str, *, k: int = 1, seed: int = 0, script=None) -> SchedulerPolicy:
    if kind == "full-sync":
        return FullySync()
    if kind == "round-robin":
        return RoundRobinFair()
    if kind == "k-bounded":
        return KBoundedRandom(k, seed)
    if kind == "scripted":
        if not script:
            raise ValueError("scripted scheduler needs a non-empty script")
        return Scripted(script)
    raise ValueError(f"unknown scheduler {kind!r}")
