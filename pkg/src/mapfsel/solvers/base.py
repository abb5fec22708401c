from __future__ import annotations

import enum
import threading
import time
from dataclasses import dataclass, field
from typing import Sequence

from ..grid import Cell

SOLVER_KINDS = ("cbs", "ecbs", "pp", "pibt")


class BudgetExhausted(Exception):
    """Raised inside a solver when its budget runs out; never escapes ``solve``."""


class Budget:
    """Cooperative search budget.

    ``seconds`` is a wall-clock limit measured from construction; ``expansions``
    is a deterministic node-expansion cap.  Either or both may be set.  Setting
    ``cancel`` from another thread stops the search at its next tick.
    """

    CHECK_EVERY = 64

    def __init__(self, seconds: float | None = None, expansions: int | None = None,
                 cancel: threading.Event | None = None):
        if seconds is not None and seconds <= 0:
            raise ValueError("budget seconds must be > 0")
        if expansions is not None and expansions <= 0:
            raise ValueError("budget expansions must be > 0")
        self.seconds = seconds
        self.expansions = expansions
        self.cancel = cancel or threading.Event()
        self.used = 0
        self.started = time.perf_counter()
        self.deadline = None if seconds is None else self.started + seconds

    def tick(self, n: int = 1) -> None:
        self.used += n
        if self.expansions is not None and self.used > self.expansions:
            raise BudgetExhausted
        if self.used % self.CHECK_EVERY < n:
            self.check_clock()

    def check_clock(self) -> None:
        if self.cancel.is_set():
            raise BudgetExhausted
        if self.deadline is not None and time.perf_counter() > self.deadline:
            raise BudgetExhausted

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.started


def arrival_time(path: Sequence[Cell]) -> int:
    """Last timestep after which the agent never leaves its final cell."""
    t = len(path) - 1
    while t > 0 and path[t - 1] == path[-1]:
        t -= 1
    return t


@dataclass(frozen=True)
class Solution:
    paths: tuple[tuple[Cell, ...], ...]
    sum_of_costs: int

    @classmethod
    def from_paths(cls, paths: Sequence[Sequence[Cell]]) -> "Solution":
        frozen = tuple(tuple(tuple(c) for c in p) for p in paths)
        return cls(frozen, sum(arrival_time(p) for p in frozen))

    @property
    def makespan(self) -> int:
        return max((arrival_time(p) for p in self.paths), default=0)


class Status(enum.Enum):
    SOLVED = "solved"
    TIMEOUT = "timeout"
    FAILURE = "failure"


@dataclass
class SolveResult:
    status: Status
    solution: Solution | None = None
    expansions: int = 0
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.status is Status.SOLVED


@dataclass(frozen=True)
class SolverSpec:
    kind: str
    param: float | None = None
    id: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in SOLVER_KINDS:
            raise ValueError(f"unknown solver kind {self.kind!r}; expected one of {SOLVER_KINDS}")
        if self.kind == "ecbs":
            if self.param is None:
                raise ValueError("ecbs requires a suboptimality factor, e.g. 'ecbs:1.1'")
            if self.param < 1:
                raise ValueError(f"ecbs factor must be >= 1, got {self.param}")
        elif self.param is not None:
            raise ValueError(f"{self.kind} takes no parameter")
        if not self.id:
            ident = self.kind if self.param is None else f"{self.kind}:{self.param:g}"
            object.__setattr__(self, "id", ident)

    @classmethod
    def parse(cls, text: str) -> "SolverSpec":
        text = text.strip().lower()
        kind, sep, arg = text.partition(":")
        if not sep:
            return cls(kind)
        try:
            value = float(arg)
        except ValueError:
            raise ValueError(f"bad solver parameter in {text!r}") from None
        return cls(kind, value, id=text)

    def __str__(self) -> str:
        return self.id
