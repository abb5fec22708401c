"""Space-time search shared by CBS, ECBS and prioritized planning."""

from __future__ import annotations

import heapq
import itertools
from bisect import bisect_left, insort
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Sequence

from ..grid import Cell, Grid, distance_to
from .base import Budget

EPS = 1e-9


class FocalQueue:
    """Open list with a focal sub-list.

    Items are ordered by ``f`` for the lower bound ``f_min``; an item enters
    focal once its ``member`` value is at most ``w * f_min`` and focal pops by
    ``key``.  With ``w == 1`` and ``member == f`` this is best-first search with
    ``key`` as the tie-breaker.
    """

    def __init__(self, w: float = 1.0):
        self.w = w
        self._open: list[tuple[float, int]] = []
        self._pending: list[tuple[float, int]] = []
        self._focal: list[tuple[Any, int]] = []
        self._items: dict[int, tuple[float, float, Any, Any]] = {}
        self._in_focal: set[int] = set()
        self._seq = itertools.count()

    def __len__(self) -> int:
        return len(self._items)

    @property
    def f_min(self) -> float:
        return self._open[0][0]

    def push(self, item: Any, f: float, member: float, key: Any) -> int:
        seq = next(self._seq)
        self._items[seq] = (f, member, key, item)
        insort(self._open, (f, seq))
        if self._open and member <= self.w * self._open[0][0] + EPS:
            heapq.heappush(self._focal, (key, seq))
            self._in_focal.add(seq)
        else:
            insort(self._pending, (member, seq))
        return seq

    def discard(self, seq: int) -> None:
        entry = self._items.pop(seq, None)
        if entry is None:
            return
        f, member = entry[0], entry[1]
        del self._open[bisect_left(self._open, (f, seq))]
        if seq in self._in_focal:
            self._in_focal.discard(seq)  # heap entry dropped lazily
        else:
            del self._pending[bisect_left(self._pending, (member, seq))]

    def pop(self) -> tuple[Any, float]:
        """Return ``(item, f_min at pop time)``."""
        while True:
            bound = self.w * self._open[0][0] + EPS
            while self._pending and self._pending[0][0] <= bound:
                member, seq = self._pending.pop(0)
                heapq.heappush(self._focal, (self._items[seq][2], seq))
                self._in_focal.add(seq)
            if not self._focal:
                # cannot happen when member <= w * f for every item; keep the search alive anyway
                member, seq = self._pending.pop(0)
                heapq.heappush(self._focal, (self._items[seq][2], seq))
                self._in_focal.add(seq)
                bound = max(bound, member)
            key, seq = heapq.heappop(self._focal)
            if seq not in self._in_focal:
                continue
            f, member, _, item = self._items[seq]
            if member > bound:
                # f_min dropped since this entered focal
                self._in_focal.discard(seq)
                insort(self._pending, (member, seq))
                continue
            f_min = self._open[0][0]
            self._in_focal.discard(seq)
            del self._items[seq]
            del self._open[bisect_left(self._open, (f, seq))]
            return item, f_min


@dataclass
class ConstraintTable:
    """Forbidden vertices, moves and permanently reserved cells for one agent.

    ``edge`` holds ``(u, v, t)``: moving from ``u`` at ``t - 1`` to ``v`` at ``t``.
    ``permanent`` maps a cell to the first timestep from which it stays blocked.
    """

    vertex: set[tuple[Cell, int]] = field(default_factory=set)
    edge: set[tuple[Cell, Cell, int]] = field(default_factory=set)
    permanent: dict[Cell, int] = field(default_factory=dict)

    def add_vertex(self, cell: Cell, t: int) -> None:
        self.vertex.add((cell, t))

    def add_edge(self, u: Cell, v: Cell, t: int) -> None:
        self.edge.add((u, v, t))

    def vertex_blocked(self, cell: Cell, t: int) -> bool:
        if (cell, t) in self.vertex:
            return True
        t0 = self.permanent.get(cell)
        return t0 is not None and t >= t0

    def latest(self) -> int:
        times = [t for _, t in self.vertex] + [t for *_, t in self.edge] + list(self.permanent.values())
        return max(times, default=0)

    def earliest_goal(self, goal: Cell) -> int | None:
        """Earliest arrival after which the agent may wait at ``goal`` forever."""
        if goal in self.permanent:
            return None
        last = max((t for c, t in self.vertex if c == goal), default=-1)
        return last + 1


class ConflictAvoidance:
    """Counts conflicts a candidate move would have with other agents' paths."""

    def __init__(self, paths: Sequence[Sequence[Cell] | None]):
        self.at: Counter = Counter()
        self.moves: Counter = Counter()
        self.parked: dict[Cell, list[int]] = defaultdict(list)
        self.horizon = 0
        for path in paths:
            if not path:
                continue
            self.horizon = max(self.horizon, len(path))
            for t, cell in enumerate(path):
                self.at[(cell, t)] += 1
                if t:
                    self.moves[(path[t - 1], cell, t)] += 1
            self.parked[path[-1]].append(len(path))

    def count(self, prev: Cell, cell: Cell, t: int) -> int:
        n = self.at.get((cell, t), 0)
        if prev != cell:
            n += self.moves.get((cell, prev, t), 0)
        for t_end in self.parked.get(cell, ()):
            if t >= t_end:
                n += 1
        return n


@dataclass
class _Node:
    cell: Cell
    t: int
    conflicts: int
    parent: "_Node | None"


def plan_single(grid: Grid, start: Cell, goal: Cell, table: ConstraintTable, budget: Budget,
                w: float = 1.0, cat: ConflictAvoidance | None = None) -> tuple[list[Cell], float] | None:
    """Space-time (focal) A* minimising arrival time under ``table``.

    Returns ``(path, lower_bound)`` where the path ends at the arrival time and
    ``lower_bound`` is the open-list minimum f when the goal was selected
    (a lower bound on the optimal arrival time).  ``None`` if no path exists.
    """
    earliest = table.earliest_goal(goal)
    if earliest is None or table.vertex_blocked(start, 0):
        return None
    dist = distance_to(grid, goal).dist
    if dist[start] < 0:
        return None
    # past this time the search space is static, so time is collapsed
    static_after = max(table.latest(), cat.horizon if cat else 0) + 1

    def h(cell: Cell, t: int) -> int:
        return max(int(dist[cell]), earliest - t)

    queue = FocalQueue(w)
    root = _Node(start, 0, 0, None)
    f0 = h(start, 0)
    seq0 = queue.push(root, f0, f0, (0, f0, 0))
    # state -> (arrival time, conflicts, queue handle); time differs only for collapsed states
    best: dict[tuple[Cell, int], tuple[int, int, int]] = {(start, 0): (0, 0, seq0)}
    closed: dict[tuple[Cell, int], int] = {}

    while len(queue):
        node, f_min = queue.pop()
        state = (node.cell, min(node.t, static_after))
        if closed.get(state, 1 << 60) <= node.t:
            continue
        closed[state] = node.t
        budget.tick()
        if node.cell == goal and node.t >= earliest:
            path = []
            cur: _Node | None = node
            while cur is not None:
                path.append(cur.cell)
                cur = cur.parent
            return path[::-1], float(f_min)
        t = node.t + 1
        for nxt in itertools.chain((node.cell,), grid.neighbors(node.cell)):
            if table.vertex_blocked(nxt, t) or (node.cell, nxt, t) in table.edge:
                continue
            key_state = (nxt, min(t, static_after))
            if closed.get(key_state, 1 << 60) <= t:
                continue
            conflicts = node.conflicts + (cat.count(node.cell, nxt, t) if cat else 0)
            prev = best.get(key_state)
            if prev is not None:
                if (prev[0], prev[1]) <= (t, conflicts):
                    continue
                queue.discard(prev[2])
            hv = h(nxt, t)
            f = t + hv
            seq = queue.push(_Node(nxt, t, conflicts, node), f, f, (conflicts, f, hv))
            best[key_state] = (t, conflicts, seq)
    return None
