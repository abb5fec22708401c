from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..grid import Cell


@dataclass(frozen=True)
class Conflict:
    kind: str  # "vertex" | "edge"
    a: int
    b: int
    t: int
    cell: Cell
    # edge conflicts: agent a moves cell -> other, agent b moves other -> cell
    other: Cell | None = None


def position(path: Sequence[Cell], t: int) -> Cell:
    """Agents that have finished stay on their last cell."""
    return path[t] if t < len(path) else path[-1]


def find_conflicts(paths: Sequence[Sequence[Cell]], first_only: bool = False) -> list[Conflict]:
    """Vertex and swap conflicts ordered by time, vertex before edge, then agent index."""
    out: list[Conflict] = []
    horizon = max((len(p) for p in paths), default=0)
    for t in range(horizon):
        occupied: dict[Cell, int] = {}
        for i, p in enumerate(paths):
            c = position(p, t)
            j = occupied.get(c)
            if j is None:
                occupied[c] = i
            else:
                out.append(Conflict("vertex", j, i, t, c))
                if first_only:
                    return out
        if t == 0:
            continue
        moving: dict[tuple[Cell, Cell], int] = {}
        for i, p in enumerate(paths):
            u, v = position(p, t - 1), position(p, t)
            if u == v:
                continue
            j = moving.get((v, u))
            if j is not None:
                out.append(Conflict("edge", j, i, t, v, u))
                if first_only:
                    return out
            moving[(u, v)] = i
    return out


def count_conflicting_pairs(paths: Sequence[Sequence[Cell]]) -> int:
    return len({(c.a, c.b) for c in find_conflicts(paths)})
