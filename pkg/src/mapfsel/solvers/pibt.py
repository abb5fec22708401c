"""Priority Inheritance with Backtracking.

All agents advance one step per tick.  Agents away from their goal gain
priority every tick; an agent sitting on its goal drops back to its initial
fractional priority.  Candidate moves are ordered by distance-to-goal with
seeded random tie-breaking, and a blocked higher-priority agent pushes the
occupant of its desired cell recursively (inheritance), backtracking when the
occupant cannot move.
"""

from __future__ import annotations

import numpy as np

from ..grid import Cell, Scenario, distance_to
from .base import Budget, BudgetExhausted, SolveResult, Solution, Status


def solve_pibt(scenario: Scenario, budget: Budget, seed: int = 0,
               max_ticks: int | None = None) -> SolveResult:
    grid = scenario.grid
    n = scenario.agent_count
    goals = scenario.goals
    dists = [distance_to(grid, g).dist for g in goals]
    rng = np.random.default_rng(seed)
    max_ticks = 4 * grid.height * grid.width if max_ticks is None else max_ticks

    base = rng.random(n) * 0.5
    priority = [float(dists[i][s]) / grid.num_passable + base[i]
                for i, s in enumerate(scenario.starts)]
    configs: list[list[Cell]] = [list(scenario.starts)]

    def push(i: int, cur: list[Cell], nxt: list[Cell | None], now: dict[Cell, int],
             taken: dict[Cell, int]) -> bool:
        budget.tick()
        here = cur[i]
        cands = [here, *grid.neighbors(here)]
        rng.shuffle(cands)
        cands.sort(key=lambda c: dists[i][c])
        for v in cands:
            if v in taken:
                continue
            j = now.get(v)
            if j is not None and j != i and nxt[j] == here:
                continue  # swap
            nxt[i] = v
            taken[v] = i
            if j is not None and j != i and nxt[j] is None and not push(j, cur, nxt, now, taken):
                continue
            return True
        nxt[i] = here
        taken[here] = i
        return False

    try:
        for _ in range(max_ticks):
            cur = configs[-1]
            if cur == goals:
                break
            now = {c: i for i, c in enumerate(cur)}
            nxt: list[Cell | None] = [None] * n
            taken: dict[Cell, int] = {}
            for i in sorted(range(n), key=lambda k: -priority[k]):
                if nxt[i] is None:
                    push(i, cur, nxt, now, taken)
            configs.append(nxt)  # type: ignore[arg-type]
            for i in range(n):
                priority[i] = base[i] if nxt[i] == goals[i] else priority[i] + 1.0
        else:
            if configs[-1] != goals:
                return SolveResult(Status.FAILURE, expansions=budget.used,
                                   detail=f"step cap {max_ticks} reached")
    except BudgetExhausted:
        return SolveResult(Status.TIMEOUT, expansions=budget.used)
    paths = [[cfg[i] for cfg in configs] for i in range(n)]
    return SolveResult(Status.SOLVED, Solution.from_paths(paths), budget.used)
