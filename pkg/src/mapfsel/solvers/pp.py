"""Prioritized planning: agents in index order against a reservation table."""

from __future__ import annotations

from ..grid import Cell, Scenario
from .base import Budget, BudgetExhausted, SolveResult, Solution, Status
from .lowlevel import ConstraintTable, plan_single


def solve_pp(scenario: Scenario, budget: Budget) -> SolveResult:
    grid = scenario.grid
    table = ConstraintTable()
    paths: list[list[Cell]] = []
    try:
        for i, agent in enumerate(scenario.agents):
            found = plan_single(grid, agent.start, agent.goal, table, budget)
            if found is None:
                return SolveResult(Status.FAILURE, expansions=budget.used,
                                   detail=f"agent {i} has no path around higher-priority agents")
            path = found[0]
            paths.append(path)
            for t, cell in enumerate(path):
                table.add_vertex(cell, t)
                if t:
                    # forbid the swap of this move
                    table.add_edge(cell, path[t - 1], t)
            table.permanent[path[-1]] = len(path) - 1
        return SolveResult(Status.SOLVED, Solution.from_paths(paths), budget.used)
    except BudgetExhausted:
        return SolveResult(Status.TIMEOUT, expansions=budget.used)
