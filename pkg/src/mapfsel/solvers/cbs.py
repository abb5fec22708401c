"""Conflict-Based Search and its bounded-suboptimal focal variant (ECBS).

Both share one high level.  CBS is the special case ``w == 1``: the focal
lists collapse to best-first order with "fewer conflicts, then FIFO" tie
breaking.  For ``w > 1`` the low level is focal A* (each path within ``w`` of
its own lower bound) and the high level expands, among nodes whose cost is at
most ``w`` times the smallest lower bound in OPEN, the one with the fewest
conflicting agent pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..grid import Cell, Scenario
from .base import Budget, BudgetExhausted, SolveResult, Solution, Status, arrival_time
from .conflicts import count_conflicting_pairs, find_conflicts
from .lowlevel import ConflictAvoidance, ConstraintTable, FocalQueue, plan_single


@dataclass
class _Constraint:
    agent: int
    cell: Cell
    t: int
    frm: Cell | None = None  # set for edge constraints: forbid frm -> cell at t


@dataclass
class _HLNode:
    paths: list[list[Cell]]
    lbs: list[float]
    constraint: _Constraint | None
    parent: "_HLNode | None"
    conflicts: int = 0

    @property
    def cost(self) -> int:
        return sum(arrival_time(p) for p in self.paths)

    @property
    def lb(self) -> float:
        return sum(self.lbs)

    def table_for(self, agent: int) -> ConstraintTable:
        table = ConstraintTable()
        node: _HLNode | None = self
        while node is not None:
            c = node.constraint
            if c is not None and c.agent == agent:
                if c.frm is None:
                    table.add_vertex(c.cell, c.t)
                else:
                    table.add_edge(c.frm, c.cell, c.t)
            node = node.parent
        return table


def solve_cbs(scenario: Scenario, budget: Budget, w: float = 1.0) -> SolveResult:
    grid = scenario.grid
    n = scenario.agent_count
    try:
        paths: list[list[Cell]] = []
        lbs: list[float] = []
        for i, agent in enumerate(scenario.agents):
            found = plan_single(grid, agent.start, agent.goal, ConstraintTable(), budget, w,
                                ConflictAvoidance(paths))
            if found is None:
                return SolveResult(Status.FAILURE, expansions=budget.used, detail=f"agent {i} has no path")
            paths.append(found[0])
            lbs.append(found[1])
        root = _HLNode(paths, lbs, None, None)
        root.conflicts = count_conflicting_pairs(root.paths)

        open_ = FocalQueue(w)
        open_.push(root, root.lb, root.cost, (root.conflicts, root.cost))
        while len(open_):
            node, _ = open_.pop()
            budget.tick()
            first = find_conflicts(node.paths, first_only=True)
            if not first:
                return SolveResult(Status.SOLVED, Solution.from_paths(node.paths), budget.used)
            c = first[0]
            if c.kind == "vertex":
                branches = [_Constraint(c.a, c.cell, c.t), _Constraint(c.b, c.cell, c.t)]
            else:
                # a moved c.cell -> c.other, b moved c.other -> c.cell
                branches = [_Constraint(c.a, c.other, c.t, frm=c.cell),
                            _Constraint(c.b, c.cell, c.t, frm=c.other)]
            for con in branches:
                child = _HLNode(list(node.paths), list(node.lbs), con, node)
                i = con.agent
                others = node.paths[:i] + node.paths[i + 1:]
                found = plan_single(grid, scenario.agents[i].start, scenario.agents[i].goal,
                                    child.table_for(i), budget, w, ConflictAvoidance(others))
                if found is None:
                    continue
                child.paths[i], child.lbs[i] = found
                child.conflicts = count_conflicting_pairs(child.paths)
                open_.push(child, child.lb, child.cost, (child.conflicts, child.cost))
        return SolveResult(Status.FAILURE, expansions=budget.used,
                           detail=f"constraint tree exhausted ({n} agents)")
    except BudgetExhausted:
        return SolveResult(Status.TIMEOUT, expansions=budget.used)
