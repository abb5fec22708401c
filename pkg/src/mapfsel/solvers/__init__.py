"""Candidate MAPF solvers behind a single ``solve`` entry point."""

from __future__ import annotations

from ..grid import Scenario
from .base import Budget, BudgetExhausted, Solution, SolveResult, SolverSpec, Status, arrival_time
from .cbs import solve_cbs
from .external import ExternalResult, ExternalSolver
from .oracle import joint_state_optimal
from .pibt import solve_pibt
from .pp import solve_pp
from .validate import Violation, validate

__all__ = [
    "Budget", "BudgetExhausted", "ExternalResult", "ExternalSolver", "Solution", "SolveResult",
    "SolverSpec", "Status", "Violation", "arrival_time", "joint_state_optimal", "parse_portfolio",
    "solve", "validate",
]


def solve(spec: SolverSpec | str, scenario: Scenario, budget: Budget | float, seed: int = 0) -> SolveResult:
    """Run one solver.  A float ``budget`` means wall-clock seconds.

    TIMEOUT and FAILURE are returned, never raised.
    """
    if isinstance(spec, str):
        spec = SolverSpec.parse(spec)
    if not isinstance(budget, Budget):
        budget = Budget(seconds=float(budget))
    if spec.kind == "cbs":
        return solve_cbs(scenario, budget)
    if spec.kind == "ecbs":
        return solve_cbs(scenario, budget, w=float(spec.param))
    if spec.kind == "pp":
        return solve_pp(scenario, budget)
    return solve_pibt(scenario, budget, seed=seed)


def parse_portfolio(text: str | list[str]) -> list[SolverSpec]:
    items = text.split(",") if isinstance(text, str) else text
    specs = [SolverSpec.parse(s) for s in items if s.strip()]
    if not specs:
        raise ValueError("portfolio is empty")
    ids = [s.id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate solver ids in portfolio: {ids}")
    return specs
