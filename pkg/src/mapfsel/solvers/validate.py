from __future__ import annotations

from dataclasses import dataclass

from ..grid import Scenario
from .base import Solution, arrival_time
from .conflicts import find_conflicts


@dataclass(frozen=True)
class Violation:
    kind: str
    agents: tuple[int, ...]
    t: int | None
    detail: str

    def __str__(self) -> str:
        who = ",".join(map(str, self.agents))
        when = "" if self.t is None else f" t={self.t}"
        return f"{self.kind} [agents {who}]{when}: {self.detail}"


def validate(solution: Solution, scenario: Scenario) -> list[Violation]:
    """All violations of the solution contract; an empty list means OK."""
    grid = scenario.grid
    out: list[Violation] = []
    if len(solution.paths) != scenario.agent_count:
        return [Violation("agent-count", (), None,
                          f"{len(solution.paths)} paths for {scenario.agent_count} agents")]
    for i, (path, agent) in enumerate(zip(solution.paths, scenario.agents)):
        if not path:
            out.append(Violation("empty-path", (i,), None, "path has no cells"))
            continue
        if path[0] != agent.start:
            out.append(Violation("start", (i,), 0, f"starts at {path[0]}, expected {agent.start}"))
        if path[-1] != agent.goal:
            out.append(Violation("goal", (i,), len(path) - 1, f"ends at {path[-1]}, expected {agent.goal}"))
        for t, cell in enumerate(path):
            if not grid.passable(cell):
                out.append(Violation("obstacle", (i,), t, f"cell {cell} is blocked or off-grid"))
            if t and abs(cell[0] - path[t - 1][0]) + abs(cell[1] - path[t - 1][1]) > 1:
                out.append(Violation("jump", (i,), t, f"{path[t - 1]} -> {cell} is not a 4-move"))
    paths = [p for p in solution.paths if p]
    if len(paths) == len(solution.paths):
        for c in find_conflicts(paths):
            if c.kind == "vertex":
                out.append(Violation("vertex-conflict", (c.a, c.b), c.t, f"both at {c.cell}"))
            else:
                out.append(Violation("edge-conflict", (c.a, c.b), c.t, f"swap {c.cell} <-> {c.other}"))
    soc = sum(arrival_time(p) for p in paths)
    if not out and soc != solution.sum_of_costs:
        out.append(Violation("cost", (), None, f"reported {solution.sum_of_costs}, recomputed {soc}"))
    return out
