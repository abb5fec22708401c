"""Brute-force joint-configuration A* used as a test oracle for CBS.

Each agent either moves (one of 5 actions) or, when on its goal, commits to
staying there forever.  A step costs one unit per uncommitted agent, so the
total cost of reaching "everyone committed" is exactly the sum of costs.
"""

from __future__ import annotations

import heapq
import itertools

from ..grid import Cell, Scenario, distance_to
from .base import Solution

MAX_AGENTS = 3
MAX_SIDE = 6
_COMMIT = None


def joint_state_optimal(scenario: Scenario, horizon: int | None = None) -> Solution | None:
    grid = scenario.grid
    n = scenario.agent_count
    if n > MAX_AGENTS or grid.height > MAX_SIDE or grid.width > MAX_SIDE:
        raise ValueError(f"oracle limited to {MAX_AGENTS} agents on {MAX_SIDE}x{MAX_SIDE} grids")
    goals = tuple(scenario.goals)
    dist = [distance_to(grid, g).dist for g in goals]
    start = (tuple(scenario.starts), (False,) * n)

    def h(state) -> int:
        pos, done = state
        return sum(0 if done[i] else int(dist[i][pos[i]]) for i in range(n))

    counter = itertools.count()
    frontier = [(h(start), next(counter), 0, 0, start)]
    best = {start: 0}
    parent: dict = {start: None}
    while frontier:
        _, _, g, depth, state = heapq.heappop(frontier)
        if best.get(state, 1 << 60) < g:
            continue
        pos, done = state
        if all(done):
            return _unwind(parent, state, n)
        if horizon is not None and depth >= horizon:
            continue
        options = []
        for i in range(n):
            if done[i]:
                options.append((_COMMIT,))
                continue
            acts: list[Cell | None] = [pos[i], *grid.neighbors(pos[i])]
            if pos[i] == goals[i]:
                acts.append(_COMMIT)
            options.append(tuple(acts))
        for choice in itertools.product(*options):
            new_pos = tuple(pos[i] if a is _COMMIT else a for i, a in enumerate(choice))
            if len(set(new_pos)) < n:
                continue
            if any(new_pos[i] == pos[j] and new_pos[j] == pos[i] and new_pos[i] != pos[i]
                   for i in range(n) for j in range(i + 1, n)):
                continue
            new_done = tuple(a is _COMMIT for a in choice)
            # an agent committing now pays nothing from this step on
            step = sum(1 for i in range(n) if not new_done[i])
            nxt = (new_pos, new_done)
            ng = g + step
            if ng < best.get(nxt, 1 << 60):
                best[nxt] = ng
                parent[nxt] = state
                heapq.heappush(frontier, (ng + h(nxt), next(counter), ng, depth + 1, nxt))
    return None


def _unwind(parent: dict, state, n: int) -> Solution:
    chain = []
    while state is not None:
        chain.append(state)
        state = parent[state]
    chain.reverse()
    # the final "commit" transitions do not move anyone
    configs = [s[0] for s in chain]
    while len(configs) > 1 and configs[-1] == configs[-2]:
        configs.pop()
    paths = [[cfg[i] for cfg in configs] for i in range(n)]
    return Solution.from_paths(paths)
