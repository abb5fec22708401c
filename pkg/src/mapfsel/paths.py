"""Single-agent path combinatorics behind the heatmap feature channels.

Walk counts use the action set {up, down, left, right, wait}.  With
``L == dist`` waits never appear in a completed walk, so the count is the
number of shortest paths; ``L == dist + 1`` admits the 1-suboptimal paths
(a shortest path plus one wait, by grid parity).

Raw counts grow binomially on open maps.  The ``normalize`` code paths work
with per-timestep rescaled DP tables plus log scale factors and only ever
return occupancy probabilities, so they never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Cell, Grid, Scenario, distance_to

# heatmap channel ids (1-based feature numbering)
CH_CANONICAL = 4
CH_PAIR_SHORTEST = 5
CH_PAIR_SUBOPTIMAL = 6
CH_ALL_SHORTEST = 7


@dataclass(frozen=True)
class CanonicalPath:
    agent: int
    cells: tuple[Cell, ...]

    @property
    def length(self) -> int:
        return len(self.cells) - 1


@dataclass(frozen=True)
class WalkCounts:
    """``forward[t]``: walks of length t from start ending at each cell.
    ``backward[t]``: walks of length L - t from each cell ending at goal."""

    start: Cell
    goal: Cell
    L: int
    forward: np.ndarray
    backward: np.ndarray

    @property
    def total(self) -> float:
        return float(self.forward[self.L][self.goal])

    def through(self) -> np.ndarray:
        """Per (t, cell) count of length-L walks passing through the cell at time t."""
        return self.forward * self.backward


def _step(f: np.ndarray, free: np.ndarray) -> np.ndarray:
    g = f.copy()
    g[1:, :] += f[:-1, :]
    g[:-1, :] += f[1:, :]
    g[:, 1:] += f[:, :-1]
    g[:, :-1] += f[:, 1:]
    g *= free
    return g


def _forward_table(grid: Grid, source: Cell, L: int, rescale: bool) -> tuple[np.ndarray, np.ndarray]:
    free = (~grid.blocked).astype(np.float64)
    table = np.zeros((L + 1, *grid.shape), dtype=np.float64)
    logscale = np.zeros(L + 1, dtype=np.float64)
    table[0][source] = 1.0
    for t in range(1, L + 1):
        g = _step(table[t - 1], free)
        if rescale:
            s = g.sum()
            g /= s
            logscale[t] = logscale[t - 1] + np.log(s)
        table[t] = g
    return table, logscale


def walk_counts(grid: Grid, start: Cell, goal: Cell, L: int) -> WalkCounts:
    """Exact (double precision) walk-count tables for walks of length ``L``."""
    d = distance_to(grid, goal)
    if not d.reachable(start):
        raise ValueError(f"goal {goal} unreachable from {start}")
    if L < d[start]:
        raise ValueError(f"L={L} is shorter than the shortest path ({d[start]})")
    fwd, _ = _forward_table(grid, start, L, rescale=False)
    # the step operator is symmetric, so walks from c to goal of length k
    # equal walks from goal to c of length k
    from_goal, _ = _forward_table(grid, goal, L, rescale=False)
    bwd = from_goal[::-1].copy()
    return WalkCounts(start, goal, L, fwd, bwd)


def occupancy(grid: Grid, start: Cell, goal: Cell, extra: tuple[int, ...] = (0,),
              horizon: int | None = None, normalize: bool = True) -> np.ndarray:
    """Time-indexed occupancy of an agent's path ensemble.

    The ensemble is every walk of length ``dist + k`` for ``k`` in ``extra``.
    Returns an array of shape ``(horizon + 1, H, W)``; entries past an
    ensemble's length are zero (no occupancy after the walk ends).  With
    ``normalize`` each walk carries weight 1/|ensemble|, otherwise 1.
    """
    dist = distance_to(grid, goal)[start]
    if dist < 0:
        raise ValueError(f"goal {goal} unreachable from {start}")
    lengths = [dist + k for k in extra]
    L_max = max(lengths)
    horizon = L_max if horizon is None else horizon
    out = np.zeros((horizon + 1, *grid.shape), dtype=np.float64)

    if not normalize:
        for L in lengths:
            wc = walk_counts(grid, start, goal, L)
            out[: L + 1] += wc.through()
        return out

    fwd, lf = _forward_table(grid, start, L_max, rescale=True)
    rev, lr = _forward_table(grid, goal, L_max, rescale=True)
    per_length = []
    log_totals = []
    for L in lengths:
        prod = fwd[: L + 1] * rev[L::-1]
        sums = prod.sum(axis=(1, 2))
        # every t carries the same true total; t = 0 gives it directly
        log_totals.append(np.log(sums[0]) + lf[0] + lr[L])
        per_length.append(prod / sums[:, None, None])
    log_totals = np.array(log_totals)
    weights = np.exp(log_totals - log_totals.max())
    weights /= weights.sum()
    for L, w, q in zip(lengths, weights, per_length):
        out[: L + 1] += w * q
    return out


def canonical_path(grid: Grid, start: Cell, goal: Cell, agent: int = 0) -> CanonicalPath:
    """Greedy descent on distance-to-goal, ties broken by (up, left, down, right)."""
    d = distance_to(grid, goal)
    if not d.reachable(start):
        raise ValueError(f"goal {goal} unreachable from {start}")
    cells = [start]
    cur = start
    while cur != goal:
        want = d[cur] - 1
        cur = next(nb for nb in grid.neighbors(cur) if d[nb] == want)
        cells.append(cur)
    return CanonicalPath(agent, tuple(cells))


def heatmap_canonical_visits(scenario: Scenario) -> np.ndarray:
    grid = scenario.grid
    value = np.zeros(grid.shape, dtype=np.float64)
    for i, agent in enumerate(scenario.agents):
        for cell in canonical_path(grid, agent.start, agent.goal, i).cells:
            value[cell] += 1.0
    return value


def heatmap_pairwise_conflicts(scenario: Scenario, include_suboptimal: bool = False,
                               normalize: bool = True) -> np.ndarray:
    """Expected vertex conflicts per cell summed over unordered agent pairs.

    Uses sum_{i<j} a_i a_j = ((sum a)^2 - sum a^2) / 2 per (t, cell), so the
    cost is linear in the agent count.
    """
    grid = scenario.grid
    value = np.zeros(grid.shape, dtype=np.float64)
    if scenario.agent_count < 2:
        return value
    extra = (0, 1) if include_suboptimal else (0,)
    dists = [distance_to(grid, a.goal)[a.start] for a in scenario.agents]
    horizon = max(dists) + max(extra)
    s1 = np.zeros((horizon + 1, *grid.shape), dtype=np.float64)
    s2 = np.zeros_like(s1)
    for agent in scenario.agents:
        occ = occupancy(grid, agent.start, agent.goal, extra, horizon, normalize)
        s1 += occ
        s2 += occ * occ
    value = 0.5 * (s1 * s1 - s2).sum(axis=0)
    np.maximum(value, 0.0, out=value)
    value[grid.blocked] = 0.0
    return value


def heatmap_all_shortest_visits(scenario: Scenario, normalize: bool = True) -> np.ndarray:
    grid = scenario.grid
    value = np.zeros(grid.shape, dtype=np.float64)
    for agent in scenario.agents:
        value += occupancy(grid, agent.start, agent.goal, (0,), None, normalize).sum(axis=0)
    return value
