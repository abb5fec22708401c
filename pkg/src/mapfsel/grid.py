"""Benchmark map / scenario parsing and grid geometry.

Maps and scenarios follow the MovingAI benchmark layout.  Cells are addressed
as ``(row, col)``; the scenario files store ``col`` before ``row``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

Cell = tuple[int, int]

PASSABLE_CHARS = frozenset(".GS")
BLOCKED_CHARS = frozenset("@OTW")
UNREACHABLE = -1

# up, left, down, right; shared tie order for every search in the package
MOVES: tuple[Cell, ...] = ((-1, 0), (0, -1), (1, 0), (0, 1))


class MapParseError(ValueError):
    """Malformed map text.  ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ScenarioError(ValueError):
    """Scenario rejected at load time; ``agent`` is the offending agent index if any."""

    def __init__(self, message: str, agent: int | None = None):
        prefix = f"agent {agent}: " if agent is not None else ""
        super().__init__(prefix + message)
        self.agent = agent


class Grid:
    """Immutable 4-connected grid with a boolean obstacle mask of shape (height, width)."""

    __slots__ = ("width", "height", "blocked", "_hash")

    def __init__(self, blocked: np.ndarray | Sequence[Sequence[bool]]):
        mask = np.array(blocked, dtype=bool)
        if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
            raise ValueError("grid needs at least one row and one column")
        mask.setflags(write=False)
        self.height, self.width = int(mask.shape[0]), int(mask.shape[1])
        self.blocked = mask
        self._hash = hash((self.height, self.width, mask.tobytes()))

    @classmethod
    def open(cls, height: int, width: int) -> "Grid":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def from_rows(cls, rows: Iterable[str]) -> "Grid":
        """Build from body rows like ``["..@", "..."]`` (no header)."""
        return parse_map_body(list(rows))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.blocked, other.blocked))

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Grid({self.height}x{self.width}, obstacles={int(self.blocked.sum())})"

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def passable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and not self.blocked[cell]

    def neighbors(self, cell: Cell) -> Iterator[Cell]:
        """Passable 4-neighbours in (up, left, down, right) order."""
        r, c = cell
        for dr, dc in MOVES:
            nr, nc = r + dr, c + dc
            if 0 <= nr < self.height and 0 <= nc < self.width and not self.blocked[nr, nc]:
                yield (nr, nc)

    @property
    def num_passable(self) -> int:
        return int(self.height * self.width - self.blocked.sum())


@dataclass(frozen=True)
class Agent:
    start: Cell
    goal: Cell


@dataclass(frozen=True)
class Scenario:
    grid: Grid
    agents: tuple[Agent, ...]
    map_name: str = ""
    scenario_id: str = ""

    @property
    def agent_count(self) -> int:
        return len(self.agents)

    @property
    def starts(self) -> list[Cell]:
        return [a.start for a in self.agents]

    @property
    def goals(self) -> list[Cell]:
        return [a.goal for a in self.agents]

    def prefix(self, n: int) -> "Scenario":
        return Scenario(self.grid, self.agents[:n], self.map_name, self.scenario_id)


@dataclass(frozen=True)
class DistanceField:
    """BFS move counts from ``source``; ``UNREACHABLE`` (-1) marks disconnected or blocked cells."""

    source: Cell
    dist: np.ndarray

    def __getitem__(self, cell: Cell) -> int:
        return int(self.dist[cell])

    def reachable(self, cell: Cell) -> bool:
        return self.dist[cell] != UNREACHABLE


# ---------------------------------------------------------------------------
# maps


def parse_map(text: str) -> Grid:
    """Parse a MovingAI ``.map`` file body (header + rows)."""
    lines = text.splitlines()
    header: dict[str, str] = {}
    expected = ("type", "height", "width", "map")
    for i, key in enumerate(expected):
        if i >= len(lines):
            raise MapParseError(i + 1, f"missing '{key}' header line")
        parts = lines[i].split()
        if not parts or parts[0].lower() != key:
            raise MapParseError(i + 1, f"expected '{key}' header, got {lines[i]!r}")
        if key == "map":
            if len(parts) != 1:
                raise MapParseError(i + 1, "'map' line takes no value")
        elif len(parts) != 2:
            raise MapParseError(i + 1, f"'{key}' header needs exactly one value")
        else:
            header[key] = parts[1]
    try:
        height = int(header["height"])
    except ValueError:
        raise MapParseError(2, f"height is not an integer: {header['height']!r}") from None
    try:
        width = int(header["width"])
    except ValueError:
        raise MapParseError(3, f"width is not an integer: {header['width']!r}") from None
    if height < 1:
        raise MapParseError(2, "height must be >= 1")
    if width < 1:
        raise MapParseError(3, "width must be >= 1")

    body = lines[4:]
    # tolerate trailing blank lines only
    while len(body) > height and not body[-1].strip():
        body.pop()
    if len(body) != height:
        raise MapParseError(4 + min(len(body), height) + 1,
                            f"expected {height} grid rows, found {len(body)}")
    return parse_map_body(body, width=width, first_line=5)


def parse_map_body(rows: list[str], width: int | None = None, first_line: int = 1) -> Grid:
    if not rows:
        raise MapParseError(first_line, "empty map body")
    width = len(rows[0]) if width is None else width
    mask = np.zeros((len(rows), width), dtype=bool)
    for r, row in enumerate(rows):
        lineno = first_line + r
        if len(row) != width:
            raise MapParseError(lineno, f"row length {len(row)} != width {width}")
        for c, ch in enumerate(row):
            if ch in BLOCKED_CHARS:
                mask[r, c] = True
            elif ch not in PASSABLE_CHARS:
                raise MapParseError(lineno, f"unknown character {ch!r} at column {c}")
    return Grid(mask)


def serialize_map(grid: Grid) -> str:
    rows = ["".join("@" if b else "." for b in row) for row in grid.blocked]
    header = f"type octile\nheight {grid.height}\nwidth {grid.width}\nmap\n"
    return header + "\n".join(rows) + "\n"


def load_map(path: str | Path) -> Grid:
    path = Path(path)
    try:
        return parse_map(path.read_text())
    except MapParseError as exc:
        raise MapParseError(exc.line, f"{path}: {exc.message}") from None


# ---------------------------------------------------------------------------
# distances


def bfs_distance(grid: Grid, source: Cell) -> DistanceField:
    if not grid.passable(source):
        raise ValueError(f"BFS source {source} is blocked or out of bounds")
    dist = np.full(grid.shape, UNREACHABLE, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        cell = queue.popleft()
        d = dist[cell] + 1
        for nb in grid.neighbors(cell):
            if dist[nb] == UNREACHABLE:
                dist[nb] = d
                queue.append(nb)
    dist.setflags(write=False)
    return DistanceField(source, dist)


# ---------------------------------------------------------------------------
# scenarios


def _scenario_rows(text: str) -> list[tuple[int, list[str]]]:
    lines = text.splitlines()
    if not lines or not lines[0].strip().lower().startswith("version"):
        raise ScenarioError("scenario file must start with a 'version' line")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t") if "\t" in line else line.split()
        rows.append((lineno, fields))
    return rows


def parse_scenario(text: str, grid: Grid, n: int, map_name: str = "",
                   scenario_id: str = "") -> Scenario:
    """Take the first ``n`` agents of a ``.scen`` file and validate them against ``grid``."""
    if n < 1:
        raise ScenarioError("agent count must be >= 1")
    rows = _scenario_rows(text)
    if len(rows) < n:
        raise ScenarioError(f"insufficient agents: file has {len(rows)}, requested {n}")
    agents = []
    for i, (lineno, fields) in enumerate(rows[:n]):
        if len(fields) < 8:
            raise ScenarioError(f"line {lineno}: expected 9 fields, got {len(fields)}", agent=i)
        try:
            sc, sr, gc, gr = (int(f) for f in fields[4:8])
        except ValueError:
            raise ScenarioError(f"line {lineno}: non-integer coordinate", agent=i) from None
        if not map_name:
            map_name = Path(fields[1]).stem
        agents.append(Agent((sr, sc), (gr, gc)))
    scenario = Scenario(grid, tuple(agents), map_name, scenario_id)
    validate_scenario(scenario)
    return scenario


def validate_scenario(scenario: Scenario) -> None:
    grid = scenario.grid
    seen_starts: dict[Cell, int] = {}
    seen_goals: dict[Cell, int] = {}
    for i, agent in enumerate(scenario.agents):
        for what, cell in (("start", agent.start), ("goal", agent.goal)):
            if not grid.in_bounds(cell):
                raise ScenarioError(f"{what} {cell} out of bounds", agent=i)
            if grid.blocked[cell]:
                raise ScenarioError(f"{what} {cell} on obstacle", agent=i)
        if agent.start in seen_starts:
            raise ScenarioError(f"duplicate start {agent.start} (agent {seen_starts[agent.start]})", agent=i)
        if agent.goal in seen_goals:
            raise ScenarioError(f"duplicate goal {agent.goal} (agent {seen_goals[agent.goal]})", agent=i)
        seen_starts[agent.start] = i
        seen_goals[agent.goal] = i
        if not distance_to(grid, agent.goal).reachable(agent.start):
            raise ScenarioError(f"goal {agent.goal} unreachable from {agent.start}", agent=i)


def scenario_row_count(text: str) -> int:
    return len(_scenario_rows(text))


def load_scenario(path: str | Path, grid: Grid, n: int, map_name: str = "") -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), grid, n, map_name=map_name, scenario_id=path.stem)


def serialize_scenario(scenario: Scenario, map_file: str | None = None) -> str:
    grid = scenario.grid
    map_file = map_file or f"{scenario.map_name}.map"
    lines = ["version 1"]
    for agent in scenario.agents:
        d = bfs_distance(grid, agent.start)[agent.goal]
        (sr, sc), (gr, gc) = agent.start, agent.goal
        lines.append("\t".join(str(x) for x in (
            0, map_file, grid.width, grid.height, sc, sr, gc, gr, f"{float(d):.8f}")))
    return "\n".join(lines) + "\n"


def random_scenario(grid: Grid, n: int, rng: np.random.Generator, map_name: str = "",
                    scenario_id: str = "") -> Scenario:
    """Sample ``n`` agents with distinct starts/goals inside one connected component.

    Raises ``ScenarioError`` when the grid cannot host ``n`` agents.
    """
    free = [tuple(int(x) for x in rc) for rc in np.argwhere(~grid.blocked)]
    if len(free) < n:
        raise ScenarioError(f"grid has only {len(free)} free cells for {n} agents")
    # largest connected component keeps every pair reachable
    comp = _largest_component(grid, free)
    if len(comp) < n:
        raise ScenarioError(f"largest component has {len(comp)} cells for {n} agents")
    starts = rng.permutation(len(comp))[:n]
    goals = rng.permutation(len(comp))[:n]
    agents = tuple(Agent(comp[s], comp[g]) for s, g in zip(starts, goals))
    return Scenario(grid, agents, map_name, scenario_id)


def _largest_component(grid: Grid, free: list[Cell]) -> list[Cell]:
    label = np.full(grid.shape, -1, dtype=np.int64)
    best: list[Cell] = []
    for cell in free:
        if label[cell] != -1:
            continue
        d = bfs_distance(grid, cell).dist
        members = [c for c in free if d[c] != UNREACHABLE]
        for c in members:
            label[c] = 0
        if len(members) > len(best):
            best = members
    return best


@lru_cache(maxsize=8192)
def distance_to(grid: Grid, goal: Cell) -> DistanceField:
    """Memoised ``bfs_distance``; the grid is undirected so this doubles as distance-to-goal."""
    return bfs_distance(grid, goal)
