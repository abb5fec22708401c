"""Dataset construction: run the portfolio over agent-count sweeps and log RunRecords."""

from __future__ import annotations

import csv
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator

from .grid import Grid, Scenario, ScenarioError, load_map, parse_scenario, scenario_row_count
from .solvers import Budget, SolveResult, SolverSpec, solve, validate

log = logging.getLogger(__name__)

CSV_HEADER = ["map", "scenario", "agents", "solver", "time_s", "cost", "success", "seed"]
SolveFn = Callable[[SolverSpec, Scenario, Budget, int], SolveResult]


@dataclass
class RunRecord:
    map_name: str
    scenario_id: str
    agent_count: int
    solver_id: str
    time: float
    cost: int | None
    success: bool
    seed: int
    expansions: int = 0
    note: str = ""

    @property
    def key(self) -> tuple[str, str, int, str]:
        return (self.map_name, self.scenario_id, self.agent_count, self.solver_id)

    @property
    def instance(self) -> tuple[str, str, int]:
        return (self.map_name, self.scenario_id, self.agent_count)

    def to_json(self) -> str:
        return json.dumps(asdict(self), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


@dataclass
class MapEntry:
    name: str
    grid: Grid
    scenario_files: list[Path]


@dataclass
class SweepPlan:
    maps: list[MapEntry]
    time_limit: float = 120.0
    agent_start: int = 10
    agent_step: int = 10
    stop_count: int = 2
    seed: int = 0
    # "wall" (seconds) or "expansions" (deterministic node budget)
    budget_mode: str = "wall"
    expansion_budget: int = 200_000
    max_agents: int | None = None

    def __post_init__(self):
        if self.agent_step < 1 or self.agent_start < 1:
            raise ValueError("agent_start and agent_step must be >= 1")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be > 0")
        if self.budget_mode not in ("wall", "expansions"):
            raise ValueError(f"unknown budget mode {self.budget_mode!r}")

    def budget(self) -> Budget:
        if self.budget_mode == "wall":
            return Budget(seconds=self.time_limit)
        return Budget(expansions=self.expansion_budget)


def discover_maps(maps_dir: Path, scenarios_dir: Path, names: Iterable[str] | None = None,
                  scenarios_per_map: int | None = None) -> list[MapEntry]:
    """Pair every ``<name>.map`` with the ``<name>*.scen`` files next to it."""
    entries = []
    for map_path in sorted(Path(maps_dir).glob("*.map")):
        name = map_path.stem
        if names is not None and name not in names:
            continue
        scens = sorted(Path(scenarios_dir).glob(f"{name}-*.scen"), key=_natural_key)
        if scenarios_per_map is not None:
            scens = scens[:scenarios_per_map]
        if scens:
            entries.append(MapEntry(name, load_map(map_path), scens))
    return entries


def _natural_key(path: Path) -> tuple:
    stem = path.stem
    head = stem.rstrip("0123456789")
    tail = stem[len(head):]
    return (head, int(tail) if tail else -1)


# ---------------------------------------------------------------------------
# single runs


def _default_solve(spec: SolverSpec, scenario: Scenario, budget: Budget, seed: int) -> SolveResult:
    return solve(spec, scenario, budget, seed)


def run_one(scenario: Scenario, spec: SolverSpec, time_limit: float, seed: int = 0,
            budget: Budget | None = None, solve_fn: SolveFn = _default_solve) -> RunRecord:
    """Run one solver on one scenario; only solve time is measured.

    With a wall-clock budget a result that lands after ``time_limit`` counts as
    unsuccessful.  With an expansion budget success is decided by the budget
    alone, and ``time`` is the consumed share of the budget scaled to
    ``time_limit``, so that records are reproducible bit for bit.
    """
    wall_mode = budget is None or budget.seconds is not None
    budget = budget or Budget(seconds=time_limit)
    record = _run_measured(scenario, spec, time_limit, seed, budget, solve_fn, wall_mode)
    if not wall_mode and budget.expansions:
        used = record.expansions / budget.expansions if not record.note.startswith("crash") else 1.0
        record.time = time_limit * min(1.0, used)
    return record


def _run_measured(scenario: Scenario, spec: SolverSpec, time_limit: float, seed: int, budget: Budget,
                  solve_fn: SolveFn, wall_mode: bool) -> RunRecord:
    record = RunRecord(scenario.map_name, scenario.scenario_id, scenario.agent_count,
                       spec.id, 0.0, None, False, seed)
    start = time.perf_counter()
    try:
        result = solve_fn(spec, scenario, budget, seed)
    except Exception as exc:  # solver crash is data, not a harness error
        record.time = time.perf_counter() - start
        record.note = f"crash: {type(exc).__name__}: {exc}"
        log.warning("solver %s crashed on %s: %s", spec.id, record.key, exc)
        return record
    record.time = time.perf_counter() - start
    record.expansions = result.expansions
    if not result.ok:
        record.note = result.status.value + (f": {result.detail}" if result.detail else "")
        return record
    violations = validate(result.solution, scenario)
    if violations:
        record.note = f"integrity alarm: {violations[0]}"
        log.error("integrity alarm: %s returned an invalid solution on %s: %s",
                  spec.id, record.key, "; ".join(map(str, violations[:3])))
        return record
    if wall_mode and record.time > time_limit:
        record.note = "timeout: finished after the limit"
        return record
    record.cost = result.solution.sum_of_costs
    record.success = True
    return record


def _run_task(task: tuple) -> RunRecord:
    scenario, spec, plan_fields, solve_fn = task
    plan = SweepPlan(maps=[], **plan_fields)
    return run_one(scenario, spec, plan.time_limit, plan.seed, plan.budget(), solve_fn)


# ---------------------------------------------------------------------------
# record log


class RecordLog:
    """Append-only JSON-lines log keyed by (map, scenario, agents, solver)."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.records: dict[tuple, RunRecord] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        good_bytes = 0
        with self.path.open("rb") as fh:
            for raw in fh:
                try:
                    rec = RunRecord.from_dict(json.loads(raw))
                except (ValueError, TypeError, KeyError):
                    log.warning("dropping torn record at byte %d of %s", good_bytes, self.path)
                    break
                self.records.setdefault(rec.key, rec)
                good_bytes += len(raw)
        if good_bytes != self.path.stat().st_size:
            with self.path.open("r+b") as fh:
                fh.truncate(good_bytes)

    def __contains__(self, key: tuple) -> bool:
        return key in self.records

    def __len__(self) -> int:
        return len(self.records)

    def append(self, record: RunRecord) -> None:
        if record.key in self.records:
            raise ValueError(f"duplicate record key {record.key}")
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(record.to_json() + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        self.records[record.key] = record


def read_records(path: Path) -> list[RunRecord]:
    return list(RecordLog(path).records.values())


def export_csv(records: Iterable[RunRecord], path: Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for r in records:
            writer.writerow([r.map_name, r.scenario_id, r.agent_count, r.solver_id,
                             f"{r.time:.6f}", "" if r.cost is None else r.cost,
                             int(r.success), r.seed])


def _write_checkpoint(path: Path, map_name: str, tier: int) -> None:
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps({"map": map_name, "tier": tier}) + "\n")
    os.replace(tmp, path)


def read_checkpoint(path: Path) -> dict | None:
    try:
        return json.loads(Path(path).read_text())
    except (FileNotFoundError, ValueError):
        return None


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class TierSummary:
    map_name: str
    agents: int
    scenarios: int
    max_successes: int
    stopped: bool = False
    per_solver: dict[str, int] = field(default_factory=dict)


def run_sweep(plan: SweepPlan, portfolio: list[SolverSpec], log_path: Path,
              checkpoint_path: Path | None = None, workers: int = 1,
              solve_fn: SolveFn = _default_solve) -> Iterator[TierSummary]:
    """Run agent-count tiers per map until at most ``stop_count`` solvers survive.

    The map stops after the first tier where every scenario was solved by at
    most ``stop_count`` solvers, or when no scenario file has enough agents.
    Records already present in the log are reused, never rerun.
    """
    record_log = RecordLog(log_path)
    checkpoint_path = checkpoint_path or Path(log_path).with_suffix(".checkpoint.json")
    plan_fields = {k: getattr(plan, k) for k in
                   ("time_limit", "agent_start", "agent_step", "stop_count", "seed",
                    "budget_mode", "expansion_budget", "max_agents")}
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for entry in plan.maps:
            texts = {p: p.read_text() for p in entry.scenario_files}
            capacity = {p: scenario_row_count(t) for p, t in texts.items()}
            n = plan.agent_start
            while plan.max_agents is None or n <= plan.max_agents:
                scenarios = []
                for p, text in texts.items():
                    if capacity[p] < n:
                        continue
                    try:
                        scenarios.append(parse_scenario(text, entry.grid, n, entry.name, p.stem))
                    except ScenarioError as exc:
                        log.warning("skipping %s at %d agents: %s", p.name, n, exc)
                if not scenarios:
                    break
                tasks = [(sc, spec) for sc in scenarios for spec in portfolio
                         if (entry.name, sc.scenario_id, n, spec.id) not in record_log]
                if pool is None:
                    results = (run_one(sc, spec, plan.time_limit, plan.seed, plan.budget(), solve_fn)
                               for sc, spec in tasks)
                else:
                    results = pool.map(_run_task, [(sc, spec, plan_fields, solve_fn) for sc, spec in tasks])
                for rec in results:
                    record_log.append(rec)
                _write_checkpoint(checkpoint_path, entry.name, n)

                summary = TierSummary(entry.name, n, len(scenarios), 0)
                for spec in portfolio:
                    summary.per_solver[spec.id] = sum(
                        record_log.records[(entry.name, sc.scenario_id, n, spec.id)].success
                        for sc in scenarios)
                successes = [sum(record_log.records[(entry.name, sc.scenario_id, n, spec.id)].success
                                 for spec in portfolio) for sc in scenarios]
                summary.max_successes = max(successes)
                summary.stopped = summary.max_successes <= plan.stop_count
                yield summary
                if summary.stopped:
                    break
                n += plan.agent_step
    finally:
        if pool is not None:
            pool.shutdown()
