"""Objective labels from per-scenario run records.

Runtime and cost are put on a solver-independent scale: time over the time
limit, and sum of costs over the sum of individual shortest-path lengths.
Unsuccessful runs are charged ``penalty * time_limit`` and
``penalty * cost_min``.  Two objective families are supported:

* ``score:<w>``  minimise ``time' + w * cost'``
* ``bound:<b>``  fastest solver whose cost is within ``b * cost_min``
"""

from __future__ import annotations

import csv
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .grid import Scenario, distance_to
from .harness import RunRecord

log = logging.getLogger(__name__)

DEFAULT_PENALTY = 5.0


class DroppedScenario(ValueError):
    """A scenario that cannot be labeled (every solver failed or cost bound is 0)."""


@dataclass(frozen=True)
class Objective:
    family: str  # "score" | "bound"
    value: float

    def __post_init__(self):
        if self.family not in ("score", "bound"):
            raise ValueError(f"unknown objective family {self.family!r}")
        if not math.isfinite(self.value):
            raise ValueError("objective parameter must be finite")
        if self.family == "score" and self.value < 0:
            raise ValueError("score weight w must be >= 0")
        if self.family == "bound" and self.value < 1:
            raise ValueError("bound must be >= 1")

    @classmethod
    def parse(cls, text: str) -> "Objective":
        family, sep, arg = text.strip().lower().partition(":")
        if not sep:
            raise ValueError(f"objective {text!r} must look like 'score:<w>' or 'bound:<b>'")
        try:
            value = float(arg)
        except ValueError:
            raise ValueError(f"objective {text!r}: {arg!r} is not a number") from None
        return cls(family, value)

    def __str__(self) -> str:
        return f"{self.family}:{self.value:g}"

    @property
    def task_prefix(self) -> str:
        """``Score-0.001`` / ``Bound-1.1``."""
        return f"{self.family.capitalize()}-{self.value:g}"


@dataclass(frozen=True)
class NormalizationContext:
    time_limit: float
    cost_bound: int
    cost_min: int | None
    penalty: float = DEFAULT_PENALTY


@dataclass(frozen=True)
class LabeledInstance:
    key: tuple[str, str, int]
    solver_ids: tuple[str, ...]
    times: tuple[float, ...]  # normalised, penalty applied
    costs: tuple[float, ...]  # normalised, penalty applied
    scores: tuple[float, ...]
    label: int
    objective: Objective

    @property
    def vbs_score(self) -> float:
        return self.scores[self.label]


def cost_bound(scenario: Scenario) -> int:
    """Sum of individual shortest-path lengths."""
    return sum(distance_to(scenario.grid, a.goal)[a.start] for a in scenario.agents)


def make_context(records: Sequence[RunRecord], time_limit: float, bound: int,
                 penalty: float = DEFAULT_PENALTY) -> NormalizationContext:
    costs = [r.cost for r in records if r.success]
    return NormalizationContext(time_limit, bound, min(costs) if costs else None, penalty)


def normalize(record: RunRecord, ctx: NormalizationContext) -> tuple[float, float]:
    if ctx.cost_bound <= 0:
        raise DroppedScenario("cost bound is 0 (every agent starts on its goal)")
    if record.success:
        return record.time / ctx.time_limit, record.cost / ctx.cost_bound
    if ctx.cost_min is None:
        raise DroppedScenario("no solver succeeded")
    return ctx.penalty, ctx.penalty * ctx.cost_min / ctx.cost_bound


def score(time_norm: float, cost_norm: float, w: float) -> float:
    return time_norm + w * cost_norm


def _ordered(records: Sequence[RunRecord], solver_ids: Sequence[str]) -> list[RunRecord]:
    by_id = {r.solver_id: r for r in records}
    missing = [s for s in solver_ids if s not in by_id]
    if missing:
        raise DroppedScenario(f"missing records for {missing}")
    return [by_id[s] for s in solver_ids]


def _argmin(values: Sequence[float]) -> int:
    # first minimum wins, i.e. portfolio order breaks ties
    best = 0
    for i, v in enumerate(values):
        if v < values[best]:
            best = i
    return best


def label_score(records: Sequence[RunRecord], ctx: NormalizationContext, w: float,
                solver_ids: Sequence[str] | None = None) -> LabeledInstance:
    solver_ids = tuple(solver_ids or [r.solver_id for r in records])
    ordered = _ordered(records, solver_ids)
    if not any(r.success for r in ordered):
        raise DroppedScenario("no solver succeeded")
    norm = [normalize(r, ctx) for r in ordered]
    scores = tuple(score(t, c, w) for t, c in norm)
    return LabeledInstance(ordered[0].instance, solver_ids, tuple(t for t, _ in norm),
                           tuple(c for _, c in norm), scores, _argmin(scores), Objective("score", w))


def label_bound(records: Sequence[RunRecord], ctx: NormalizationContext, bound: float,
                solver_ids: Sequence[str] | None = None) -> LabeledInstance:
    """Fastest successful solver with ``cost <= bound * cost_min``.

    The per-solver score is the normalised time, with the failure penalty for
    runs that failed or missed the cost bound; the label is its argmin.
    """
    solver_ids = tuple(solver_ids or [r.solver_id for r in records])
    ordered = _ordered(records, solver_ids)
    if not any(r.success for r in ordered):
        raise DroppedScenario("no solver succeeded")
    norm = [normalize(r, ctx) for r in ordered]
    limit = bound * ctx.cost_min
    feasible = [r.success and r.cost <= limit + 1e-9 for r in ordered]
    scores = tuple(t if ok else ctx.penalty for (t, _), ok in zip(norm, feasible))
    label = min((i for i in range(len(ordered)) if feasible[i]), key=lambda i: (ordered[i].time, i))
    return LabeledInstance(ordered[0].instance, solver_ids, tuple(t for t, _ in norm),
                           tuple(c for _, c in norm), scores, label, Objective("bound", bound))


def label_instance(records: Sequence[RunRecord], ctx: NormalizationContext, objective: Objective,
                   solver_ids: Sequence[str] | None = None) -> LabeledInstance:
    if objective.family == "score":
        return label_score(records, ctx, objective.value, solver_ids)
    return label_bound(records, ctx, objective.value, solver_ids)


def group_records(records: Iterable[RunRecord]) -> dict[tuple[str, str, int], list[RunRecord]]:
    groups: dict[tuple[str, str, int], list[RunRecord]] = defaultdict(list)
    for r in records:
        groups[r.instance].append(r)
    return dict(groups)


def label_dataset(groups: dict[tuple[str, str, int], list[RunRecord]], bounds: dict[tuple, int],
                  objective: Objective, solver_ids: Sequence[str], time_limit: float,
                  penalty: float = DEFAULT_PENALTY) -> list[LabeledInstance]:
    """Label every group; unlabelable scenarios are logged and skipped."""
    out = []
    for key in sorted(groups):
        recs = groups[key]
        try:
            ctx = make_context(recs, time_limit, bounds[key], penalty)
            out.append(label_instance(recs, ctx, objective, solver_ids))
        except DroppedScenario as exc:
            log.info("dropping %s from %s labels: %s", key, objective, exc)
    return out


# ---------------------------------------------------------------------------
# VBS / SBS


@dataclass(frozen=True)
class Baselines:
    vbs: tuple[int, ...]
    sbs_acc: int
    sbs_gap: int


def compute_vbs_sbs(instances: Sequence[LabeledInstance]) -> Baselines:
    if not instances:
        raise ValueError("cannot compute baselines on an empty split")
    k = len(instances[0].solver_ids)
    counts = Counter(inst.label for inst in instances)
    sbs_acc = max(range(k), key=lambda a: (counts.get(a, 0), -a))
    means = [sum(inst.scores[a] for inst in instances) / len(instances) for a in range(k)]
    return Baselines(tuple(inst.label for inst in instances), sbs_acc, _argmin(means))


# ---------------------------------------------------------------------------
# files

def write_labels(instances: Sequence[LabeledInstance], path: Path, objective: Objective,
                 solver_ids: Sequence[str]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["map", "scenario", "agents", "objective", "label", *solver_ids])
        for inst in instances:
            w.writerow([*inst.key, str(objective), solver_ids[inst.label],
                        *(repr(float(s)) for s in inst.scores)])


def read_labels(path: Path) -> tuple[Objective, list[str], list[LabeledInstance]]:
    """Read a label file.  Normalised times/costs are not stored; they come back as NaN."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    header = rows[0]
    if header[:5] != ["map", "scenario", "agents", "objective", "label"]:
        raise ValueError(f"{path}: unexpected label header {header[:5]}")
    solver_ids = header[5:]
    objective = None
    out = []
    nan = tuple(math.nan for _ in solver_ids)
    for row in rows[1:]:
        objective = Objective.parse(row[3])
        scores = tuple(float(x) for x in row[5:])
        out.append(LabeledInstance((row[0], row[1], int(row[2])), tuple(solver_ids), nan, nan,
                                   scores, solver_ids.index(row[4]), objective))
    if objective is None:
        objective = Objective.parse(Path(path).stem.replace("labels_", "").replace("_", ":", 1))
    return objective, solver_ids, out
