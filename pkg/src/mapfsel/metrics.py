"""Accuracy, VBS-SBS gap and report emission (CSV + small SVG charts)."""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

from .labeling import Baselines, LabeledInstance, Objective, compute_vbs_sbs


def accuracy(predictions: Sequence[int], labels: Sequence[int]) -> float:
    if len(predictions) != len(labels):
        raise ValueError(f"length mismatch: {len(predictions)} predictions, {len(labels)} labels")
    if not labels:
        raise ValueError("accuracy of an empty split is undefined")
    return sum(p == y for p, y in zip(predictions, labels)) / len(labels)


def mean_score(instances: Sequence[LabeledInstance], choices: Sequence[int]) -> float:
    return sum(inst.scores[a] for inst, a in zip(instances, choices)) / len(instances)


def gap_from_means(pred: float, vbs: float, sbs: float) -> float:
    """``(pred - vbs) / (sbs - vbs)``; 0/0 is 0 and x/0 is +inf (degenerate split)."""
    num = pred - vbs
    den = sbs - vbs
    if den == 0:
        return 0.0 if num == 0 else math.inf
    return num / den


def gap(predictions: Sequence[int], instances: Sequence[LabeledInstance], sbs_gap: int) -> float:
    if not instances:
        raise ValueError("gap of an empty split is undefined")
    if len(predictions) != len(instances):
        raise ValueError("one prediction per instance required")
    return gap_from_means(mean_score(instances, predictions),
                          mean_score(instances, [i.label for i in instances]),
                          mean_score(instances, [sbs_gap] * len(instances)))


@dataclass(frozen=True)
class GapReport:
    objective: Objective
    accuracy: float
    gap: float
    mean_pred: float
    mean_vbs: float
    mean_sbs: float
    sbs_acc: str
    sbs_gap: str
    sbs_acc_accuracy: float
    fit_size: int
    eval_size: int
    fit_split_gap: float | None = None

    @property
    def degenerate(self) -> bool:
        return math.isinf(self.gap)

    def rows(self) -> list[tuple[str, str]]:
        def fmt(x):
            return "" if x is None else repr(float(x)) if isinstance(x, float) else str(x)

        return [
            ("objective", str(self.objective)),
            ("accuracy", fmt(self.accuracy)),
            ("gap", fmt(self.gap)),
            ("degenerate", str(self.degenerate).lower()),
            ("mean_score_pred", fmt(self.mean_pred)),
            ("mean_score_vbs", fmt(self.mean_vbs)),
            ("mean_score_sbs", fmt(self.mean_sbs)),
            ("sbs_acc", self.sbs_acc),
            ("sbs_gap", self.sbs_gap),
            ("sbs_acc_accuracy", fmt(self.sbs_acc_accuracy)),
            ("fit_split_gap", fmt(self.fit_split_gap)),
            ("fit_size", str(self.fit_size)),
            ("eval_size", str(self.eval_size)),
        ]


def gap_report(predictions: Sequence[int], eval_split: Sequence[LabeledInstance],
               baselines: Baselines, fit_size: int,
               fit_split: Sequence[LabeledInstance] | None = None,
               fit_predictions: Sequence[int] | None = None) -> GapReport:
    """Evaluate predictions with SBS fitted on a (usually training) split."""
    ids = eval_split[0].solver_ids
    labels = [i.label for i in eval_split]
    n = len(eval_split)
    fit_gap = None
    if fit_split and fit_predictions is not None:
        fit_gap = gap(fit_predictions, fit_split, baselines.sbs_gap)
    return GapReport(
        objective=eval_split[0].objective,
        accuracy=accuracy(predictions, labels),
        gap=gap(predictions, eval_split, baselines.sbs_gap),
        mean_pred=mean_score(eval_split, predictions),
        mean_vbs=mean_score(eval_split, labels),
        mean_sbs=mean_score(eval_split, [baselines.sbs_gap] * n),
        sbs_acc=ids[baselines.sbs_acc],
        sbs_gap=ids[baselines.sbs_gap],
        sbs_acc_accuracy=accuracy([baselines.sbs_acc] * n, labels),
        fit_size=fit_size,
        eval_size=n,
        fit_split_gap=fit_gap,
    )


def write_metric_csv(path: Path, rows: Sequence[tuple[str, str]]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        w.writerows(rows)


# ---------------------------------------------------------------------------
# frequency report


def frequency_table(instances: Sequence[LabeledInstance]) -> tuple[list[str], list[str], dict[str, list[int]]]:
    """Per-map counts of how often each solver is the label."""
    if not instances:
        raise ValueError("frequency report needs a nonempty labeled dataset")
    solver_ids = list(instances[0].solver_ids)
    counts: dict[str, list[int]] = defaultdict(lambda: [0] * len(solver_ids))
    for inst in instances:
        counts[inst.key[0]][inst.label] += 1
    maps = sorted(counts)
    return maps, solver_ids, {m: counts[m] for m in maps}


def write_frequency_csv(path: Path, instances: Sequence[LabeledInstance]) -> None:
    maps, solver_ids, counts = frequency_table(instances)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["map", *solver_ids, "total"])
        for m in maps:
            w.writerow([m, *counts[m], sum(counts[m])])


_PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7")


def frequency_svg(instances: Sequence[LabeledInstance], title: str = "") -> str:
    """Stacked horizontal bars, one per map."""
    maps, solver_ids, counts = frequency_table(instances)
    bar_h, gap_h, label_w, plot_w = 18, 8, 170, 420
    top = 40
    height = top + len(maps) * (bar_h + gap_h) + 30 + 18 * len(solver_ids)
    width = label_w + plot_w + 60
    peak = max(sum(c) for c in counts.values()) or 1
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="sans-serif" font-size="11">',
             f'<text x="10" y="20" font-size="13">{escape(title)}</text>']
    for row, m in enumerate(maps):
        y = top + row * (bar_h + gap_h)
        parts.append(f'<text x="{label_w - 6}" y="{y + 13}" text-anchor="end">{escape(m)}</text>')
        x = float(label_w)
        for k, c in enumerate(counts[m]):
            if c == 0:
                continue
            w = plot_w * c / peak
            parts.append(f'<rect x="{x:.2f}" y="{y}" width="{w:.2f}" height="{bar_h}" '
                         f'fill="{_PALETTE[k % len(_PALETTE)]}"><title>{escape(solver_ids[k])}: {c}</title></rect>')
            x += w
        parts.append(f'<text x="{x + 4:.2f}" y="{y + 13}">{sum(counts[m])}</text>')
    ly = top + len(maps) * (bar_h + gap_h) + 16
    for k, sid in enumerate(solver_ids):
        parts.append(f'<rect x="{label_w}" y="{ly + 18 * k - 10}" width="12" height="12" '
                     f'fill="{_PALETTE[k % len(_PALETTE)]}"/>')
        parts.append(f'<text x="{label_w + 18}" y="{ly + 18 * k}">{escape(sid)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


# ---------------------------------------------------------------------------
# ablation report


@dataclass(frozen=True)
class AblationRow:
    spec: str
    gap: float
    accuracy: float
    best: bool = False


def ablation_table(results: Sequence[tuple[str, float, float]]) -> list[AblationRow]:
    """Sort by gap ascending (ties: higher accuracy first, then spec) and flag the best gap."""
    if not results:
        raise ValueError("ablation report needs at least one row")
    ordered = sorted(results, key=lambda r: (r[1], -r[2], r[0]))
    return [AblationRow(s, g, a, best=(i == 0)) for i, (s, g, a) in enumerate(ordered)]


def format_spec(spec: str) -> str:
    return f"{spec[:3]} {spec[3:]}"


def write_ablation(rows: Sequence[AblationRow], csv_path: Path, txt_path: Path) -> str:
    with Path(csv_path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["spec", "gap", "accuracy", "best_gap"])
        for r in rows:
            w.writerow([r.spec, repr(r.gap), repr(r.accuracy), int(r.best)])
    lines = [f"{'rescale':<10} {'gap':>8} {'acc':>7}", "-" * 27]
    for r in rows:
        mark = "  *" if r.best else ""
        lines.append(f"{format_spec(r.spec):<10} {r.gap:>8.3f} {r.accuracy:>7.3f}{mark}")
    text = "\n".join(lines) + "\n"
    Path(txt_path).write_text(text)
    return text


__all__ = [
    "AblationRow", "GapReport", "ablation_table", "accuracy", "compute_vbs_sbs", "frequency_svg",
    "frequency_table", "gap", "gap_from_means", "gap_report", "mean_score", "write_ablation",
    "write_frequency_csv", "write_metric_csv",
]
