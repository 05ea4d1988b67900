"""Result analytics: rankings with ties, average rank, phase gains.

Scores live in a sparse grid keyed by (phase, task, dataset, model).
Rankings are descending competition ranks: tied scores share the
smallest rank of their block and the next distinct score ranks 1 plus
the number of strictly better models. A task-level score is the plain
mean of its per-dataset F1s (this is how the sentiment task, which has
four sub-datasets, is collapsed for ranking). Phase-over-phase gains are
reported in percentage points at one decimal, with an arrow that is "-"
exactly when the gain vanishes at that precision.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from .jsonl import read_json
from .scorer import MetricReport
from .tasks import TaskKind

PHASE_ORDER = ("task_specific", "multi_task", "zero_shot")


@dataclass(frozen=True)
class PerformanceGain:
    points: float  # (after - before) * 100
    arrow: str     # one of UP / DOWN / "-"

    @property
    def rendered(self) -> str:
        if f"{self.points:.1f}" in ("0.0", "-0.0"):
            return "0.0"
        return f"{self.points:+.1f}"


UP, DOWN, FLAT = "↑", "↓", "-"


class ResultGrid:
    """Sparse f1 grid: phase -> (task, dataset) -> model -> score."""

    def __init__(self) -> None:
        self._cells: dict[tuple[str, str, str, str], float] = {}
        self._models: list[str] = []

    def add(self, phase: str, task: str, dataset: str, model: str, f1: float) -> None:
        if not 0.0 <= f1 <= 1.0:
            raise ValueError(f"f1 out of range: {f1}")
        self._cells[(phase, task, dataset, model)] = f1
        if model not in self._models:
            self._models.append(model)

    @property
    def models(self) -> list[str]:
        return list(self._models)

    def phases(self) -> list[str]:
        present = {phase for phase, _, _, _ in self._cells}
        return [p for p in PHASE_ORDER if p in present] + sorted(present - set(PHASE_ORDER))

    def tasks(self, phase: str) -> list[str]:
        seen: list[str] = []
        for p, task, _, _ in self._cells:
            if p == phase and task not in seen:
                seen.append(task)
        return seen

    def datasets(self, phase: str, task: str) -> list[str]:
        seen: list[str] = []
        for p, t, dataset, _ in self._cells:
            if p == phase and t == task and dataset not in seen:
                seen.append(dataset)
        return seen

    def get(self, phase: str, task: str, dataset: str, model: str) -> float | None:
        return self._cells.get((phase, task, dataset, model))

    def task_score(self, phase: str, task: str, model: str) -> float | None:
        """Plain mean of the model's per-dataset F1s for the task."""
        values = [self._cells[(phase, task, d, model)]
                  for d in self.datasets(phase, task)
                  if (phase, task, d, model) in self._cells]
        if not values:
            return None
        return sum(values) / len(values)


def rank_models(scores: dict[str, float]) -> dict[str, int]:
    """Descending competition ranking with shared ranks on ties."""
    if not scores:
        raise ValueError("need at least one model to rank")
    return {
        model: 1 + sum(1 for other in scores.values() if other > score)
        for model, score in scores.items()
    }


def avg_ranking(ranks_per_task: dict[str, int]) -> float:
    """Arithmetic mean of a model's per-task ranks."""
    if not ranks_per_task:
        raise ValueError("need at least one task")
    return sum(ranks_per_task.values()) / len(ranks_per_task)


def performance_gain(before: float, after: float) -> PerformanceGain:
    """Gain in percentage points between two phases of the same metric."""
    for value in (before, after):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"score out of range: {value}")
    points = (after - before) * 100.0
    if f"{points:.1f}" in ("0.0", "-0.0"):
        arrow = FLAT
    elif points > 0:
        arrow = UP
    else:
        arrow = DOWN
    return PerformanceGain(points, arrow)


# ---------------------------------------------------------------------------
# Discovery and rendering


def load_grid(runs_dir: str | Path) -> ResultGrid:
    """Collect metrics.json files under runs/{phase}/{model}/{task}/."""
    grid = ResultGrid()
    runs_dir = Path(runs_dir)
    if not runs_dir.exists():
        return grid
    for metrics_path in sorted(runs_dir.glob("*/*/*/metrics.json")):
        task_dir = metrics_path.parent
        model_dir = task_dir.parent
        phase_dir = model_dir.parent
        for row in read_json(metrics_path):
            report = MetricReport.from_dict(row)
            grid.add(phase_dir.name, report.task.value,
                     report.dataset or task_dir.name, model_dir.name, report.f1)
    return grid


@dataclass
class RenderedReport:
    text: str
    csv_rows: list[dict]

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(
            buf, fieldnames=["phase", "task", "dataset", "model", "f1",
                             "rank", "arrow", "gain_points"],
            lineterminator="\n")
        writer.writeheader()
        writer.writerows(self.csv_rows)
        return buf.getvalue()


def _format_table(headers: list[str], rows: list[list[str]]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines)


def render_tables(grid: ResultGrid) -> RenderedReport:
    """Per-phase tables (models as columns) plus flat CSV rows.

    Phase 1 cells carry competition ranks in brackets and an average
    ranking row; phase 2 cells carry arrows against phase 1 and per-task
    gain rows; phase 3 marks the best two models per row.
    """
    models = grid.models
    sections: list[str] = []
    csv_rows: list[dict] = []

    for phase in grid.phases():
        headers = [phase] + models
        rows: list[list[str]] = []

        if phase == "task_specific":
            rank_vectors: dict[str, dict[str, int]] = {m: {} for m in models}
            for task in grid.tasks(phase):
                scores = {m: s for m in models
                          if (s := grid.task_score(phase, task, m)) is not None}
                ranks = rank_models(scores) if scores else {}
                for m, r in ranks.items():
                    rank_vectors[m][task] = r
                row = [task]
                for m in models:
                    if m in scores:
                        row.append(f"{scores[m]:.3f} ({ranks[m]})")
                        csv_rows.append({"phase": phase, "task": task, "dataset": "",
                                         "model": m, "f1": repr(scores[m]),
                                         "rank": ranks[m], "arrow": "", "gain_points": ""})
                    else:
                        row.append("")
                rows.append(row)
            avg_row = ["Avg Ranking"]
            for m in models:
                avg_row.append(f"{avg_ranking(rank_vectors[m]):.2f}"
                               if rank_vectors[m] else "")
            rows.append(avg_row)

        elif phase == "multi_task":
            for task in grid.tasks(phase):
                for dataset in grid.datasets(phase, task):
                    row = [f"{task}/{dataset}" if dataset != task.lower() else task]
                    for m in models:
                        after = grid.get(phase, task, dataset, m)
                        if after is None:
                            row.append("")
                            continue
                        before = grid.get("task_specific", task, dataset, m)
                        arrow = (performance_gain(before, after).arrow
                                 if before is not None else "")
                        row.append(f"{after:.3f}{arrow}")
                        csv_rows.append({"phase": phase, "task": task, "dataset": dataset,
                                         "model": m, "f1": repr(after), "rank": "",
                                         "arrow": arrow, "gain_points": ""})
                    rows.append(row)
                gain_row = [f"{task} Performance Gain"]
                for m in models:
                    before = grid.task_score("task_specific", task, m)
                    after = grid.task_score(phase, task, m)
                    if before is None or after is None:
                        gain_row.append("")
                        continue
                    gain = performance_gain(before, after)
                    gain_row.append(f"{gain.rendered}%")
                    csv_rows.append({"phase": phase, "task": task, "dataset": "",
                                     "model": m, "f1": "", "rank": "",
                                     "arrow": gain.arrow,
                                     "gain_points": f"{gain.points:.10g}"})
                rows.append(gain_row)

        else:  # zero_shot and anything else: datasets as rows, best two marked
            for task in grid.tasks(phase):
                for dataset in grid.datasets(phase, task):
                    scores = {m: s for m in models
                              if (s := grid.get(phase, task, dataset, m)) is not None}
                    top_two = set()
                    if scores:
                        ranks = rank_models(scores)
                        top_two = {m for m, r in ranks.items() if r <= 2}
                    row = [f"{task}/{dataset}"]
                    for m in models:
                        if m in scores:
                            mark = "*" if m in top_two else ""
                            row.append(f"{scores[m]:.3f}{mark}")
                            csv_rows.append({"phase": phase, "task": task,
                                             "dataset": dataset, "model": m,
                                             "f1": repr(scores[m]), "rank": "",
                                             "arrow": "", "gain_points": ""})
                        else:
                            row.append("")
                    rows.append(row)

        sections.append(_format_table(headers, rows))

    return RenderedReport(text="\n\n".join(sections) + ("\n" if sections else ""),
                          csv_rows=csv_rows)


def write_report(grid: ResultGrid, outdir: str | Path) -> tuple[Path, Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    rendered = render_tables(grid)
    txt = outdir / "report.txt"
    csv_path = outdir / "report.csv"
    txt.write_text(rendered.text, encoding="utf-8")
    csv_path.write_text(rendered.csv_text(), encoding="utf-8")
    return csv_path, txt
