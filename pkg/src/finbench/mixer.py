"""Phase-specific training-mix assembly.

Phase "task_specific" passes one task's train/test split through
unchanged; "multi_task" balances all six tasks' train splits up to the
largest group by oversampling and shuffles the union; "zero_shot" trains
on the union of the three classification reformulations (HC, NER_CLS,
RE_CLS) and evaluates on the sentiment test split with neutral-labeled
records removed.

Oversampling never invents records: each task contributes floor(M/n)
whole repeats of its group plus a seeded sample without replacement of
the remainder, where M is the largest group size. Every shuffle is the
documented seeded algorithm recorded in the plan, so a plan plus its
inputs reproduces the exact stream.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import TypeVar

from . import scorer
from .errors import EmptyGroup, MissingTask, UnknownPhase
from .instruct import InstructionRecord, write_records
from .jsonl import write_json
from .seeding import SHUFFLE_ALGORITHM_ID, rng_for
from .tasks import TaskKind

PHASES = ("task_specific", "multi_task", "zero_shot")
MULTI_TASK_TASKS = (TaskKind.SA, TaskKind.HC, TaskKind.NER, TaskKind.RE,
                    TaskKind.NER_CLS, TaskKind.RE_CLS)
ZERO_SHOT_TRAIN_TASKS = (TaskKind.HC, TaskKind.NER_CLS, TaskKind.RE_CLS)
ZERO_SHOT_EVAL_TASK = TaskKind.SA

T = TypeVar("T")


@dataclass
class MixPlan:
    """Serializable description of one phase's dataset assembly."""

    phase: str
    seed: int
    per_task_counts_before: dict[str, int]
    per_task_counts_after: dict[str, int]
    eval_tasks: list[str]
    record_order: dict = field(
        default_factory=lambda: {"seed": 0, "algorithm": SHUFFLE_ALGORITHM_ID})

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "seed": self.seed,
            "per_task_counts_before": self.per_task_counts_before,
            "per_task_counts_after": self.per_task_counts_after,
            "eval_tasks": self.eval_tasks,
            "record_order": self.record_order,
        }


def oversample(groups: Mapping[TaskKind, Sequence[T]], seed: int) -> list[T]:
    """Balance all groups to the largest size, then shuffle the union.

    Each group of size n is repeated floor(M/n) full times plus a seeded
    uniform sample without replacement of the remaining M mod n items,
    so every task contributes exactly M = max group size.
    """
    for task, records in groups.items():
        if not records:
            raise EmptyGroup(str(task))
    target = max(len(records) for records in groups.values())
    out: list[T] = []
    for task in sorted(groups, key=lambda t: t.value):
        records = groups[task]
        n = len(records)
        repeats, remainder = divmod(target, n)
        out.extend(list(records) * repeats)
        if remainder:
            rng = rng_for(seed, "oversample", task.value)
            out.extend(records[i] for i in rng.sample(range(n), remainder))
    rng_for(seed, "oversample", "shuffle").shuffle(out)
    return out


def _require(records_by_task: Mapping[TaskKind, Mapping[str, list[InstructionRecord]]],
             phase: str, task: TaskKind, split: str) -> list[InstructionRecord]:
    group = records_by_task.get(task)
    if group is None or split not in group:
        raise MissingTask(phase, task.value)
    return group[split]


def assemble_phase(phase: str,
                   records_by_task: Mapping[TaskKind, Mapping[str, list[InstructionRecord]]],
                   seed: int, task: TaskKind | None = None,
                   ) -> tuple[MixPlan, list[InstructionRecord], list[InstructionRecord]]:
    """Build (plan, train stream, eval stream) for one phase.

    ``records_by_task`` maps each task to its {"train": [...], "test":
    [...]} record lists; ``task`` selects the single task in the
    task_specific phase. Zero-shot eval records must carry options and
    get their neutral-labeled rows removed here.
    """
    if phase not in PHASES:
        raise UnknownPhase(f"unknown phase {phase!r}")

    if phase == "task_specific":
        if task is None:
            if len(records_by_task) != 1:
                raise ValueError("task_specific assembly needs an explicit task")
            task = next(iter(records_by_task))
        train = list(_require(records_by_task, phase, task, "train"))
        eval_records = list(_require(records_by_task, phase, task, "test"))
        counts = {task.value: len(train)}
        plan = MixPlan(phase, seed, counts, dict(counts), [task.value],
                       {"seed": seed, "algorithm": "identity"})
        return plan, train, eval_records

    if phase == "multi_task":
        groups = {t: _require(records_by_task, phase, t, "train")
                  for t in MULTI_TASK_TASKS}
        train = oversample(groups, seed)
        eval_records = []
        for t in MULTI_TASK_TASKS:
            eval_records.extend(_require(records_by_task, phase, t, "test"))
        target = max(len(g) for g in groups.values())
        plan = MixPlan(
            phase, seed,
            {t.value: len(groups[t]) for t in MULTI_TASK_TASKS},
            {t.value: target for t in MULTI_TASK_TASKS},
            [t.value for t in MULTI_TASK_TASKS],
            {"seed": seed, "algorithm": SHUFFLE_ALGORITHM_ID},
        )
        return plan, train, eval_records

    # zero_shot: train on the classification reformulations, evaluate on
    # sentiment with neutral rows excluded; no oversampling is applied.
    train = []
    counts = {}
    for t in ZERO_SHOT_TRAIN_TASKS:
        group = _require(records_by_task, phase, t, "train")
        counts[t.value] = len(group)
        train.extend(group)
    rng_for(seed, "zero_shot", "shuffle").shuffle(train)
    eval_records = _require(records_by_task, phase, ZERO_SHOT_EVAL_TASK, "test")
    if any(r.options is None for r in eval_records):
        raise ValueError("zero-shot eval records must carry options")
    eval_records = scorer.filter_neutral(list(eval_records))
    plan = MixPlan(
        phase, seed, counts, dict(counts),
        [ZERO_SHOT_EVAL_TASK.value],
        {"seed": seed, "algorithm": SHUFFLE_ALGORITHM_ID},
    )
    return plan, train, eval_records


def mix_basename(phase: str, seed: int, task: TaskKind | None = None) -> str:
    token = task.value.lower() if task is not None else "all"
    return f"{phase}_{token}_{seed}"


def write_mix(outdir: str | Path, plan: MixPlan, train: list[InstructionRecord],
              eval_records: list[InstructionRecord],
              task: TaskKind | None = None) -> dict[str, Path]:
    """Persist plan + streams next to each other; returns the paths."""
    outdir = Path(outdir)
    base = mix_basename(plan.phase, plan.seed, task)
    paths = {
        "plan": outdir / f"{base}.plan.json",
        "train": outdir / f"{base}.train.jsonl",
        "eval": outdir / f"{base}.eval.jsonl",
    }
    write_json(paths["plan"], plan.to_dict())
    write_records(paths["train"], train)
    write_records(paths["eval"], eval_records)
    return paths
