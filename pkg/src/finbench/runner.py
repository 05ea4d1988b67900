"""Run orchestration: plans, adapter invocations, manifests.

The runner never touches model internals. Training and inference happen
in an external adapter process spoken to over a file protocol:

    <adapter> train --train-file F --eval-file F --config F --output-dir D
        -> writes D/checkpoints.json, an array of
           {"step": int, "eval_loss": float, "path": str}
    <adapter> infer --model P --prompts F --output F --max-new-tokens N
        -> prompts rows {"id", "prompt"}; output rows {"id",
           "completion"}, exactly one per input id

The adapter executable is named by ``--adapter`` or the
FINBENCH_ADAPTER environment variable. When a plan sets a checkpoint
interval the runner exports FINBENCH_CHECKPOINT_EVERY_STEPS to the train
process (the train config JSON carries only the tuning fields). Next to
every prompts file the runner writes an answers sidecar
(``<stem>.answers.jsonl``) so oracle adapters such as the bundled mock
can replay gold answers; real adapters ignore it.

Every run persists a manifest recording input hashes, the exact adapter
command lines and artifact paths, sufficient to replay the run.
"""

from __future__ import annotations

import hashlib
import os
import shutil
import subprocess
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path

from . import corpus, instruct, mixer, scorer
from .errors import (
    AdapterFailed,
    AdapterNotFound,
    EmptyRecords,
    InvalidOverride,
    ProtocolViolation,
    UnknownPhase,
)
from .instruct import InstructionRecord
from .jsonl import read_json, read_jsonl, write_json, write_jsonl
from .seeding import derive_seed
from .tasks import TaskKind, is_classification

ADAPTER_ENV = "FINBENCH_ADAPTER"
CHECKPOINT_ENV = "FINBENCH_CHECKPOINT_EVERY_STEPS"

# Greedy-decoding budget per task shape: structured outputs need room,
# labels do not.
MAX_NEW_TOKENS_GENERATION = 128
MAX_NEW_TOKENS_CLASSIFICATION = 16

TASK_SPECIFIC_TASKS = (TaskKind.SA, TaskKind.NER, TaskKind.HC, TaskKind.RE)
TASK_SPECIFIC_EPOCHS = {TaskKind.SA: 8, TaskKind.NER: 50, TaskKind.HC: 8,
                        TaskKind.RE: 8}
MULTI_TASK_EPOCHS = 4
ZERO_SHOT_EPOCHS = 1
ZERO_SHOT_CHECKPOINT_EVERY = 100


def max_new_tokens_for(task: TaskKind) -> int:
    return (MAX_NEW_TOKENS_CLASSIFICATION if is_classification(task)
            else MAX_NEW_TOKENS_GENERATION)


@dataclass
class TrainConfig:
    """Tuning hyperparameters, serialized verbatim as the adapter config."""

    lora_rank: int = 8
    lora_alpha: int = 32
    lora_targets: str = "attention-projection layers"
    learning_rate: float = 1e-4
    warmup_fraction: float = 0.03
    schedule: str = "linear_decay_to_zero"
    precision: str = "fp16"
    max_token_length: int = 512
    per_device_batch: int = 4
    grad_accumulation: int = 8
    epochs: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    adapter_id: str = ""
    base_checkpoint: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


# The six base models benchmarked; base_checkpoint is an opaque locator
# the adapter resolves (here: their public hub ids).
PRESET_MODELS = {
    spec.name: spec
    for spec in (
        ModelSpec("llama2-7b", base_checkpoint="meta-llama/Llama-2-7b-hf"),
        ModelSpec("falcon-7b", base_checkpoint="tiiuae/falcon-7b"),
        ModelSpec("mpt-7b", base_checkpoint="mosaicml/mpt-7b"),
        ModelSpec("bloom-7b1", base_checkpoint="bigscience/bloom-7b1"),
        ModelSpec("chatglm2-6b", base_checkpoint="THUDM/chatglm2-6b"),
        ModelSpec("qwen-7b", base_checkpoint="Qwen/Qwen-7B"),
    )
}


@dataclass
class CheckpointRecord:
    step: int
    eval_loss: float
    path: str

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PhasePlan:
    """Everything one (model, phase[, task]) training job needs."""

    phase: str
    model: ModelSpec
    tasks: list[TaskKind]
    per_task_epochs: dict[TaskKind, float]
    eval_tasks: list[TaskKind]
    mode: str  # instruction-building mode: "standard" | "zeroshot"
    drop_neutral_eval: bool
    checkpoint_every_steps: int | None
    seed: int
    train_config: TrainConfig

    def to_dict(self) -> dict:
        return {
            "phase": self.phase,
            "model": self.model.to_dict(),
            "tasks": [t.value for t in self.tasks],
            "per_task_epochs": {t.value: e for t, e in self.per_task_epochs.items()},
            "eval_tasks": [t.value for t in self.eval_tasks],
            "mode": self.mode,
            "drop_neutral_eval": self.drop_neutral_eval,
            "checkpoint_every_steps": self.checkpoint_every_steps,
            "seed": self.seed,
            "train_config": self.train_config.to_dict(),
        }


def _apply_overrides(plan: PhasePlan, overrides: dict | None) -> None:
    if not overrides:
        return
    config_fields = set(TrainConfig().to_dict())
    for key, value in overrides.items():
        if key == "epochs":
            if isinstance(value, dict):
                epochs = {TaskKind(k): float(v) for k, v in value.items()}
                plan.per_task_epochs.update(epochs)
            else:
                plan.per_task_epochs = {t: float(value) for t in plan.tasks}
            continue
        if key == "checkpoint_every_steps":
            plan.checkpoint_every_steps = int(value) if value is not None else None
            continue
        if key in config_fields:
            setattr(plan.train_config, key, value)
            continue
        raise InvalidOverride(f"unknown override {key!r}")
    plan.train_config.epochs = float(next(iter(plan.per_task_epochs.values())))


def plan_run(phase: str, models: list[ModelSpec], overrides: dict | None = None,
             seed: int = 0) -> list[PhasePlan]:
    """Phase defaults -> one plan per (model, task) or per model."""
    if not models:
        raise ValueError("models must be nonempty")
    plans = []
    if phase == "task_specific":
        for model in models:
            for task in TASK_SPECIFIC_TASKS:
                epochs = float(TASK_SPECIFIC_EPOCHS[task])
                plans.append(PhasePlan(
                    phase=phase, model=model, tasks=[task],
                    per_task_epochs={task: epochs}, eval_tasks=[task],
                    mode="standard", drop_neutral_eval=False,
                    checkpoint_every_steps=None,
                    seed=derive_seed(seed, model.name, task.value),
                    train_config=TrainConfig(epochs=epochs),
                ))
    elif phase == "multi_task":
        for model in models:
            tasks = list(mixer.MULTI_TASK_TASKS)
            plans.append(PhasePlan(
                phase=phase, model=model, tasks=tasks,
                per_task_epochs={t: float(MULTI_TASK_EPOCHS) for t in tasks},
                eval_tasks=tasks, mode="standard", drop_neutral_eval=False,
                checkpoint_every_steps=None,
                seed=derive_seed(seed, model.name, "all"),
                train_config=TrainConfig(epochs=float(MULTI_TASK_EPOCHS)),
            ))
    elif phase == "zero_shot":
        for model in models:
            tasks = list(mixer.ZERO_SHOT_TRAIN_TASKS)
            plans.append(PhasePlan(
                phase=phase, model=model, tasks=tasks,
                per_task_epochs={t: float(ZERO_SHOT_EPOCHS) for t in tasks},
                eval_tasks=[mixer.ZERO_SHOT_EVAL_TASK], mode="zeroshot",
                drop_neutral_eval=True,
                checkpoint_every_steps=ZERO_SHOT_CHECKPOINT_EVERY,
                seed=derive_seed(seed, model.name, "all"),
                train_config=TrainConfig(epochs=float(ZERO_SHOT_EPOCHS)),
            ))
    else:
        raise UnknownPhase(f"unknown phase {phase!r}")
    for plan in plans:
        _apply_overrides(plan, overrides)
    return plans


def select_checkpoint(records: list[CheckpointRecord]) -> CheckpointRecord:
    """Minimal eval loss; ties break toward the smallest step."""
    if not records:
        raise EmptyRecords("no checkpoint records to select from")
    return min(records, key=lambda r: (r.eval_loss, r.step))


def estimate_cost(gpu_hours: float, hourly_rate: float) -> Decimal:
    """GPU budget at an hourly rate, rendered to cents."""
    if gpu_hours < 0 or hourly_rate < 0:
        raise ValueError("hours and rate must be nonnegative")
    amount = Decimal(str(gpu_hours)) * Decimal(str(hourly_rate))
    return amount.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP)


# ---------------------------------------------------------------------------
# Adapter invocation


@dataclass
class AdapterResult:
    kind: str
    command: list[str]
    exit_status: int
    started_at: str
    finished_at: str
    stdout_path: str
    stderr_path: str
    outputs: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def resolve_adapter(adapter: str | None) -> str:
    name = adapter or os.environ.get(ADAPTER_ENV, "")
    if not name:
        raise AdapterNotFound("(none configured)")
    if os.path.sep in name and os.path.isfile(name) and os.access(name, os.X_OK):
        return name
    found = shutil.which(name)
    if not found:
        raise AdapterNotFound(name)
    return found


def _read_checkpoints(path: Path) -> list[CheckpointRecord]:
    if not path.exists():
        raise ProtocolViolation(f"adapter wrote no checkpoints file: {path}")
    data = read_json(path)
    if not isinstance(data, list) or not data:
        raise ProtocolViolation(f"checkpoints file is not a nonempty array: {path}")
    records = []
    for i, row in enumerate(data):
        try:
            step, loss, ckpt = row["step"], row["eval_loss"], row["path"]
        except (TypeError, KeyError) as exc:
            raise ProtocolViolation(f"checkpoint entry {i} malformed in {path}") from exc
        if not isinstance(step, int) or step <= 0:
            raise ProtocolViolation(f"checkpoint entry {i} has bad step {step!r}")
        loss = float(loss)
        if loss != loss or loss in (float("inf"), float("-inf")):
            raise ProtocolViolation(f"checkpoint entry {i} has non-finite eval_loss")
        records.append(CheckpointRecord(step, loss, str(ckpt)))
    return records


def _read_completions(output: Path, expected_ids: list[str]) -> dict[str, str]:
    if not output.exists():
        raise ProtocolViolation(f"adapter wrote no completions file: {output}")
    completions: dict[str, str] = {}
    for row in read_jsonl(output):
        if "id" not in row or "completion" not in row:
            raise ProtocolViolation(f"completion row missing id/completion: {row}")
        if row["id"] in completions:
            raise ProtocolViolation(f"duplicate completion for id {row['id']}")
        completions[row["id"]] = row["completion"]
    for rid in expected_ids:
        if rid not in completions:
            raise ProtocolViolation(f"no completion for id {rid}")
    extra = set(completions) - set(expected_ids)
    if extra:
        raise ProtocolViolation(f"completion for unknown id {sorted(extra)[0]}")
    return completions


def invoke_adapter(kind: str, plan: PhasePlan, files: dict[str, str],
                   adapter: str | None = None, log_dir: str | Path = "logs",
                   ) -> AdapterResult:
    """Run one adapter process and validate its declared outputs.

    ``files`` carries the protocol paths: train needs train_file,
    eval_file, config_file and output_dir; infer needs model, prompts,
    output and max_new_tokens. Raises AdapterNotFound, AdapterFailed
    (nonzero exit, logs attached) or ProtocolViolation (missing or
    malformed outputs).
    """
    executable = resolve_adapter(adapter)
    if kind == "train":
        command = [executable, "train",
                   "--train-file", str(files["train_file"]),
                   "--eval-file", str(files["eval_file"]),
                   "--config", str(files["config_file"]),
                   "--output-dir", str(files["output_dir"])]
    elif kind == "infer":
        command = [executable, "infer",
                   "--model", str(files["model"]),
                   "--prompts", str(files["prompts"]),
                   "--output", str(files["output"]),
                   "--max-new-tokens", str(files["max_new_tokens"])]
    else:
        raise ValueError(f"unknown adapter kind {kind!r}")

    for key in ("train_file", "eval_file", "config_file", "prompts"):
        if key in files and not Path(files[key]).exists():
            raise ProtocolViolation(f"input file missing before invocation: {files[key]}")

    log_dir = Path(log_dir)
    log_dir.mkdir(parents=True, exist_ok=True)
    stdout_path = log_dir / f"{kind}.stdout.log"
    stderr_path = log_dir / f"{kind}.stderr.log"
    env = dict(os.environ)
    if kind == "train" and plan.checkpoint_every_steps is not None:
        env[CHECKPOINT_ENV] = str(plan.checkpoint_every_steps)

    started = datetime.now(timezone.utc).isoformat()
    with open(stdout_path, "wb") as out, open(stderr_path, "wb") as err:
        proc = subprocess.run(command, stdout=out, stderr=err, env=env)
    finished = datetime.now(timezone.utc).isoformat()

    result = AdapterResult(
        kind=kind, command=command, exit_status=proc.returncode,
        started_at=started, finished_at=finished,
        stdout_path=str(stdout_path), stderr_path=str(stderr_path),
    )
    if proc.returncode != 0:
        tail = stderr_path.read_text(encoding="utf-8", errors="replace")[-2000:]
        raise AdapterFailed(command, proc.returncode, tail)
    if kind == "train":
        checkpoints = Path(files["output_dir"]) / "checkpoints.json"
        _read_checkpoints(checkpoints)
        result.outputs["checkpoints"] = str(checkpoints)
    else:
        result.outputs["completions"] = str(files["output"])
    return result


# ---------------------------------------------------------------------------
# End-to-end execution


def _file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _fs_token(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "-" for c in name.lower())


def task_dir(runs_dir: str | Path, phase: str, model: ModelSpec,
             task: TaskKind | None) -> Path:
    token = task.value.lower() if task is not None else "all"
    return Path(runs_dir) / phase / _fs_token(model.name) / token


def build_phase_records(plan: PhasePlan, manifests: list[corpus.DatasetManifest],
                        pools: dict[TaskKind, instruct.PromptPool] | None = None,
                        ) -> dict[TaskKind, dict[str, list[InstructionRecord]]]:
    """Ingest, split and build per-task record groups for one plan.

    Sentiment sub-datasets are pooled under the SA task. Zero-shot plans
    build both the train tasks and the eval task in zero-shot mode.
    """
    pools = pools or {}
    needed = set(plan.tasks) | set(plan.eval_tasks)
    samples_by_dataset, _ = corpus.ingest(
        [m for m in manifests if m.task in needed])
    by_name = {m.name: m for m in manifests}
    groups: dict[TaskKind, dict[str, list[InstructionRecord]]] = {
        t: {"train": [], "test": []} for t in needed}
    for name in sorted(samples_by_dataset):
        manifest = by_name[name]
        samples = samples_by_dataset[name]
        pool = pools.get(manifest.task) or instruct.default_pool(manifest.task)
        train, test = corpus.apply_split(manifest, samples, plan.seed)
        vocabulary = manifest.label_vocabulary or None
        for split, part in (("train", train), ("test", test)):
            records = instruct.build_records(
                part, pool, plan.mode, split, plan.seed, vocabulary=vocabulary)
            groups[manifest.task][split].extend(records)
    return groups


def execute_run(plan: PhasePlan, manifests: list[corpus.DatasetManifest],
                runs_dir: str | Path, adapter: str | None = None,
                pools: dict[TaskKind, instruct.PromptPool] | None = None,
                manifest_inputs: dict[str, str] | None = None) -> list[Path]:
    """Run mix -> train -> infer -> score for one plan.

    Returns the written run-manifest paths (one per eval task). All
    artifacts land under runs/{phase}/{model}/{task}/; multi-task
    training artifacts are shared under the model's ``all`` directory.
    """
    single_task = plan.tasks[0] if plan.phase == "task_specific" else None
    train_dir = task_dir(runs_dir, plan.phase, plan.model,
                         single_task if plan.phase == "task_specific"
                         else (plan.eval_tasks[0] if plan.phase == "zero_shot" else None))
    train_dir.mkdir(parents=True, exist_ok=True)

    groups = build_phase_records(plan, manifests, pools)
    mix_plan, train_records, eval_records = mixer.assemble_phase(
        plan.phase, groups, plan.seed, task=single_task)
    mix_paths = mixer.write_mix(train_dir, mix_plan, train_records, eval_records,
                                task=single_task)

    config_path = train_dir / "config.json"
    write_json(config_path, plan.train_config.to_dict())
    checkpoints_dir = train_dir / "checkpoints"
    checkpoints_dir.mkdir(parents=True, exist_ok=True)

    train_result = invoke_adapter(
        "train", plan,
        {"train_file": mix_paths["train"], "eval_file": mix_paths["eval"],
         "config_file": config_path, "output_dir": checkpoints_dir},
        adapter=adapter, log_dir=train_dir / "logs")
    checkpoints = _read_checkpoints(checkpoints_dir / "checkpoints.json")
    selected = select_checkpoint(checkpoints)

    input_hashes = dict(manifest_inputs or {})
    for m in manifests:
        if Path(m.source_path).exists():
            input_hashes[m.source_path] = _file_sha256(m.source_path)

    vocab_by_dataset = {m.name: m.label_vocabulary for m in manifests}
    by_task: dict[TaskKind, list[InstructionRecord]] = {}
    for record in eval_records:
        by_task.setdefault(record.task, []).append(record)

    manifest_paths = []
    for eval_task in plan.eval_tasks:
        records = by_task.get(eval_task, [])
        out_dir = task_dir(runs_dir, plan.phase, plan.model, eval_task)
        out_dir.mkdir(parents=True, exist_ok=True)
        prompts_path = out_dir / "prompts.jsonl"
        answers_path = out_dir / "prompts.answers.jsonl"
        completions_path = out_dir / "completions.jsonl"
        write_jsonl(prompts_path, ({"id": r.id, "prompt": instruct.render(r, False)}
                                   for r in records))
        write_jsonl(answers_path, ({"id": r.id, "answer": r.answer} for r in records))
        infer_result = invoke_adapter(
            "infer", plan,
            {"model": selected.path, "prompts": prompts_path,
             "output": completions_path,
             "max_new_tokens": max_new_tokens_for(eval_task)},
            adapter=adapter, log_dir=out_dir / "logs")
        completions = _read_completions(completions_path, [r.id for r in records])
        reports = score_eval(records, completions, vocab_by_dataset)
        metrics_path = out_dir / "metrics.json"
        write_json(metrics_path, [r.to_dict() for r in reports])

        run_manifest = {
            "run_id": f"{plan.phase}-{_fs_token(plan.model.name)}-"
                      f"{eval_task.value.lower()}-{plan.seed}",
            "phase": plan.phase,
            "plan": plan.to_dict(),
            "train_config": plan.train_config.to_dict(),
            "mix_plan": str(mix_paths["plan"]),
            "input_hashes": input_hashes,
            "invocations": [train_result.to_dict(), infer_result.to_dict()],
            "artifacts": {
                "train_file": str(mix_paths["train"]),
                "eval_file": str(mix_paths["eval"]),
                "config_file": str(config_path),
                "prompts_file": str(prompts_path),
                "answers_file": str(answers_path),
                "completions_file": str(completions_path),
                "metrics_file": str(metrics_path),
            },
            "selected_checkpoint": selected.to_dict(),
            "notes": {},
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        if plan.phase == "zero_shot":
            run_manifest["notes"]["eval_loss_dataset"] = (
                "training eval loss is measured on the full neutral-filtered "
                "sentiment eval file")
        manifest_path = out_dir / "manifest.json"
        write_json(manifest_path, run_manifest)
        manifest_paths.append(manifest_path)
    return manifest_paths


def score_eval(records: list[InstructionRecord], completions: dict[str, str],
               vocab_by_dataset: dict[str, list[str]] | None = None,
               fallback_vocabulary: list[str] | None = None,
               ) -> list[scorer.MetricReport]:
    """Parse and score completions against eval records, per dataset.

    Classification options come from the records themselves when present
    (zero-shot mode), else the dataset vocabulary, else the sorted set
    of gold answers. NER/RE gold is recovered from the canonical answer
    serialization.
    """
    vocab_by_dataset = vocab_by_dataset or {}
    reports = []
    datasets: list[str] = []
    for r in records:
        if r.dataset not in datasets:
            datasets.append(r.dataset)
    for dataset in sorted(datasets):
        rows = [r for r in records if r.dataset == dataset]
        task = rows[0].task
        texts = [completions[r.id] for r in rows]
        if is_classification(task):
            if rows[0].options is not None:
                vocabulary = list(rows[0].options)
            elif vocab_by_dataset.get(dataset):
                vocabulary = list(vocab_by_dataset[dataset])
            elif fallback_vocabulary:
                vocabulary = list(fallback_vocabulary)
            else:
                vocabulary = sorted({r.answer for r in rows})
            preds = [scorer.parse_classification(t, vocabulary) for t in texts]
            reports.append(scorer.score_classification(
                [r.answer for r in rows], preds, vocabulary,
                task=task, dataset=dataset))
        elif task is TaskKind.NER:
            gold = [scorer.parse_entities(r.answer).entities or frozenset()
                    for r in rows]
            preds = [scorer.parse_entities(t) for t in texts]
            reports.append(scorer.score_ner(gold, preds, dataset=dataset))
        else:
            gold = [scorer.parse_relations(r.answer).relations or () for r in rows]
            preds = [scorer.parse_relations(t) for t in texts]
            reports.append(scorer.score_re(gold, preds, dataset=dataset))
    return reports
