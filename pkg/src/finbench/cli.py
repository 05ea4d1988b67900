"""Single executable exposing the pipeline as subcommands.

    finbench ingest --manifests FILE      normalized stores + count report
    finbench build  --task T --mode M     instruction record stores
    finbench mix    --phase P             mix plan + train/eval files
    finbench run    --phase P --model M   end-to-end plan/train/infer/score
    finbench score  --gold F --completions F
    finbench report --runs DIR
    finbench cost   --hours H --rate R

A JSON config file (via --config or $FINBENCH_CONFIG) can predefine
paths, the adapter and the global seed; command-line flags override it.
Every subcommand is idempotent for fixed inputs and seed, and --seed
fully determines all randomized behavior it reaches.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus, errors, instruct, mixer, report, runner
from .jsonl import read_jsonl, write_json
from .tasks import TaskKind

CONFIG_ENV = "FINBENCH_CONFIG"

# Stable exit codes per error family (also rendered into --help).
ERROR_EXIT_CODES: list[tuple[type[Exception], int, str]] = [
    (errors.MissingFile, 3, "a referenced file does not exist"),
    (errors.MissingQuestionAnswer, 4, "a source row is malformed"),
    (errors.MalformedRow, 4, "a source row is malformed"),
    (errors.CountMismatch, 5, "sample accounting failed"),
    (errors.UnknownLabel, 6, "a label is outside the vocabulary"),
    (errors.PoolTaskMismatch, 7, "prompt pool does not match the task"),
    (errors.ZeroShotOnGenerationTask, 7, "zero-shot mode needs a classification task"),
    (errors.EmptyGroup, 8, "a task group is empty"),
    (errors.EmptyRecords, 8, "no records to select from"),
    (errors.MissingTask, 8, "phase assembly is missing a task"),
    (errors.UnknownPhase, 8, "unknown phase"),
    (errors.InvalidOverride, 8, "invalid plan override"),
    (errors.AdapterNotFound, 9, "adapter executable not found"),
    (errors.AdapterFailed, 10, "adapter exited nonzero"),
    (errors.ProtocolViolation, 11, "adapter output violates the file protocol"),
    (errors.LengthMismatch, 12, "gold/prediction lengths differ"),
]
EXIT_COUNT_FAILURE = 5


def exit_code_for(exc: Exception) -> int:
    for klass, code, _ in ERROR_EXIT_CODES:
        if isinstance(exc, klass):
            return code
    return 1


def _epilog() -> str:
    seen = {}
    for _, code, reason in ERROR_EXIT_CODES:
        seen.setdefault(code, reason)
    lines = ["exit codes:", "  0   success", "  1   unexpected error",
             "  2   usage error"]
    lines += [f"  {code:<3} {reason}" for code, reason in sorted(seen.items())]
    return "\n".join(lines)


@dataclass
class CliConfig:
    manifests: str | None = None
    prompt_pools: str | None = None
    samples_dir: str = "samples"
    records_dir: str = "records"
    mixes_dir: str = "mixes"
    runs_dir: str = "runs"
    adapter: str | None = None
    seed: int = 0
    overrides: dict = field(default_factory=dict)


def load_config(path: str | None) -> CliConfig:
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return CliConfig()
    if not Path(path).exists():
        raise errors.MissingFile(path)
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    known = set(CliConfig().__dict__)
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"config has unknown keys: {sorted(unknown)}")
    config = CliConfig(**data)
    if not 0 <= int(config.seed) < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return config


def _pick(flag, configured, default=None):
    if flag is not None:
        return flag
    if configured is not None:
        return configured
    return default


def _load_inputs(args, config: CliConfig):
    manifests_path = _pick(args.manifests, config.manifests)
    if not manifests_path:
        raise errors.MissingFile("(no manifests file given; use --manifests)")
    manifests = corpus.load_manifests(manifests_path)
    pools_path = _pick(getattr(args, "pools", None), config.prompt_pools)
    pools = instruct.load_pools(pools_path) if pools_path else None
    return manifests_path, manifests, pools


def _seed(args, config: CliConfig) -> int:
    seed = _pick(args.seed, config.seed, 0)
    seed = int(seed)
    if not 0 <= seed < 2 ** 64:
        raise ValueError("seed must be a 64-bit unsigned integer")
    return seed


# ---------------------------------------------------------------------------
# Subcommands


def cmd_ingest(args, config: CliConfig) -> int:
    _, manifests, _ = _load_inputs(args, config)
    loaded, count_report = corpus.ingest(manifests)
    out_dir = Path(_pick(args.out, config.samples_dir))
    for name in sorted(loaded):
        corpus.write_samples(out_dir / f"{name}.jsonl", loaded[name])
    write_json(out_dir / "count_report.json", count_report.to_dict())
    for entry in count_report.entries:
        expected = "-" if entry.expected is None else str(entry.expected)
        status = "ok" if entry.ok else "FAIL"
        print(f"{entry.dataset:<12} expected {expected:>8}  "
              f"actual {entry.actual:>8}  {status}")
    print(f"overall: {'pass' if count_report.passed else 'FAIL'}")
    return 0 if count_report.passed else EXIT_COUNT_FAILURE


def cmd_build(args, config: CliConfig) -> int:
    _, manifests, pools = _load_inputs(args, config)
    seed = _seed(args, config)
    task = TaskKind(args.task)
    out_dir = Path(_pick(args.out, config.records_dir))
    selected = [m for m in manifests if m.task is task]
    if not selected:
        raise errors.MissingTask("build", task.value)
    loaded, _ = corpus.ingest(selected)
    pool = (pools or {}).get(task) or instruct.default_pool(task)
    by_name = {m.name: m for m in selected}
    for name in sorted(loaded):
        manifest = by_name[name]
        train, test = corpus.apply_split(manifest, loaded[name], seed)
        vocabulary = manifest.label_vocabulary or None
        for split, part in (("train", train), ("test", test)):
            records = instruct.build_records(part, pool, args.mode, split, seed,
                                             vocabulary=vocabulary)
            path = out_dir / f"{name}.{args.mode}.{split}.jsonl"
            instruct.write_records(path, records)
            print(f"{path} ({len(records)} records)")
    return 0


def cmd_mix(args, config: CliConfig) -> int:
    _, manifests, pools = _load_inputs(args, config)
    seed = _seed(args, config)
    task = TaskKind(args.task) if args.task else None
    out_dir = Path(_pick(args.out, config.mixes_dir))
    if args.phase == "task_specific" and task is None:
        raise errors.MissingTask("task_specific", "(pass --task)")
    mode = "zeroshot" if args.phase == "zero_shot" else "standard"
    plan_tasks = ([task] if task is not None else
                  list(mixer.MULTI_TASK_TASKS) if args.phase == "multi_task"
                  else list(mixer.ZERO_SHOT_TRAIN_TASKS))
    eval_tasks = ([task] if task is not None else
                  list(mixer.MULTI_TASK_TASKS) if args.phase == "multi_task"
                  else [mixer.ZERO_SHOT_EVAL_TASK])
    plan = runner.PhasePlan(
        phase=args.phase, model=runner.ModelSpec("mix"), tasks=plan_tasks,
        per_task_epochs={}, eval_tasks=eval_tasks, mode=mode,
        drop_neutral_eval=args.phase == "zero_shot",
        checkpoint_every_steps=None, seed=seed,
        train_config=runner.TrainConfig())
    groups = runner.build_phase_records(plan, manifests, pools)
    mix_plan, train, eval_records = mixer.assemble_phase(
        args.phase, groups, seed, task=task)
    paths = mixer.write_mix(out_dir, mix_plan, train, eval_records, task=task)
    print(f"{paths['train']} ({len(train)} records)")
    print(f"{paths['eval']} ({len(eval_records)} records)")
    print(paths["plan"])
    return 0


def cmd_run(args, config: CliConfig) -> int:
    manifests_path, manifests, pools = _load_inputs(args, config)
    seed = _seed(args, config)
    adapter = _pick(args.adapter, config.adapter)
    runs_dir = Path(_pick(args.runs, config.runs_dir))
    model = runner.PRESET_MODELS.get(args.model, runner.ModelSpec(args.model))
    overrides = dict(config.overrides or {})
    plans = runner.plan_run(args.phase, [model], overrides=overrides or None,
                            seed=seed)
    if args.task:
        wanted = TaskKind(args.task)
        plans = [p for p in plans if wanted in p.tasks]
        if not plans:
            raise errors.MissingTask(args.phase, wanted.value)
    inputs = {str(manifests_path): runner._file_sha256(manifests_path)}
    for plan in plans:
        paths = runner.execute_run(plan, manifests, runs_dir, adapter=adapter,
                                   pools=pools, manifest_inputs=inputs)
        for path in paths:
            print(path)
    return 0


def cmd_score(args, config: CliConfig) -> int:
    records = instruct.read_records(args.gold)
    completions: dict[str, str] = {}
    for row in read_jsonl(args.completions):
        if "id" not in row or "completion" not in row:
            raise errors.ProtocolViolation(f"completion row missing id/completion: {row}")
        if row["id"] in completions:
            raise errors.ProtocolViolation(f"duplicate completion for id {row['id']}")
        completions[row["id"]] = row["completion"]
    for record in records:
        if record.id not in completions:
            raise errors.ProtocolViolation(f"no completion for id {record.id}")
    extra = set(completions) - {r.id for r in records}
    if extra:
        raise errors.ProtocolViolation(f"completion for unknown id {sorted(extra)[0]}")
    labels = args.labels.split(",") if args.labels else None
    reports = runner.score_eval(records, completions, fallback_vocabulary=labels)
    out = Path(args.out) if args.out else Path("metrics.json")
    write_json(out, [r.to_dict() for r in reports])
    for r in reports:
        print(f"{r.dataset:<12} {r.task.value:<8} f1={r.f1:.4f} "
              f"p={r.precision:.4f} r={r.recall:.4f} "
              f"support={r.support} unparsed={r.unparsed_count}")
    print(out)
    return 0


def cmd_report(args, config: CliConfig) -> int:
    runs_dir = Path(_pick(args.runs, config.runs_dir))
    grid = report.load_grid(runs_dir)
    out_dir = Path(args.out) if args.out else runs_dir
    csv_path, txt_path = report.write_report(grid, out_dir)
    print(txt_path.read_text(encoding="utf-8"))
    print(f"wrote {csv_path} and {txt_path}")
    return 0


def cmd_cost(args, config: CliConfig) -> int:
    print(runner.estimate_cost(args.hours, args.rate))
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finbench",
        description="Financial-NLP instruction-tuning benchmark harness.",
        epilog=_epilog(),
        formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help=f"JSON config file (default ${CONFIG_ENV})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load datasets, write stores + count report")
    p.add_argument("--manifests")
    p.add_argument("--out", help="output directory for sample stores")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="build instruction record stores for one task")
    p.add_argument("--task", required=True, choices=[t.value for t in TaskKind])
    p.add_argument("--mode", default="standard", choices=["standard", "zeroshot"])
    p.add_argument("--seed", type=int)
    p.add_argument("--manifests")
    p.add_argument("--pools")
    p.add_argument("--out")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("mix", help="assemble a phase's train/eval mix")
    p.add_argument("--phase", required=True, choices=list(mixer.PHASES))
    p.add_argument("--seed", type=int)
    p.add_argument("--task", help="task for the task_specific phase")
    p.add_argument("--manifests")
    p.add_argument("--pools")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mix)

    p = sub.add_parser("run", help="end-to-end mix/train/infer/score for one model")
    p.add_argument("--phase", required=True, choices=list(mixer.PHASES))
    p.add_argument("--model", required=True)
    p.add_argument("--adapter")
    p.add_argument("--task", help="restrict task_specific runs to one task")
    p.add_argument("--seed", type=int)
    p.add_argument("--manifests")
    p.add_argument("--pools")
    p.add_argument("--runs")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("score", help="score a completions file against eval records")
    p.add_argument("--gold", required=True)
    p.add_argument("--completions", required=True)
    p.add_argument("--labels", help="comma-separated vocabulary fallback")
    p.add_argument("--out")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="render rankings/gains tables from a runs tree")
    p.add_argument("--runs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("cost", help="estimate GPU cost")
    p.add_argument("--hours", type=float, required=True)
    p.add_argument("--rate", type=float, required=True)
    p.set_defaults(func=cmd_cost)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
        return args.func(args, config)
    except errors.FinbenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code_for(exc)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
