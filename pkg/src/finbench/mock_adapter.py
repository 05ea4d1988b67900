"""Mock adapter: a protocol-conformant stand-in for real fine-tuning.

Speaks exactly the runner's adapter CLI. ``train`` writes a synthetic
checkpoints.json (losses strictly decreasing then flat, one entry per
FINBENCH_CHECKPOINT_EVERY_STEPS steps) plus a small model file recording
the majority training label. ``infer`` emits one completion per prompt
id according to FINBENCH_MOCK_BEHAVIOR:

    echo_gold       replay the answers sidecar next to the prompts file
                    (<prompts minus .jsonl>.answers.jsonl)
    majority_class  the most frequent training answer
    fixed_string    the constant FINBENCH_MOCK_FIXED_STRING ("positive")

Behavior rides environment variables because the adapter argument list
is fixed by the protocol.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter
from pathlib import Path

from .jsonl import read_jsonl, write_json, write_jsonl

BEHAVIOR_ENV = "FINBENCH_MOCK_BEHAVIOR"
FIXED_STRING_ENV = "FINBENCH_MOCK_FIXED_STRING"
CHECKPOINT_ENV = "FINBENCH_CHECKPOINT_EVERY_STEPS"
BEHAVIORS = ("echo_gold", "majority_class", "fixed_string")

MODEL_FILE = "mockmodel.json"
SYNTHETIC_LOSSES = (0.9, 0.7, 0.5, 0.5)


def _behavior() -> str:
    behavior = os.environ.get(BEHAVIOR_ENV, "echo_gold")
    if behavior not in BEHAVIORS:
        raise SystemExit(f"unknown {BEHAVIOR_ENV}={behavior!r}")
    return behavior


def _majority_answer(rows: list[dict]) -> str:
    counts = Counter(row.get("answer", "") for row in rows)
    if not counts:
        return ""
    # ties break lexicographically for determinism
    best = max(sorted(counts), key=lambda a: counts[a])
    return best


def mock_train(train_file: str, eval_file: str, config: str, output_dir: str) -> None:
    for path in (train_file, eval_file, config):
        if not Path(path).exists():
            raise SystemExit(f"missing input file: {path}")
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = list(read_jsonl(train_file))
    write_json(out / MODEL_FILE, {
        "majority_label": _majority_answer(rows),
        "train_rows": len(rows),
        "config": json.loads(Path(config).read_text(encoding="utf-8")),
    })
    every = int(os.environ.get(CHECKPOINT_ENV, "100"))
    checkpoints = [
        {"step": every * (i + 1), "eval_loss": loss, "path": str(out)}
        for i, loss in enumerate(SYNTHETIC_LOSSES)
    ]
    write_json(out / "checkpoints.json", checkpoints)


def mock_infer(model: str, prompts: str, output: str, max_new_tokens: int) -> None:
    behavior = _behavior()
    prompts_path = Path(prompts)
    if not prompts_path.exists():
        raise SystemExit(f"missing prompts file: {prompts}")
    ids = [row["id"] for row in read_jsonl(prompts_path)]

    if behavior == "fixed_string":
        constant = os.environ.get(FIXED_STRING_ENV, "positive")
        completions = {rid: constant for rid in ids}
    elif behavior == "majority_class":
        model_file = Path(model) / MODEL_FILE
        if not model_file.exists():
            raise SystemExit(f"majority_class needs {MODEL_FILE} under --model")
        label = json.loads(model_file.read_text(encoding="utf-8"))["majority_label"]
        completions = {rid: label for rid in ids}
    else:
        sidecar = prompts_path.with_name(
            prompts_path.name.removesuffix(".jsonl") + ".answers.jsonl")
        if not sidecar.exists():
            raise SystemExit(f"echo_gold needs the answers sidecar: {sidecar}")
        answers = {row["id"]: row["answer"] for row in read_jsonl(sidecar)}
        missing = [rid for rid in ids if rid not in answers]
        if missing:
            raise SystemExit(f"answers sidecar is missing id {missing[0]}")
        completions = {rid: answers[rid] for rid in ids}

    write_jsonl(output, ({"id": rid, "completion": completions[rid]} for rid in ids))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="finbench-mock-adapter",
                                     description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    train = sub.add_parser("train")
    train.add_argument("--train-file", required=True)
    train.add_argument("--eval-file", required=True)
    train.add_argument("--config", required=True)
    train.add_argument("--output-dir", required=True)
    infer = sub.add_parser("infer")
    infer.add_argument("--model", required=True)
    infer.add_argument("--prompts", required=True)
    infer.add_argument("--output", required=True)
    infer.add_argument("--max-new-tokens", type=int, required=True)
    args = parser.parse_args(argv)
    if args.command == "train":
        mock_train(args.train_file, args.eval_file, args.config, args.output_dir)
    else:
        mock_infer(args.model, args.prompts, args.output, args.max_new_tokens)
    return 0


if __name__ == "__main__":
    sys.exit(main())
