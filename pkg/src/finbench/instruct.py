"""Instruction construction: samples -> renderable training records.

Two templates are used. The standard form is

    Instruction: {prompt}\\nInput: {input}\\nAnswer: {answer}

and the zero-shot form inserts an options section after the instruction:

    Instruction: {prompt}\\nOptions: {o1}/{o2}/...\\nInput: ...\\nAnswer: ...

Sections are newline-separated and options '/'-joined; this rendering is
canonical, injective for field values free of the section markers, and
parseable back with :func:`parse_rendered`. Prompts are drawn from a
per-task pool by a seeded uniform draw per record; in zero-shot training
records the option order is additionally randomized per record. Every
per-record draw is seeded from (seed, record id), so building records in
parallel shards reproduces the sequential output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .corpus import Sample
from .errors import MissingFile, PoolTaskMismatch, ZeroShotOnGenerationTask
from .jsonl import read_jsonl, write_jsonl
from .seeding import rng_for
from .tasks import TaskKind, is_classification

EMPTY_GOLD = "none"  # sentinel answer for NER/RE samples with empty gold


@dataclass
class PromptPool:
    """Per-task instruction texts; zero-shot pools are conventionally 10."""

    task: TaskKind
    prompts: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.prompts:
            raise ValueError(f"{self.task}: prompt pool is empty")
        if any(not p for p in self.prompts):
            raise ValueError(f"{self.task}: prompt pool contains an empty prompt")
        if len(set(self.prompts)) != len(self.prompts):
            raise ValueError(f"{self.task}: prompt pool contains duplicates")


@dataclass
class InstructionRecord:
    """One training/eval row; ``options`` is set only in zero-shot mode."""

    id: str
    task: TaskKind
    dataset: str
    split: str  # "train" | "test"
    instruction: str
    input: str
    answer: str
    source_sample_id: str
    options: tuple[str, ...] | None = None

    def to_dict(self) -> dict:
        row = {
            "id": self.id,
            "task": self.task.value,
            "dataset": self.dataset,
            "split": self.split,
            "instruction": self.instruction,
        }
        if self.options is not None:
            row["options"] = list(self.options)
        row["input"] = self.input
        row["answer"] = self.answer
        row["source_sample_id"] = self.source_sample_id
        return row

    @classmethod
    def from_dict(cls, row: dict) -> InstructionRecord:
        return cls(
            id=row["id"],
            task=TaskKind(row["task"]),
            dataset=row["dataset"],
            split=row["split"],
            instruction=row["instruction"],
            input=row["input"],
            answer=row["answer"],
            source_sample_id=row["source_sample_id"],
            options=tuple(row["options"]) if "options" in row else None,
        )


# Default pools: ten distinct instructions per task. These are
# serviceable stand-ins; swap in your own pool file for serious runs.
DEFAULT_PROMPTS: dict[TaskKind, tuple[str, ...]] = {
    TaskKind.SA: (
        "What is the sentiment of this financial text? Answer with negative, neutral, or positive.",
        "Decide whether the sentiment of the input is negative, neutral, or positive.",
        "Classify the tone of this financial statement as negative, neutral, or positive.",
        "Read the text and report its sentiment: negative, neutral, or positive.",
        "Judge the market sentiment expressed below. Reply with one word: negative, neutral, or positive.",
        "Assess the sentiment conveyed by the following financial news.",
        "Is the following text negative, neutral, or positive about the asset it discusses?",
        "Label the sentiment of the input text.",
        "Determine the financial sentiment of the passage.",
        "How would an investor read the sentiment of this text? Answer negative, neutral, or positive.",
    ),
    TaskKind.HC: (
        "Read the headline and the question about it. Answer Yes or No.",
        "Does the statement in the question hold for this headline? Reply Yes or No.",
        "Answer the question about the news headline with Yes or No.",
        "Given the headline, answer the accompanying question. Respond Yes or No only.",
        "Consider the headline and decide the question: Yes or No?",
        "Judge the question against the headline text and answer Yes or No.",
        "Based only on the headline, is the answer to the question Yes or No?",
        "Evaluate whether the question is true of the headline. Answer Yes or No.",
        "For the following headline, give a Yes or No answer to the question.",
        "Headline question answering: respond with exactly Yes or No.",
    ),
    TaskKind.NER: (
        "List every named entity in the input as 'surface, TYPE' entries separated by '; '. Answer none if there are no entities.",
        "Extract the named entities from the text. Format each as 'surface, TYPE' and join them with '; '; write none if empty.",
        "Identify all entities mentioned in the input and report them as 'surface, TYPE' pairs separated by '; '.",
        "Find the named entities in the following text. Give 'surface, TYPE' entries joined by '; ', or none.",
        "Tag the entities in the input. Output format: 'surface, TYPE' entries separated by '; '. Use none when empty.",
        "Which named entities occur in the text? Answer as 'surface, TYPE' items separated by '; ' (none if there are no entities).",
        "Recognize the entities in the sentence and list them as 'surface, TYPE' separated by '; '.",
        "Report every entity in the input in the form 'surface, TYPE', joined with '; '; answer none otherwise.",
        "Perform entity recognition on the text below. Use 'surface, TYPE' entries joined by '; ', or none.",
        "Scan the input for named entities and answer with 'surface, TYPE' entries separated by '; ' (or none).",
    ),
    TaskKind.RE: (
        "List the relations in the input as 'relation: subject, object' entries separated by '; '. Answer none if there are no relations.",
        "Extract every relation triple from the text in the form 'relation: subject, object', joined with '; '; write none if empty.",
        "Identify the relations expressed in the input and report them as 'relation: subject, object' separated by '; '.",
        "Find the relation triples in the following text. Give 'relation: subject, object' entries joined by '; ', or none.",
        "Which relations hold between entities in the text? Answer as 'relation: subject, object' items separated by '; ' (none if empty).",
        "Report each relation in the input in the form 'relation: subject, object', joined with '; '; answer none otherwise.",
        "Perform relation extraction on the text below. Use 'relation: subject, object' entries joined by '; ', or none.",
        "Detect the relations in the sentence and list them as 'relation: subject, object' separated by '; '.",
        "Give every relation stated in the input as 'relation: subject, object' entries separated by '; ' (or none).",
        "Extract the financial relations from the text as 'relation: subject, object' entries joined with '; '.",
    ),
    TaskKind.NER_CLS: (
        "What type of entity is the one named after the text? Answer with the entity type only.",
        "Classify the entity given below the text into its entity type.",
        "Decide the entity type of the marked entity.",
        "Given the sentence and an entity from it, name the entity's type.",
        "Report the type of the entity indicated after the input.",
        "Which entity type does the highlighted entity belong to?",
        "Assign an entity type to the entity mentioned after the sentence.",
        "Determine the category of the specified entity.",
        "Identify the entity type for the entity listed under the text.",
        "Label the given entity with its type.",
    ),
    TaskKind.RE_CLS: (
        "What relation holds between the subject and object named after the text? Answer with the relation only.",
        "Classify the relation between the given subject and object.",
        "Decide which relation connects the subject to the object below the text.",
        "Given the sentence and an entity pair, name the relation between them.",
        "Report the relation type linking the indicated subject and object.",
        "Which relation does the text express between the listed subject and object?",
        "Assign a relation type to the subject-object pair mentioned after the sentence.",
        "Determine the relation between the specified entities.",
        "Identify the relation for the subject and object listed under the text.",
        "Label the given entity pair with their relation.",
    ),
}


def default_pool(task: TaskKind) -> PromptPool:
    return PromptPool(task, DEFAULT_PROMPTS[task])


def load_pools(path: str | Path) -> dict[TaskKind, PromptPool]:
    """Read a pool file: a JSON map of task name -> list of prompts."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    return {TaskKind(k): PromptPool(TaskKind(k), tuple(v)) for k, v in data.items()}


def write_default_pool_file(path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = {task.value: list(prompts) for task, prompts in DEFAULT_PROMPTS.items()}
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2) + "\n",
                    encoding="utf-8")


# ---------------------------------------------------------------------------
# Gold serialization for the generation tasks


def render_gold(sample: Sample) -> str:
    """Canonical answer string for NER/RE gold; empty gold -> "none"."""
    if sample.task is TaskKind.NER:
        entries = [f"{e.surface}, {e.entity_type}" for e in sample.gold_entities or ()]
    elif sample.task is TaskKind.RE:
        entries = [f"{r.relation}: {r.subject}, {r.object}"
                   for r in sample.gold_relations or ()]
    else:
        raise ValueError(f"render_gold is for NER/RE, got {sample.task}")
    return "; ".join(entries) if entries else EMPTY_GOLD


# ---------------------------------------------------------------------------
# Record building and rendering


def build_records(samples: list[Sample], pool: PromptPool, mode: str,
                  split: str, seed: int,
                  vocabulary: list[str] | None = None) -> list[InstructionRecord]:
    """One record per sample, with a seeded prompt draw per record.

    mode "standard" renders the plain template; mode "zeroshot" attaches
    the label vocabulary as options (randomized per record on the train
    split, canonical order on test). ``vocabulary`` is required in
    zero-shot mode and must be the dataset's manifest order.
    """
    if mode not in ("standard", "zeroshot"):
        raise ValueError(f"unknown mode {mode!r}")
    if split not in ("train", "test"):
        raise ValueError(f"unknown split {split!r}")
    zeroshot = mode == "zeroshot"
    records = []
    for sample in samples:
        if sample.task is not pool.task:
            raise PoolTaskMismatch(
                f"pool is for {pool.task}, sample {sample.id} is {sample.task}")
        if zeroshot and not is_classification(sample.task):
            raise ZeroShotOnGenerationTask(
                f"zero-shot mode needs a classification task, got {sample.task}")
        rng = rng_for(seed, "record", sample.id)
        options = None
        if zeroshot:
            if not vocabulary:
                raise ValueError("zero-shot mode requires the label vocabulary")
            options = list(vocabulary)
            if split == "train":
                rng.shuffle(options)
            options = tuple(options)
        if is_classification(sample.task):
            answer = sample.gold_label or ""
        else:
            answer = render_gold(sample)
        records.append(InstructionRecord(
            id=sample.id,
            task=sample.task,
            dataset=sample.dataset,
            split=split,
            instruction=rng.choice(pool.prompts),
            input=sample.input_text,
            answer=answer,
            source_sample_id=sample.id,
            options=options,
        ))
    return records


def render(record: InstructionRecord, include_answer: bool) -> str:
    """Render a record into the canonical prompt text."""
    parts = [f"Instruction: {record.instruction}"]
    if record.options is not None:
        parts.append(f"Options: {'/'.join(record.options)}")
    parts.append(f"Input: {record.input}")
    text = "\n".join(parts) + "\nAnswer:"
    if include_answer:
        text += f" {record.answer}"
    return text


def parse_rendered(text: str) -> dict:
    """Invert :func:`render` on a fully rendered record.

    Returns {"instruction", "options" (list or None), "input", "answer"}.
    Valid for field values that do not themselves contain the section
    markers, which is what makes the template injective.
    """
    prefix = "Instruction: "
    if not text.startswith(prefix):
        raise ValueError("rendered text does not start with the instruction marker")
    answer_at = text.rfind("\nAnswer:")
    if answer_at < 0:
        raise ValueError("rendered text has no answer marker")
    head, answer = text[:answer_at], text[answer_at + len("\nAnswer:"):]
    answer = answer[1:] if answer.startswith(" ") else answer
    input_at = head.find("\nInput: ")
    if input_at < 0:
        raise ValueError("rendered text has no input marker")
    input_text = head[input_at + len("\nInput: "):]
    head = head[:input_at]
    options = None
    options_at = head.find("\nOptions: ")
    if options_at >= 0:
        options = head[options_at + len("\nOptions: "):].split("/")
        head = head[:options_at]
    return {
        "instruction": head[len(prefix):],
        "options": options,
        "input": input_text,
        "answer": answer,
    }


def write_records(path: str | Path, records: list[InstructionRecord]) -> int:
    return write_jsonl(path, (r.to_dict() for r in records))


def read_records(path: str | Path) -> list[InstructionRecord]:
    return [InstructionRecord.from_dict(row) for row in read_jsonl(path)]
