"""Dataset ingestion: user-supplied files -> normalized samples.

The seven source datasets arrive in whatever shape the user obtained
them (csv, tsv or json-lines); a manifest per dataset maps source
columns onto the semantic fields each task needs. Loading normalizes
every row into a :class:`Sample`, derives the two classification
variants (one sample per gold entity / per gold relation), and checks
sample accounting against the reference cardinalities.

All operations here are pure given the input files: identical manifest
and file bytes always yield the identical sample list.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import (
    CountMismatch,
    MalformedRow,
    MissingFile,
    MissingQuestionAnswer,
    UnknownLabel,
)
from .jsonl import read_jsonl, write_jsonl
from .seeding import rng_for
from .tasks import TaskKind, is_classification

MANIFEST_KEYS = (
    "name",
    "task",
    "source_path",
    "format",
    "field_mapping",
    "label_vocabulary",
    "expected_count",
    "split",
)

FORMATS = ("csv", "tsv", "json-lines")

# Reference per-dataset cardinalities used by validate_counts when the
# caller supplies no expectation of its own. headline counts the
# expanded samples (11412 rows x 9 questions).
DEFAULT_EXPECTED_COUNTS = {
    "fpb": 3634,
    "fiqa_sa": 938,
    "tfns": 9543,
    "nwgi": 16184,
    "ner": 609,
    "headline": 11412 * 9,
    "finred": 6768,
    "ner_cls": 1003,
    "re_cls": 9657,
}

HEADLINE_QUESTION_FIELDS = tuple(f"q{i}" for i in range(9))

# Default wordings for the nine fixed binary questions asked about each
# headline; callers may substitute their own list of the same length.
HEADLINE_QUESTIONS = (
    "Does the headline talk about price?",
    "Does the headline say that price went up?",
    "Does the headline say that price went down?",
    "Does the headline say that price stayed constant?",
    "Does the headline talk about price in the past?",
    "Does the headline talk about price in the future?",
    "Does the headline talk about a past event?",
    "Does the headline talk about a future event?",
    "Does the headline compare two assets?",
)

_WS = re.compile(r"\s+")


def normalize_ws(text: str) -> str:
    """Trim and collapse internal whitespace (entity-surface identity)."""
    return _WS.sub(" ", text.strip())


@dataclass(frozen=True)
class EntityMention:
    surface: str
    entity_type: str


@dataclass(frozen=True)
class RelationTriple:
    relation: str
    subject: str
    object: str


@dataclass
class Sample:
    """One normalized gold example.

    Exactly one of the gold_* fields is set, matching the task shape:
    ``gold_label`` for classification tasks, ``gold_entities`` for NER,
    ``gold_relations`` for RE. Entity/relation order follows the source
    file.
    """

    id: str
    dataset: str
    task: TaskKind
    input_text: str
    gold_label: str | None = None
    gold_entities: tuple[EntityMention, ...] | None = None
    gold_relations: tuple[RelationTriple, ...] | None = None
    meta: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        if self.task in (TaskKind.NER,):
            gold = {"entities": [{"surface": e.surface, "entity_type": e.entity_type}
                                 for e in self.gold_entities or ()]}
        elif self.task in (TaskKind.RE,):
            gold = {"relations": [{"relation": r.relation, "subject": r.subject,
                                   "object": r.object}
                                  for r in self.gold_relations or ()]}
        else:
            gold = {"label": self.gold_label}
        return {
            "id": self.id,
            "dataset": self.dataset,
            "task": self.task.value,
            "input": self.input_text,
            "gold": gold,
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, row: dict) -> Sample:
        task = TaskKind(row["task"])
        gold = row["gold"]
        sample = cls(
            id=row["id"],
            dataset=row["dataset"],
            task=task,
            input_text=row["input"],
            meta=dict(row.get("meta", {})),
        )
        if "entities" in gold:
            sample.gold_entities = tuple(
                EntityMention(e["surface"], e["entity_type"]) for e in gold["entities"]
            )
        elif "relations" in gold:
            sample.gold_relations = tuple(
                RelationTriple(r["relation"], r["subject"], r["object"])
                for r in gold["relations"]
            )
        else:
            sample.gold_label = gold["label"]
        return sample


@dataclass
class DatasetManifest:
    """Declares where one dataset lives and how to read it.

    ``field_mapping`` maps source columns to the semantic fields the
    task shape requires: ``text`` plus ``label`` (classification),
    ``entities`` (NER), ``relations`` (RE), or ``q0``..``q8`` (headline
    answer columns). ``label_vocabulary`` must be nonempty exactly for
    classification-shaped tasks; for the derived NER_CLS / RE_CLS
    manifests it enumerates the entity-type / relation vocabulary.
    """

    name: str
    task: TaskKind
    source_path: str
    format: str
    field_mapping: dict[str, str] = field(default_factory=dict)
    label_vocabulary: list[str] = field(default_factory=list)
    expected_count: int | None = None
    split: dict | None = None

    def __post_init__(self) -> None:
        if self.format not in FORMATS:
            raise ValueError(f"{self.name}: unknown format {self.format!r}")
        if is_classification(self.task) and not self.label_vocabulary:
            raise ValueError(f"{self.name}: classification task needs label_vocabulary")
        if not is_classification(self.task) and self.label_vocabulary:
            raise ValueError(f"{self.name}: label_vocabulary must be empty for {self.task}")
        if self.expected_count is not None and self.expected_count < 0:
            raise ValueError(f"{self.name}: expected_count must be nonnegative")

    @classmethod
    def from_dict(cls, obj: dict) -> DatasetManifest:
        unknown = set(obj) - set(MANIFEST_KEYS)
        if unknown:
            raise ValueError(f"manifest has unknown keys: {sorted(unknown)}")
        return cls(
            name=obj["name"],
            task=TaskKind(obj["task"]),
            source_path=obj["source_path"],
            format=obj["format"],
            field_mapping=dict(obj.get("field_mapping") or {}),
            label_vocabulary=list(obj.get("label_vocabulary") or []),
            expected_count=obj.get("expected_count"),
            split=obj.get("split"),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "task": self.task.value,
            "source_path": self.source_path,
            "format": self.format,
            "field_mapping": self.field_mapping,
            "label_vocabulary": self.label_vocabulary,
            "expected_count": self.expected_count,
            "split": self.split,
        }


def load_manifests(path: str | Path) -> list[DatasetManifest]:
    path = Path(path)
    if not path.exists():
        raise MissingFile(str(path))
    with open(path, encoding="utf-8") as fh:
        objs = json.load(fh)
    return [DatasetManifest.from_dict(o) for o in objs]


# ---------------------------------------------------------------------------
# Raw row parsing


def _iter_source_rows(manifest: DatasetManifest) -> list[dict]:
    path = Path(manifest.source_path)
    if not path.exists():
        raise MissingFile(str(path))
    if manifest.format == "json-lines":
        rows = []
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                line = line.strip()
                if not line:
                    continue
                try:
                    rows.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise MalformedRow(manifest.name, i, f"bad JSON: {exc}") from exc
        return rows
    delim = "," if manifest.format == "csv" else "\t"
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh, delimiter=delim))


def _mapped(manifest: DatasetManifest, row: dict, row_idx: int, semantic: str,
            required: bool = True) -> object:
    for col, sem in manifest.field_mapping.items():
        if sem == semantic:
            if col not in row or row[col] is None:
                if required:
                    raise MalformedRow(manifest.name, row_idx, f"missing column {col!r}")
                return None
            return row[col]
    if required:
        raise ValueError(
            f"{manifest.name}: field_mapping does not cover semantic field {semantic!r}"
        )
    return None


def _structured_cell(manifest: DatasetManifest, value: object, row_idx: int) -> list:
    """Entity/relation cells: a list already, or a JSON string (csv/tsv)."""
    if isinstance(value, list):
        return value
    if isinstance(value, str):
        text = value.strip()
        if not text:
            return []
        try:
            parsed = json.loads(text)
        except json.JSONDecodeError as exc:
            raise MalformedRow(manifest.name, row_idx, f"bad structured cell: {exc}") from exc
        if not isinstance(parsed, list):
            raise MalformedRow(manifest.name, row_idx, "structured cell is not a list")
        return parsed
    raise MalformedRow(manifest.name, row_idx, f"unusable structured cell: {value!r}")


def _parse_entities_cell(manifest: DatasetManifest, value: object,
                         row_idx: int) -> tuple[EntityMention, ...]:
    mentions = []
    for item in _structured_cell(manifest, value, row_idx):
        if isinstance(item, dict):
            surface, etype = item.get("surface"), item.get("entity_type")
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            surface, etype = item
        else:
            raise MalformedRow(manifest.name, row_idx, f"bad entity entry: {item!r}")
        if not isinstance(surface, str) or not isinstance(etype, str):
            raise MalformedRow(manifest.name, row_idx, f"bad entity entry: {item!r}")
        surface = normalize_ws(surface)
        if not surface:
            raise MalformedRow(manifest.name, row_idx, "empty entity surface")
        mentions.append(EntityMention(surface, etype.strip()))
    return tuple(mentions)


def _parse_relations_cell(manifest: DatasetManifest, value: object,
                          row_idx: int) -> tuple[RelationTriple, ...]:
    triples = []
    for item in _structured_cell(manifest, value, row_idx):
        if isinstance(item, dict):
            rel = item.get("relation")
            subj, obj = item.get("subject"), item.get("object")
        elif isinstance(item, (list, tuple)) and len(item) == 3:
            rel, subj, obj = item
        else:
            raise MalformedRow(manifest.name, row_idx, f"bad relation entry: {item!r}")
        if not all(isinstance(v, str) for v in (rel, subj, obj)):
            raise MalformedRow(manifest.name, row_idx, f"bad relation entry: {item!r}")
        subj, obj = normalize_ws(subj), normalize_ws(obj)
        if not subj or not obj:
            raise MalformedRow(manifest.name, row_idx, "empty relation argument")
        triples.append(RelationTriple(rel.strip(), subj, obj))
    return tuple(triples)


_YES = {"yes", "y", "1", "true"}
_NO = {"no", "n", "0", "false"}


def _headline_answer(manifest: DatasetManifest, row: dict, row_idx: int,
                     q_idx: int) -> str:
    value = _mapped(manifest, row, row_idx, HEADLINE_QUESTION_FIELDS[q_idx],
                    required=False)
    if value is None or (isinstance(value, str) and not value.strip()):
        raise MissingQuestionAnswer(manifest.name, row_idx, q_idx)
    text = str(value).strip().lower()
    if text in _YES:
        return "Yes"
    if text in _NO:
        return "No"
    raise MalformedRow(manifest.name, row_idx, f"unrecognized answer {value!r} for q{q_idx}")


def _sample_id(dataset: str, index: int) -> str:
    return f"{dataset}-{index:06d}"


# ---------------------------------------------------------------------------
# Loading


def load_dataset(manifest: DatasetManifest,
                 base_samples: list[Sample] | None = None) -> list[Sample]:
    """Load one dataset into normalized samples.

    Derived manifests (task NER_CLS / RE_CLS) parse their source as the
    generation task and return the derived classification samples, so
    their ``expected_count`` checks the post-derivation cardinality.
    ``base_samples`` lets a caller hand in already-loaded generation
    samples (see :func:`ingest`) so derived meta points at real ids.
    Raises MissingFile, MalformedRow, UnknownLabel or CountMismatch.
    """
    if manifest.task is TaskKind.NER_CLS:
        if base_samples is None:
            base_samples = _load_generation(manifest, TaskKind.NER,
                                            dataset=f"{manifest.name}.src")
        samples = derive_ner_cls(base_samples, dataset=manifest.name)
        _check_derived_labels(manifest, samples)
    elif manifest.task is TaskKind.RE_CLS:
        if base_samples is None:
            base_samples = _load_generation(manifest, TaskKind.RE,
                                            dataset=f"{manifest.name}.src")
        samples = derive_re_cls(base_samples, dataset=manifest.name)
        _check_derived_labels(manifest, samples)
    elif manifest.task is TaskKind.HC:
        if set(manifest.label_vocabulary) != {"Yes", "No"}:
            raise ValueError(f"{manifest.name}: headline vocabulary must be Yes/No")
        samples = expand_headline(_headline_rows(manifest), dataset=manifest.name)
    elif manifest.task is TaskKind.SA:
        samples = _load_classification(manifest)
    elif manifest.task is TaskKind.NER:
        samples = _load_generation(manifest, TaskKind.NER)
    elif manifest.task is TaskKind.RE:
        samples = _load_generation(manifest, TaskKind.RE)
    else:  # pragma: no cover - TaskKind is closed
        raise ValueError(f"unsupported task {manifest.task}")

    if manifest.expected_count is not None and len(samples) != manifest.expected_count:
        raise CountMismatch(manifest.name, manifest.expected_count, len(samples))
    return samples


def _load_classification(manifest: DatasetManifest) -> list[Sample]:
    vocabulary = set(manifest.label_vocabulary)
    samples = []
    for i, row in enumerate(_iter_source_rows(manifest)):
        text = str(_mapped(manifest, row, i, "text")).strip()
        label = str(_mapped(manifest, row, i, "label")).strip()
        if label not in vocabulary:
            raise UnknownLabel(manifest.name, i, label)
        samples.append(Sample(
            id=_sample_id(manifest.name, i),
            dataset=manifest.name,
            task=manifest.task,
            input_text=text,
            gold_label=label,
        ))
    return samples


def _load_generation(manifest: DatasetManifest, task: TaskKind,
                     dataset: str | None = None) -> list[Sample]:
    dataset = dataset or manifest.name
    samples = []
    for i, row in enumerate(_iter_source_rows(manifest)):
        text = str(_mapped(manifest, row, i, "text")).strip()
        sample = Sample(
            id=_sample_id(dataset, i),
            dataset=dataset,
            task=task,
            input_text=text,
        )
        if task is TaskKind.NER:
            cell = _mapped(manifest, row, i, "entities")
            sample.gold_entities = _parse_entities_cell(manifest, cell, i)
        else:
            cell = _mapped(manifest, row, i, "relations")
            sample.gold_relations = _parse_relations_cell(manifest, cell, i)
        samples.append(sample)
    return samples


def _headline_rows(manifest: DatasetManifest) -> list[dict]:
    rows = []
    for i, row in enumerate(_iter_source_rows(manifest)):
        headline = str(_mapped(manifest, row, i, "text")).strip()
        answers = [_headline_answer(manifest, row, i, q) for q in range(9)]
        rows.append({"headline": headline, "answers": answers})
    return rows


def expand_headline(rows: list[dict], dataset: str = "headline",
                    questions: tuple[str, ...] = HEADLINE_QUESTIONS) -> list[Sample]:
    """Expand raw headline rows into 9 yes/no samples per row.

    Each raw row is ``{"headline": str, "answers": [nine "Yes"/"No"]}``.
    The question wording is embedded in the input text; meta records the
    source row and question index.
    """
    if len(questions) != 9:
        raise ValueError("expected exactly 9 headline questions")
    samples = []
    for i, row in enumerate(rows):
        answers = row["answers"]
        for q in range(9):
            if q >= len(answers) or answers[q] not in ("Yes", "No"):
                raise MissingQuestionAnswer(dataset, i, q)
            samples.append(Sample(
                id=_sample_id(dataset, len(samples)),
                dataset=dataset,
                task=TaskKind.HC,
                input_text=f"{row['headline']}\nQuestion: {questions[q]}",
                gold_label=answers[q],
                meta={"headline_row": str(i), "question_index": str(q)},
            ))
    return samples


def derive_ner_cls(ner_samples: list[Sample], dataset: str = "ner_cls") -> list[Sample]:
    """One entity-type classification sample per gold entity mention.

    Output order follows (source sample order, entity order); the target
    entity is appended to the sentence on its own line.
    """
    out = []
    for sample in ner_samples:
        if sample.task is not TaskKind.NER:
            raise ValueError(f"derive_ner_cls got a {sample.task} sample")
        for j, mention in enumerate(sample.gold_entities or ()):
            out.append(Sample(
                id=_sample_id(dataset, len(out)),
                dataset=dataset,
                task=TaskKind.NER_CLS,
                input_text=f"{sample.input_text}\nEntity: {mention.surface}",
                gold_label=mention.entity_type,
                meta={"source_sample_id": sample.id, "entity_index": str(j)},
            ))
    return out


def derive_re_cls(re_samples: list[Sample], dataset: str = "re_cls") -> list[Sample]:
    """One relation-type classification sample per gold relation triple."""
    out = []
    for sample in re_samples:
        if sample.task is not TaskKind.RE:
            raise ValueError(f"derive_re_cls got a {sample.task} sample")
        for j, triple in enumerate(sample.gold_relations or ()):
            out.append(Sample(
                id=_sample_id(dataset, len(out)),
                dataset=dataset,
                task=TaskKind.RE_CLS,
                input_text=(f"{sample.input_text}\nSubject: {triple.subject} "
                            f"Object: {triple.object}"),
                gold_label=triple.relation,
                meta={"source_sample_id": sample.id, "relation_index": str(j)},
            ))
    return out


def _check_derived_labels(manifest: DatasetManifest, samples: list[Sample]) -> None:
    vocabulary = set(manifest.label_vocabulary)
    for sample in samples:
        if sample.gold_label not in vocabulary:
            raise UnknownLabel(manifest.name, int(sample.id.rsplit("-", 1)[1]),
                               sample.gold_label or "")


def ingest(manifests: list[DatasetManifest]) -> tuple[dict[str, list[Sample]], CountReport]:
    """Load every manifest and report the sample accounting.

    Base datasets load first; a derived manifest whose ``source_path``
    matches a loaded generation dataset derives from those samples
    (keeping real source ids in meta) instead of re-parsing the file.
    """
    derived = {TaskKind.NER_CLS: TaskKind.NER, TaskKind.RE_CLS: TaskKind.RE}
    loaded: dict[str, list[Sample]] = {}
    base = [m for m in manifests if m.task not in derived]
    for m in base:
        loaded[m.name] = load_dataset(m)
    for m in manifests:
        if m.task not in derived:
            continue
        source = next((loaded[b.name] for b in base
                       if b.source_path == m.source_path and b.task is derived[m.task]),
                      None)
        loaded[m.name] = load_dataset(m, base_samples=source)
    explicit = {m.name: m.expected_count for m in manifests
                if m.expected_count is not None}
    return loaded, validate_counts(loaded, expected=explicit or None)


# ---------------------------------------------------------------------------
# Accounting


@dataclass
class CountEntry:
    dataset: str
    expected: int | None
    actual: int
    ok: bool


@dataclass
class CountReport:
    entries: list[CountEntry]

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.entries)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "datasets": [
                {"dataset": e.dataset, "expected": e.expected,
                 "actual": e.actual, "ok": e.ok}
                for e in self.entries
            ],
        }


def validate_counts(samples_by_dataset: dict[str, list[Sample]],
                    expected: dict[str, int] | None = None) -> CountReport:
    """Compare loaded sample counts to expectations.

    Expectations come from ``expected`` when given, falling back to the
    reference cardinalities for known dataset names; datasets with no
    expectation on record pass vacuously. Failures are report entries,
    never exceptions.
    """
    entries = []
    for name in sorted(samples_by_dataset):
        actual = len(samples_by_dataset[name])
        want = None
        if expected and name in expected:
            want = expected[name]
        elif name in DEFAULT_EXPECTED_COUNTS:
            want = DEFAULT_EXPECTED_COUNTS[name]
        entries.append(CountEntry(name, want, actual, want is None or want == actual))
    return CountReport(entries)


# ---------------------------------------------------------------------------
# Splits and the sample store


def split_samples(samples: list[Sample], *, test_fraction: float = 0.2,
                  seed: int = 0, test_ids: set[str] | None = None,
                  ) -> tuple[list[Sample], list[Sample]]:
    """Deterministic train/test partition, preserving input order.

    With ``test_ids`` the membership is explicit; otherwise a seeded
    draw puts round(n * test_fraction) samples in the test split. The
    seed is scoped by dataset name so sibling datasets split
    independently.
    """
    if test_ids is not None:
        train = [s for s in samples if s.id not in test_ids]
        test = [s for s in samples if s.id in test_ids]
        return train, test
    n = len(samples)
    n_test = round(n * test_fraction)
    dataset = samples[0].dataset if samples else ""
    rng = rng_for(seed, "split", dataset)
    chosen = set(rng.sample(range(n), n_test))
    train = [s for i, s in enumerate(samples) if i not in chosen]
    test = [s for i, s in enumerate(samples) if i in chosen]
    return train, test


def apply_split(manifest: DatasetManifest, samples: list[Sample],
                seed: int) -> tuple[list[Sample], list[Sample]]:
    """Split per the manifest's split spec, defaulting to a seeded 20%."""
    spec = manifest.split or {}
    if "test_ids_path" in spec:
        path = Path(spec["test_ids_path"])
        if not path.exists():
            raise MissingFile(str(path))
        ids = {line.strip() for line in path.read_text(encoding="utf-8").splitlines()
               if line.strip()}
        return split_samples(samples, test_ids=ids)
    if "test_ids" in spec:
        return split_samples(samples, test_ids=set(spec["test_ids"]))
    return split_samples(
        samples,
        test_fraction=float(spec.get("test_fraction", 0.2)),
        seed=int(spec["seed"]) if "seed" in spec else seed,
    )


def write_samples(path: str | Path, samples: list[Sample]) -> int:
    return write_jsonl(path, (s.to_dict() for s in samples))


def read_samples(path: str | Path) -> list[Sample]:
    return [Sample.from_dict(row) for row in read_jsonl(path)]
