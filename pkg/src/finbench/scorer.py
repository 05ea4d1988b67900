"""Completion parsing and metric computation.

Free-form model completions are parsed into task predictions; anything
unparseable becomes an ``unparsed`` prediction that scores as wrong and
is counted separately rather than silently coerced. Metrics follow the
benchmark's conventions: support-weighted per-class F1 for
classification, micro-averaged entity-level F1 for NER (exact match on
normalized surface and case-folded type), and micro-averaged
relation-only F1 for RE (subject/object arguments ignored).

Scoring is pure and associative over disjoint shards: the TP/FP/FN
tallies merge by addition, so shards may be scored in parallel and
reduced at the end.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .corpus import EntityMention, RelationTriple, normalize_ws
from .errors import LengthMismatch
from .instruct import EMPTY_GOLD, InstructionRecord
from .tasks import TaskKind

LABEL = "label"
ENTITIES = "entities"
RELATIONS = "relations"
UNPARSED = "unparsed"


@dataclass(frozen=True)
class ParsedPrediction:
    """One parsed completion; exactly one payload matches ``kind``."""

    kind: str
    label: str | None = None
    entities: frozenset[EntityMention] | None = None
    relations: tuple[RelationTriple, ...] | None = None
    raw: str | None = None
    dropped_entries: int = 0

    @classmethod
    def of_label(cls, label: str) -> ParsedPrediction:
        return cls(LABEL, label=label)

    @classmethod
    def of_entities(cls, entities: frozenset[EntityMention],
                    dropped: int = 0) -> ParsedPrediction:
        return cls(ENTITIES, entities=entities, dropped_entries=dropped)

    @classmethod
    def of_relations(cls, relations: tuple[RelationTriple, ...],
                     dropped: int = 0) -> ParsedPrediction:
        return cls(RELATIONS, relations=relations, dropped_entries=dropped)

    @classmethod
    def of_unparsed(cls, raw: str) -> ParsedPrediction:
        return cls(UNPARSED, raw=raw)


@dataclass
class MetricReport:
    task: TaskKind
    dataset: str
    precision: float
    recall: float
    f1: float
    support: int
    unparsed_count: int
    macro_f1: float
    micro_f1: float
    dropped_entries: int

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "dataset": self.dataset,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "support": self.support,
            "unparsed_count": self.unparsed_count,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "dropped_entries": self.dropped_entries,
        }

    @classmethod
    def from_dict(cls, row: dict) -> MetricReport:
        return cls(task=TaskKind(row["task"]), dataset=row["dataset"],
                   precision=row["precision"], recall=row["recall"], f1=row["f1"],
                   support=row["support"], unparsed_count=row["unparsed_count"],
                   macro_f1=row["macro_f1"], micro_f1=row["micro_f1"],
                   dropped_entries=row["dropped_entries"])


def _f1(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def _ratio(num: int, den: int) -> float:
    return num / den if den > 0 else 0.0


# ---------------------------------------------------------------------------
# Parsing


def parse_classification(completion: str, options: list[str]) -> ParsedPrediction:
    """Pick the option whose case-insensitive occurrence comes first.

    Ties on position go to the longer option; if no option occurs in the
    completion the prediction is unparsed. The decision depends only on
    positions in the text, never on the order of the options list.
    """
    if not options:
        raise ValueError("options must be nonempty")
    folded = [o.casefold() for o in options]
    if len(set(folded)) != len(folded):
        raise ValueError("options must be distinct after case-folding")
    haystack = completion.casefold()
    best: tuple[int, int, str] | None = None
    for option, needle in zip(options, folded):
        pos = haystack.find(needle)
        if pos < 0:
            continue
        key = (pos, -len(needle), option)
        if best is None or key < best:
            best = key
    if best is None:
        return ParsedPrediction.of_unparsed(completion)
    return ParsedPrediction.of_label(best[2])


def parse_entities(completion: str) -> ParsedPrediction:
    """Invert the gold serialization: '; '-separated 'surface, TYPE'.

    Each entry splits on its last ', '; whitespace is normalized and the
    type case-folded. Entries without the separator are dropped and
    counted. The literal "none" means an empty prediction.
    """
    text = completion.strip()
    if not text:
        return ParsedPrediction.of_entities(frozenset())
    if text.casefold() == EMPTY_GOLD:
        return ParsedPrediction.of_entities(frozenset())
    mentions, dropped = set(), 0
    for entry in text.split("; "):
        if ", " not in entry:
            dropped += 1
            continue
        surface, etype = entry.rsplit(", ", 1)
        surface = normalize_ws(surface)
        etype = normalize_ws(etype).casefold()
        if not surface or not etype:
            dropped += 1
            continue
        mentions.add(EntityMention(surface, etype))
    return ParsedPrediction.of_entities(frozenset(mentions), dropped)


def parse_relations(completion: str) -> ParsedPrediction:
    """Invert the gold serialization: '; '-separated 'relation: subject, object'.

    Malformed entries are dropped and counted. Full triples are retained
    even though RE scoring consumes only the relation labels.
    """
    text = completion.strip()
    if not text:
        return ParsedPrediction.of_relations(())
    if text.casefold() == EMPTY_GOLD:
        return ParsedPrediction.of_relations(())
    triples, dropped = [], 0
    for entry in text.split("; "):
        if ": " not in entry:
            dropped += 1
            continue
        relation, rest = entry.split(": ", 1)
        if ", " not in rest:
            dropped += 1
            continue
        subject, obj = rest.rsplit(", ", 1)
        relation = normalize_ws(relation)
        subject, obj = normalize_ws(subject), normalize_ws(obj)
        if not relation or not subject or not obj:
            dropped += 1
            continue
        triples.append(RelationTriple(relation, subject, obj))
    return ParsedPrediction.of_relations(tuple(triples), dropped)


# ---------------------------------------------------------------------------
# Scoring


def score_classification(gold: list[str], pred: list[ParsedPrediction],
                         vocabulary: list[str], task: TaskKind = TaskKind.SA,
                         dataset: str = "") -> MetricReport:
    """Support-weighted per-class F1 over one-vs-rest counts.

    Unparsed predictions match no class: they cost the gold class recall
    but inflate no class's precision denominator. ``macro_f1`` averages
    the per-class F1 unweighted over the whole vocabulary; ``micro_f1``
    pools the counts.
    """
    if len(gold) != len(pred):
        raise LengthMismatch(len(gold), len(pred))
    vocab = list(vocabulary)
    known = set(vocab)
    for g in gold:
        if g not in known:
            raise ValueError(f"gold label {g!r} not in vocabulary")
    tp: Counter[str] = Counter()
    fp: Counter[str] = Counter()
    fn: Counter[str] = Counter()
    support: Counter[str] = Counter()
    unparsed = 0
    for g, p in zip(gold, pred):
        support[g] += 1
        if p.kind == LABEL:
            if p.label not in known:
                raise ValueError(f"predicted label {p.label!r} not in vocabulary")
            if p.label == g:
                tp[g] += 1
            else:
                fp[p.label] += 1
                fn[g] += 1
        else:
            unparsed += 1
            fn[g] += 1

    per_class_p = {c: _ratio(tp[c], tp[c] + fp[c]) for c in vocab}
    per_class_r = {c: _ratio(tp[c], tp[c] + fn[c]) for c in vocab}
    per_class_f1 = {c: _f1(per_class_p[c], per_class_r[c]) for c in vocab}

    total = sum(support.values())

    def weighted(table: dict[str, float]) -> float:
        return sum(support[c] * table[c] for c in vocab) / total if total else 0.0

    parsed_total = sum(tp.values()) + sum(fp.values())
    micro_p = _ratio(sum(tp.values()), parsed_total)
    micro_r = _ratio(sum(tp.values()), total)
    return MetricReport(
        task=task,
        dataset=dataset,
        precision=weighted(per_class_p),
        recall=weighted(per_class_r),
        f1=weighted(per_class_f1),
        support=total,
        unparsed_count=unparsed,
        macro_f1=sum(per_class_f1.values()) / len(vocab) if vocab else 0.0,
        micro_f1=_f1(micro_p, micro_r),
        dropped_entries=0,
    )


def _normalize_gold_entities(entities) -> set[EntityMention]:
    return {EntityMention(normalize_ws(e.surface), normalize_ws(e.entity_type).casefold())
            for e in entities}


def score_ner(gold: list, pred: list[ParsedPrediction],
              dataset: str = "") -> MetricReport:
    """Micro-averaged entity-level F1 over the corpus.

    A predicted mention counts as a true positive when its normalized
    surface and case-folded type exactly match a gold mention of the
    same sample. Samples where both sides are empty contribute nothing.
    """
    if len(gold) != len(pred):
        raise LengthMismatch(len(gold), len(pred))
    tp = fp = fn = 0
    unparsed = dropped = 0
    per_type: dict[str, list[int]] = {}
    for g, p in zip(gold, pred):
        gold_set = _normalize_gold_entities(g)
        if p.kind == ENTITIES:
            pred_set = set(p.entities or frozenset())
            dropped += p.dropped_entries
        else:
            pred_set = set()
            unparsed += 1
        hit = gold_set & pred_set
        tp += len(hit)
        fp += len(pred_set - gold_set)
        fn += len(gold_set - pred_set)
        for m in gold_set | pred_set:
            counts = per_type.setdefault(m.entity_type, [0, 0, 0])
            if m in hit:
                counts[0] += 1
            elif m in pred_set:
                counts[1] += 1
            else:
                counts[2] += 1

    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    type_f1s = [_f1(_ratio(t, t + f), _ratio(t, t + n))
                for _, (t, f, n) in sorted(per_type.items())]
    return MetricReport(
        task=TaskKind.NER,
        dataset=dataset,
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        support=tp + fn,
        unparsed_count=unparsed,
        macro_f1=sum(type_f1s) / len(type_f1s) if type_f1s else 0.0,
        micro_f1=_f1(precision, recall),
        dropped_entries=dropped,
    )


def score_re(gold: list, pred: list[ParsedPrediction],
             dataset: str = "") -> MetricReport:
    """Micro-averaged F1 over relation labels only.

    Per sample the gold and predicted relation-label multisets are
    intersected; subjects and objects are ignored, and a repeated gold
    label must be predicted as many times to earn full credit.
    """
    if len(gold) != len(pred):
        raise LengthMismatch(len(gold), len(pred))
    tp = fp = fn = 0
    unparsed = dropped = 0
    per_label: dict[str, list[int]] = {}
    for g, p in zip(gold, pred):
        gold_labels = Counter(t.relation for t in g)
        if p.kind == RELATIONS:
            pred_labels = Counter(t.relation for t in p.relations or ())
            dropped += p.dropped_entries
        else:
            pred_labels = Counter()
            unparsed += 1
        hit = gold_labels & pred_labels
        tp += sum(hit.values())
        fp += sum((pred_labels - gold_labels).values())
        fn += sum((gold_labels - pred_labels).values())
        for label in set(gold_labels) | set(pred_labels):
            counts = per_label.setdefault(label, [0, 0, 0])
            counts[0] += hit[label]
            counts[1] += (pred_labels - gold_labels)[label]
            counts[2] += (gold_labels - pred_labels)[label]

    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    label_f1s = [_f1(_ratio(t, t + f), _ratio(t, t + n))
                 for _, (t, f, n) in sorted(per_label.items())]
    return MetricReport(
        task=TaskKind.RE,
        dataset=dataset,
        precision=precision,
        recall=recall,
        f1=_f1(precision, recall),
        support=tp + fn,
        unparsed_count=unparsed,
        macro_f1=sum(label_f1s) / len(label_f1s) if label_f1s else 0.0,
        micro_f1=_f1(precision, recall),
        dropped_entries=dropped,
    )


def filter_neutral(records: list[InstructionRecord]) -> list[InstructionRecord]:
    """Drop records whose answer is "neutral" (case-folded), keeping order."""
    return [r for r in records if r.answer.casefold() != "neutral"]
