"""Synthetic fixture corpora at the reference cardinalities.

Generates the seven source datasets in their manifest-described file
shapes so the whole pipeline can run without the real (user-supplied)
data: sentiment files at 3634/938/9543/16184 rows, 11412 headline rows
with nine binary answers each, a 609-sentence NER corpus whose mention
count is exactly 1003, and a 6768-sentence relation corpus with exactly
9657 triples. A "small" scale keeps the same shapes at a few dozen rows
for fast tests. Generation is pure index arithmetic: identical calls
write identical bytes.

Run directly to materialize a corpus:  python -m finbench.fixtures OUT_DIR
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

from .jsonl import write_json, write_jsonl

SENTIMENTS = ("negative", "neutral", "positive")
ENTITY_TYPES = ("PER", "ORG", "LOC")
RELATIONS = ("subsidiary", "owner_of", "industry",
             "product_or_material_produced", "founded_by")

_COMPANIES = ("Alphacorp", "Borealis Capital", "Cedar Holdings", "Delta Mills",
              "Eastbrook Energy", "Fairway Bank", "Granite Partners", "Harbor Foods")
_PEOPLE = ("Avery Lane", "Bailey Cross", "Casey North", "Devon Hale",
           "Emerson Pike", "Finley Marsh")
_PLACES = ("London", "Frankfurt", "Singapore", "Toronto", "Zurich", "Oslo")
_MOVES = ("rallied", "slipped", "held steady", "surged", "retreated", "drifted")
_EVENTS = ("the earnings call", "a rating change", "new guidance",
           "the merger vote", "a supply update", "the quarterly report")

FULL_SIZES = {"fpb": 3634, "fiqa_sa": 938, "tfns": 9543, "nwgi": 16184,
              "headline_rows": 11412, "ner": 609, "ner_entities": 1003,
              "finred": 6768, "finred_relations": 9657}
SMALL_SIZES = {"fpb": 30, "fiqa_sa": 20, "tfns": 25, "nwgi": 24,
               "headline_rows": 6, "ner": 12, "ner_entities": 20,
               "finred": 10, "finred_relations": 15}


def _sentiment_text(name: str, i: int) -> str:
    company = _COMPANIES[i % len(_COMPANIES)]
    move = _MOVES[(i // 3) % len(_MOVES)]
    event = _EVENTS[(i // 7) % len(_EVENTS)]
    return f"{company} shares {move} after {event} ({name} note {i})."


def _unit_counts(samples: int, units: int, zero_tail: int) -> list[int]:
    """Per-sample unit counts in {0,1,2} summing exactly to ``units``."""
    extra = units - samples + zero_tail
    if not 0 <= extra <= samples - zero_tail:
        raise ValueError("unit plan not satisfiable with counts in {0,1,2}")
    counts = [1] * samples
    for i in range(extra):
        counts[i] = 2
    for i in range(samples - zero_tail, samples):
        counts[i] = 0
    return counts


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_corpus(root: str | Path, scale: str = "full") -> Path:
    """Write all source files plus a manifests.json; returns its path."""
    sizes = FULL_SIZES if scale == "full" else SMALL_SIZES
    root = Path(root)
    data = root / "data"
    data.mkdir(parents=True, exist_ok=True)

    _write_csv(data / "fpb.csv", ["sentence", "label"],
               [[_sentiment_text("fpb", i), SENTIMENTS[i % 3]]
                for i in range(sizes["fpb"])])
    write_jsonl(data / "fiqa_sa.jsonl",
                ({"sentence": _sentiment_text("fiqa", i), "sentiment": SENTIMENTS[(i + 1) % 3]}
                 for i in range(sizes["fiqa_sa"])))
    _write_csv(data / "tfns.csv", ["text", "label"],
               [[_sentiment_text("tfns", i), SENTIMENTS[(i + 2) % 3]]
                for i in range(sizes["tfns"])])
    write_jsonl(data / "nwgi.jsonl",
                ({"news": _sentiment_text("nwgi", i), "label": SENTIMENTS[i % 3]}
                 for i in range(sizes["nwgi"])))

    headline_rows = []
    for i in range(sizes["headline_rows"]):
        company = _COMPANIES[i % len(_COMPANIES)]
        move = _MOVES[i % len(_MOVES)]
        answers = ["1" if (i + q) % 2 == 0 else "0" for q in range(9)]
        headline_rows.append([f"{company} gold futures {move} in early trade", *answers])
    _write_csv(data / "headline.csv", ["headline", *(f"q{q}" for q in range(9))],
               headline_rows)

    ner_rows = []
    for i, count in enumerate(_unit_counts(sizes["ner"], sizes["ner_entities"], 2)):
        entities = []
        picks = [(_PEOPLE[i % len(_PEOPLE)], "PER"),
                 (_COMPANIES[i % len(_COMPANIES)], "ORG"),
                 (_PLACES[i % len(_PLACES)], "LOC")]
        for j in range(count):
            surface, etype = picks[(i + j) % 3]
            entities.append({"surface": surface, "entity_type": etype})
        mentioned = ", ".join(e["surface"] for e in entities) or "no one in particular"
        ner_rows.append({"text": f"Filing {i} names {mentioned} in the disclosure.",
                         "entities": entities})
    write_jsonl(data / "ner.jsonl", ner_rows)

    finred_rows = []
    for i, count in enumerate(_unit_counts(sizes["finred"], sizes["finred_relations"], 2)):
        relations = []
        for j in range(count):
            subject = _COMPANIES[(i + j) % len(_COMPANIES)]
            obj = _COMPANIES[(i + j + 1) % len(_COMPANIES)]
            relations.append({"relation": RELATIONS[(i + j) % len(RELATIONS)],
                              "subject": subject, "object": obj})
        pairs = "; ".join(f"{r['subject']} and {r['object']}" for r in relations)
        finred_rows.append({"text": f"Report {i} links {pairs or 'no parties'}.",
                            "relations": relations})
    write_jsonl(data / "finred.jsonl", finred_rows)

    sentiment_vocab = list(SENTIMENTS)
    headline_mapping = {"headline": "text"}
    headline_mapping.update({f"q{q}": f"q{q}" for q in range(9)})
    manifests = [
        {"name": "fpb", "task": "SA", "source_path": str(data / "fpb.csv"),
         "format": "csv", "field_mapping": {"sentence": "text", "label": "label"},
         "label_vocabulary": sentiment_vocab, "expected_count": sizes["fpb"],
         "split": None},
        {"name": "fiqa_sa", "task": "SA", "source_path": str(data / "fiqa_sa.jsonl"),
         "format": "json-lines",
         "field_mapping": {"sentence": "text", "sentiment": "label"},
         "label_vocabulary": sentiment_vocab, "expected_count": sizes["fiqa_sa"],
         "split": None},
        {"name": "tfns", "task": "SA", "source_path": str(data / "tfns.csv"),
         "format": "csv", "field_mapping": {"text": "text", "label": "label"},
         "label_vocabulary": sentiment_vocab, "expected_count": sizes["tfns"],
         "split": None},
        {"name": "nwgi", "task": "SA", "source_path": str(data / "nwgi.jsonl"),
         "format": "json-lines", "field_mapping": {"news": "text", "label": "label"},
         "label_vocabulary": sentiment_vocab, "expected_count": sizes["nwgi"],
         "split": None},
        {"name": "headline", "task": "HC", "source_path": str(data / "headline.csv"),
         "format": "csv", "field_mapping": headline_mapping,
         "label_vocabulary": ["Yes", "No"],
         "expected_count": sizes["headline_rows"] * 9, "split": None},
        {"name": "ner", "task": "NER", "source_path": str(data / "ner.jsonl"),
         "format": "json-lines",
         "field_mapping": {"text": "text", "entities": "entities"},
         "label_vocabulary": [], "expected_count": sizes["ner"], "split": None},
        {"name": "finred", "task": "RE", "source_path": str(data / "finred.jsonl"),
         "format": "json-lines",
         "field_mapping": {"text": "text", "relations": "relations"},
         "label_vocabulary": [], "expected_count": sizes["finred"], "split": None},
        {"name": "ner_cls", "task": "NER_CLS", "source_path": str(data / "ner.jsonl"),
         "format": "json-lines",
         "field_mapping": {"text": "text", "entities": "entities"},
         "label_vocabulary": list(ENTITY_TYPES),
         "expected_count": sizes["ner_entities"], "split": None},
        {"name": "re_cls", "task": "RE_CLS", "source_path": str(data / "finred.jsonl"),
         "format": "json-lines",
         "field_mapping": {"text": "text", "relations": "relations"},
         "label_vocabulary": list(RELATIONS),
         "expected_count": sizes["finred_relations"], "split": None},
    ]
    manifests_path = root / "manifests.json"
    write_json(manifests_path, manifests)
    return manifests_path


def main(argv: list[str] | None = None) -> int:
    args = argv if argv is not None else sys.argv[1:]
    if not args or len(args) > 2:
        print("usage: python -m finbench.fixtures OUT_DIR [full|small]",
              file=sys.stderr)
        return 2
    scale = args[1] if len(args) == 2 else "full"
    path = write_corpus(args[0], scale=scale)
    print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
