from __future__ import annotations

import json
import random

import pytest

from finbench import corpus
from finbench.corpus import (
    DatasetManifest,
    EntityMention,
    RelationTriple,
    Sample,
    derive_ner_cls,
    derive_re_cls,
    expand_headline,
    load_dataset,
    split_samples,
    validate_counts,
)
from finbench.errors import (
    CountMismatch,
    MalformedRow,
    MissingFile,
    MissingQuestionAnswer,
    UnknownLabel,
)
from finbench.tasks import TaskKind


def sa_manifest(path, expected=None, fmt="csv", mapping=None):
    return DatasetManifest(
        name="mini_sa", task=TaskKind.SA, source_path=str(path), format=fmt,
        field_mapping=mapping or {"sentence": "text", "label": "label"},
        label_vocabulary=["negative", "neutral", "positive"],
        expected_count=expected)


def write_sa_csv(path, rows):
    lines = ["sentence,label"] + [f"{text},{label}" for text, label in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestLoadDataset:
    def test_csv_load_and_ids(self, tmp_path):
        src = tmp_path / "sa.csv"
        write_sa_csv(src, [("shares rallied", "positive"), ("shares fell", "negative")])
        samples = load_dataset(sa_manifest(src, expected=2))
        assert [s.id for s in samples] == ["mini_sa-000000", "mini_sa-000001"]
        assert [s.gold_label for s in samples] == ["positive", "negative"]
        assert all(s.task is TaskKind.SA for s in samples)

    def test_tsv_load(self, tmp_path):
        src = tmp_path / "sa.tsv"
        src.write_text("sentence\tlabel\nmarkets up\tpositive\n", encoding="utf-8")
        samples = load_dataset(sa_manifest(src, fmt="tsv"))
        assert len(samples) == 1 and samples[0].input_text == "markets up"

    def test_jsonl_load(self, tmp_path):
        src = tmp_path / "sa.jsonl"
        src.write_text('{"sentence": "flat day", "label": "neutral"}\n', encoding="utf-8")
        samples = load_dataset(sa_manifest(src, fmt="json-lines"))
        assert samples[0].gold_label == "neutral"

    def test_empty_file_expected_zero(self, tmp_path):
        src = tmp_path / "sa.csv"
        write_sa_csv(src, [])
        assert load_dataset(sa_manifest(src, expected=0)) == []

    def test_count_mismatch_after_deleting_a_row(self, tmp_path):
        src = tmp_path / "sa.csv"
        write_sa_csv(src, [("a", "positive"), ("b", "negative")])
        with pytest.raises(CountMismatch) as err:
            load_dataset(sa_manifest(src, expected=3))
        assert err.value.expected == 3 and err.value.actual == 2

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            load_dataset(sa_manifest(tmp_path / "nope.csv"))

    def test_unknown_label(self, tmp_path):
        src = tmp_path / "sa.csv"
        write_sa_csv(src, [("a", "bullish")])
        with pytest.raises(UnknownLabel):
            load_dataset(sa_manifest(src))

    def test_malformed_json_line(self, tmp_path):
        src = tmp_path / "sa.jsonl"
        src.write_text("{not json}\n", encoding="utf-8")
        with pytest.raises(MalformedRow):
            load_dataset(sa_manifest(src, fmt="json-lines"))

    def test_missing_mapped_column(self, tmp_path):
        src = tmp_path / "sa.jsonl"
        src.write_text('{"sentence": "no label here"}\n', encoding="utf-8")
        with pytest.raises(MalformedRow):
            load_dataset(sa_manifest(src, fmt="json-lines"))

    def test_loading_is_deterministic(self, small_manifests):
        by_name = {m.name: m for m in small_manifests}
        first = load_dataset(by_name["finred"])
        second = load_dataset(by_name["finred"])
        assert first == second

    def test_duplicate_rows_are_kept(self, tmp_path):
        src = tmp_path / "sa.csv"
        write_sa_csv(src, [("same row", "positive")] * 3)
        assert len(load_dataset(sa_manifest(src))) == 3


class TestManifest:
    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown keys"):
            DatasetManifest.from_dict({
                "name": "x", "task": "SA", "source_path": "x", "format": "csv",
                "surprise": 1})

    def test_vocabulary_required_for_classification(self, tmp_path):
        with pytest.raises(ValueError, match="label_vocabulary"):
            DatasetManifest(name="x", task=TaskKind.SA, source_path="x", format="csv")

    def test_vocabulary_forbidden_for_generation(self):
        with pytest.raises(ValueError, match="label_vocabulary"):
            DatasetManifest(name="x", task=TaskKind.NER, source_path="x",
                            format="csv", label_vocabulary=["PER"])


class TestExpandHeadline:
    def test_one_row_yields_nine(self):
        rows = [{"headline": "Gold climbs", "answers": ["Yes"] * 9}]
        samples = expand_headline(rows)
        assert len(samples) == 9
        assert sorted(s.meta["question_index"] for s in samples) == [str(q) for q in range(9)]
        assert all(s.gold_label == "Yes" for s in samples)
        assert all("Gold climbs" in s.input_text for s in samples)

    def test_two_rows_unique_pairs(self):
        rows = [{"headline": f"h{i}", "answers": ["No"] * 9} for i in range(2)]
        samples = expand_headline(rows)
        assert len(samples) == 18
        pairs = {(s.meta["headline_row"], s.meta["question_index"]) for s in samples}
        assert len(pairs) == 18

    def test_missing_answer(self):
        rows = [{"headline": "h", "answers": ["Yes"] * 8}]
        with pytest.raises(MissingQuestionAnswer):
            expand_headline(rows)

    def test_answer_normalization_via_manifest(self, small_manifests):
        by_name = {m.name: m for m in small_manifests}
        samples = load_dataset(by_name["headline"])
        assert {s.gold_label for s in samples} == {"Yes", "No"}
        assert len(samples) == 9 * (len(samples) // 9)


class TestDerivations:
    def ner_sample(self, i, entities):
        return Sample(id=f"ner-{i:06d}", dataset="ner", task=TaskKind.NER,
                      input_text=f"sentence {i}",
                      gold_entities=tuple(EntityMention(s, t) for s, t in entities))

    def re_sample(self, i, relations):
        return Sample(id=f"finred-{i:06d}", dataset="finred", task=TaskKind.RE,
                      input_text=f"sentence {i}",
                      gold_relations=tuple(RelationTriple(r, s, o)
                                           for r, s, o in relations))

    def test_ner_cls_zero_entities(self):
        assert derive_ner_cls([self.ner_sample(0, [])]) == []

    def test_ner_cls_one_per_entity(self):
        derived = derive_ner_cls(
            [self.ner_sample(0, [("Apple", "ORG"), ("London", "LOC")])])
        assert [d.gold_label for d in derived] == ["ORG", "LOC"]
        assert derived[0].input_text == "sentence 0\nEntity: Apple"
        assert derived[0].meta["source_sample_id"] == "ner-000000"
        assert derived[0].task is TaskKind.NER_CLS

    def test_re_cls_shared_subject_distinct_ids(self):
        derived = derive_re_cls(
            [self.re_sample(0, [("owner_of", "A", "B"), ("subsidiary", "A", "C")])])
        assert len({d.id for d in derived}) == 2
        assert derived[1].input_text == "sentence 0\nSubject: A Object: C"
        assert [d.gold_label for d in derived] == ["owner_of", "subsidiary"]

    def test_re_cls_zero_triples(self):
        assert derive_re_cls([self.re_sample(0, [])]) == []

    def test_wrong_task_rejected(self):
        sample = Sample(id="x", dataset="d", task=TaskKind.SA, input_text="t",
                        gold_label="positive")
        with pytest.raises(ValueError):
            derive_ner_cls([sample])
        with pytest.raises(ValueError):
            derive_re_cls([sample])

    def test_derived_count_equals_unit_sum(self):
        rng = random.Random(13)
        ner = [self.ner_sample(i, [(f"e{i}_{j}", "PER") for j in range(rng.randint(0, 4))])
               for i in range(50)]
        re_ = [self.re_sample(i, [("owner_of", f"s{j}", f"o{j}")
                                  for j in range(rng.randint(0, 4))])
               for i in range(50)]
        assert len(derive_ner_cls(ner)) == sum(len(s.gold_entities) for s in ner)
        assert len(derive_re_cls(re_)) == sum(len(s.gold_relations) for s in re_)
        # order follows (sample order, unit order)
        derived = derive_ner_cls(ner)
        sources = [d.meta["source_sample_id"] for d in derived]
        assert sources == sorted(sources)


class TestValidateCounts:
    def test_empty_is_vacuous_pass(self):
        report = validate_counts({})
        assert report.passed and report.entries == []

    def test_mismatch_fails_overall(self):
        stub = Sample(id="x", dataset="fiqa_sa", task=TaskKind.SA,
                      input_text="t", gold_label="positive")
        report = validate_counts({"fiqa_sa": [stub] * 937})
        assert not report.passed
        entry = report.entries[0]
        assert (entry.expected, entry.actual, entry.ok) == (938, 937, False)

    def test_explicit_expectation_wins(self):
        stub = Sample(id="x", dataset="fpb", task=TaskKind.SA,
                      input_text="t", gold_label="positive")
        report = validate_counts({"fpb": [stub] * 10}, expected={"fpb": 10})
        assert report.passed

    def test_unknown_dataset_passes_vacuously(self):
        stub = Sample(id="x", dataset="other", task=TaskKind.SA,
                      input_text="t", gold_label="positive")
        report = validate_counts({"other": [stub]})
        assert report.passed and report.entries[0].expected is None


class TestStoreRoundTrip:
    def test_all_tasks_round_trip(self, tmp_path, small_manifests):
        loaded, report = corpus.ingest(small_manifests)
        assert report.passed
        for name, samples in loaded.items():
            path = tmp_path / f"{name}.jsonl"
            corpus.write_samples(path, samples)
            assert corpus.read_samples(path) == samples

    def test_store_schema_keys(self, tmp_path, small_manifests):
        loaded, _ = corpus.ingest(small_manifests)
        path = tmp_path / "ner.jsonl"
        corpus.write_samples(path, loaded["ner"])
        row = json.loads(path.read_text(encoding="utf-8").splitlines()[0])
        assert list(row) == ["id", "dataset", "task", "input", "gold", "meta"]


class TestSplits:
    def samples(self, n):
        return [Sample(id=f"d-{i:06d}", dataset="d", task=TaskKind.SA,
                       input_text=f"t{i}", gold_label="positive") for i in range(n)]

    def test_fraction_and_determinism(self):
        samples = self.samples(100)
        train1, test1 = split_samples(samples, test_fraction=0.2, seed=5)
        train2, test2 = split_samples(samples, test_fraction=0.2, seed=5)
        assert (train1, test1) == (train2, test2)
        assert len(test1) == 20 and len(train1) == 80
        assert {s.id for s in train1} | {s.id for s in test1} == {s.id for s in samples}
        assert not {s.id for s in train1} & {s.id for s in test1}

    def test_order_preserved(self):
        samples = self.samples(50)
        train, test = split_samples(samples, seed=1)
        assert [s.id for s in train] == sorted(s.id for s in train)
        assert [s.id for s in test] == sorted(s.id for s in test)

    def test_explicit_ids(self):
        samples = self.samples(4)
        train, test = split_samples(samples, test_ids={"d-000001", "d-000003"})
        assert [s.id for s in test] == ["d-000001", "d-000003"]

    def test_ids_path_spec(self, tmp_path):
        samples = self.samples(4)
        ids_file = tmp_path / "test_ids.txt"
        ids_file.write_text("d-000000\n", encoding="utf-8")
        manifest = DatasetManifest(
            name="d", task=TaskKind.SA, source_path="unused", format="csv",
            label_vocabulary=["positive"],
            split={"test_ids_path": str(ids_file)})
        train, test = corpus.apply_split(manifest, samples, seed=0)
        assert [s.id for s in test] == ["d-000000"] and len(train) == 3
