from __future__ import annotations

import random
from collections import Counter

import pytest

from finbench import instruct
from finbench.corpus import EntityMention, RelationTriple, Sample
from finbench.errors import PoolTaskMismatch, ZeroShotOnGenerationTask
from finbench.instruct import (
    InstructionRecord,
    PromptPool,
    build_records,
    default_pool,
    parse_rendered,
    render,
    render_gold,
)
from finbench.tasks import TaskKind

VOCAB = ["negative", "neutral", "positive"]


def sa_samples(n):
    return [Sample(id=f"sa-{i:06d}", dataset="sa", task=TaskKind.SA,
                   input_text=f"text {i}", gold_label=VOCAB[i % 3])
            for i in range(n)]


class TestPromptPool:
    def test_default_pools_are_ten_distinct(self):
        for task in TaskKind:
            pool = default_pool(task)
            assert len(pool.prompts) == 10
            assert len(set(pool.prompts)) == 10

    def test_empty_pool_rejected(self):
        with pytest.raises(ValueError):
            PromptPool(TaskKind.SA, ())

    def test_duplicate_prompts_rejected(self):
        with pytest.raises(ValueError):
            PromptPool(TaskKind.SA, ("a", "a"))

    def test_pool_file_round_trip(self, tmp_path):
        path = tmp_path / "pools.json"
        instruct.write_default_pool_file(path)
        pools = instruct.load_pools(path)
        assert set(pools) == set(TaskKind)
        assert pools[TaskKind.RE].prompts == default_pool(TaskKind.RE).prompts


class TestBuildRecords:
    def test_standard_mode_has_no_options(self):
        records = build_records(sa_samples(10), default_pool(TaskKind.SA),
                                "standard", "train", seed=1, vocabulary=VOCAB)
        assert len(records) == 10
        assert all(r.options is None for r in records)
        assert all(r.answer in VOCAB for r in records)
        assert all(r.source_sample_id == r.id for r in records)

    def test_zeroshot_test_split_canonical_order(self):
        records = build_records(sa_samples(1), default_pool(TaskKind.SA),
                                "zeroshot", "test", seed=1, vocabulary=VOCAB)
        assert records[0].options == tuple(VOCAB)

    def test_zeroshot_train_is_permutation_and_deterministic(self):
        first = build_records(sa_samples(1000), default_pool(TaskKind.SA),
                              "zeroshot", "train", seed=7, vocabulary=VOCAB)
        second = build_records(sa_samples(1000), default_pool(TaskKind.SA),
                               "zeroshot", "train", seed=7, vocabulary=VOCAB)
        assert first == second
        assert all(sorted(r.options) == sorted(VOCAB) for r in first)
        # randomization actually happens
        assert len({r.options for r in first}) > 1

    def test_zeroshot_on_generation_task_rejected(self):
        sample = Sample(id="n-0", dataset="ner", task=TaskKind.NER, input_text="t",
                        gold_entities=())
        with pytest.raises(ZeroShotOnGenerationTask):
            build_records([sample], default_pool(TaskKind.NER), "zeroshot",
                          "train", seed=0)

    def test_pool_mismatch_rejected(self):
        with pytest.raises(PoolTaskMismatch):
            build_records(sa_samples(1), default_pool(TaskKind.HC), "standard",
                          "train", seed=0)

    def test_answers_for_generation_tasks_use_gold_serialization(self):
        sample = Sample(id="n-0", dataset="ner", task=TaskKind.NER, input_text="t",
                        gold_entities=(EntityMention("Apple Inc", "ORG"),))
        record = build_records([sample], default_pool(TaskKind.NER), "standard",
                               "train", seed=0)[0]
        assert record.answer == "Apple Inc, ORG"

    def test_prompt_usage_roughly_uniform(self):
        pool = default_pool(TaskKind.SA)
        records = build_records(sa_samples(10000), pool, "standard", "train",
                                seed=3, vocabulary=VOCAB)
        shares = Counter(r.instruction for r in records)
        for prompt in pool.prompts:
            assert abs(shares[prompt] / 10000 - 0.1) < 0.05

    def test_byte_identical_stores(self, tmp_path):
        records = build_records(sa_samples(50), default_pool(TaskKind.SA),
                                "zeroshot", "train", seed=9, vocabulary=VOCAB)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        instruct.write_records(a, records)
        instruct.write_records(b, records)
        assert a.read_bytes() == b.read_bytes()
        assert instruct.read_records(a) == records


class TestRender:
    def record(self, **kw):
        base = dict(id="r", task=TaskKind.SA, dataset="sa", split="test",
                    instruction="What is the sentiment?", input="Shares rallied.",
                    answer="positive", source_sample_id="r")
        base.update(kw)
        return InstructionRecord(**base)

    def test_standard_with_answer(self):
        assert render(self.record(), True) == (
            "Instruction: What is the sentiment?\nInput: Shares rallied.\n"
            "Answer: positive")

    def test_without_answer_ends_at_marker(self):
        assert render(self.record(), False).endswith("Answer:")

    def test_options_section(self):
        text = render(self.record(options=("negative", "positive")), True)
        assert "\nOptions: negative/positive\n" in text
        assert parse_rendered(text)["options"] == ["negative", "positive"]

    def test_parse_back_recovers_fields(self):
        rng = random.Random(11)
        for i in range(200):
            options = None
            if rng.random() < 0.5:
                options = tuple(rng.sample(["a", "b", "c", "dd"], k=rng.randint(1, 4)))
            record = self.record(
                instruction=f"prompt {i}",
                input="line one\nline two" if rng.random() < 0.5 else f"input {i}",
                answer=f"answer {i}" if rng.random() < 0.5 else "none",
                options=options)
            parsed = parse_rendered(render(record, True))
            assert parsed["instruction"] == record.instruction
            assert parsed["input"] == record.input
            assert parsed["answer"] == record.answer
            assert parsed["options"] == (list(options) if options else None)


class TestRenderGold:
    def test_single_entity(self):
        sample = Sample(id="x", dataset="ner", task=TaskKind.NER, input_text="t",
                        gold_entities=(EntityMention("Apple Inc", "ORG"),))
        assert render_gold(sample) == "Apple Inc, ORG"

    def test_single_relation(self):
        sample = Sample(id="x", dataset="re", task=TaskKind.RE, input_text="t",
                        gold_relations=(RelationTriple("subsidiary", "AlphaCo", "BetaCo"),))
        assert render_gold(sample) == "subsidiary: AlphaCo, BetaCo"

    def test_empty_gold_sentinel(self):
        sample = Sample(id="x", dataset="ner", task=TaskKind.NER, input_text="t",
                        gold_entities=())
        assert render_gold(sample) == "none"

    def test_multiple_entries_joined(self):
        sample = Sample(id="x", dataset="ner", task=TaskKind.NER, input_text="t",
                        gold_entities=(EntityMention("Apple Inc", "ORG"),
                                       EntityMention("Tim Cook", "PER")))
        assert render_gold(sample) == "Apple Inc, ORG; Tim Cook, PER"

    def test_classification_rejected(self):
        sample = Sample(id="x", dataset="sa", task=TaskKind.SA, input_text="t",
                        gold_label="positive")
        with pytest.raises(ValueError):
            render_gold(sample)
