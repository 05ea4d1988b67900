from __future__ import annotations

import hashlib
import json
import random
from collections import Counter

import pytest

from finbench import mixer
from finbench.errors import EmptyGroup, MissingTask, UnknownPhase
from finbench.instruct import InstructionRecord
from finbench.mixer import assemble_phase, mix_basename, oversample, write_mix
from finbench.tasks import TaskKind


def record(task, i, split="train", answer="positive", options=None,
           dataset=None):
    return InstructionRecord(
        id=f"{(dataset or task.value.lower())}-{i:06d}", task=task,
        dataset=dataset or task.value.lower(), split=split,
        instruction="do the thing", input=f"input {i}", answer=answer,
        source_sample_id=f"{(dataset or task.value.lower())}-{i:06d}",
        options=options)


def group(task, n, **kw):
    return [record(task, i, **kw) for i in range(n)]


class TestOversample:
    def test_100_30_reaches_200_with_three_or_four_repeats(self):
        groups = {TaskKind.SA: group(TaskKind.SA, 100),
                  TaskKind.HC: group(TaskKind.HC, 30)}
        out = oversample(groups, seed=5)
        assert len(out) == 200
        hc_counts = Counter(r.id for r in out if r.task is TaskKind.HC)
        assert sum(hc_counts.values()) == 100
        assert set(hc_counts.values()) <= {3, 4}
        assert len(hc_counts) == 30

    def test_equal_groups_identity_up_to_order(self):
        groups = {TaskKind.SA: group(TaskKind.SA, 50),
                  TaskKind.HC: group(TaskKind.HC, 50)}
        out = oversample(groups, seed=5)
        assert Counter(r.id for r in out) == Counter(
            r.id for rs in groups.values() for r in rs)

    def test_deterministic_stream(self):
        groups = {TaskKind.SA: group(TaskKind.SA, 7),
                  TaskKind.HC: group(TaskKind.HC, 3)}
        digests = set()
        for _ in range(3):
            out = oversample(groups, seed=42)
            payload = json.dumps([r.id for r in out]).encode()
            digests.add(hashlib.sha256(payload).hexdigest())
        assert len(digests) == 1

    def test_empty_group_rejected(self):
        with pytest.raises(EmptyGroup):
            oversample({TaskKind.SA: []}, seed=0)

    def test_multiset_invariance_and_balance(self):
        rng = random.Random(8)
        for _ in range(20):
            sizes = {t: rng.randint(1, 40)
                     for t in rng.sample(list(TaskKind), k=rng.randint(1, 6))}
            groups = {t: group(t, n) for t, n in sizes.items()}
            out = oversample(groups, seed=rng.randint(0, 99))
            target = max(sizes.values())
            assert len(out) == target * len(sizes)
            per_task = Counter(r.task for r in out)
            assert set(per_task.values()) == {target}
            # no invented records, floor/ceil repeat counts only
            source_ids = {r.id for rs in groups.values() for r in rs}
            id_counts = Counter(r.id for r in out)
            assert set(id_counts) <= source_ids
            for task, n in sizes.items():
                repeats = {c for rid, c in id_counts.items()
                           if rid.startswith(f"{task.value.lower()}-")}
                assert repeats <= {target // n, target // n + 1}

    def test_full_scale_reference_arithmetic(self):
        # headline dominates at 11412*9; stand-in payloads keep this cheap
        sizes = {TaskKind.SA: 3634 + 938 + 9543 + 16184, TaskKind.NER: 609,
                 TaskKind.HC: 11412 * 9, TaskKind.RE: 6768,
                 TaskKind.NER_CLS: 1003, TaskKind.RE_CLS: 9657}
        groups = {t: list(range(n)) for t, n in sizes.items()}
        out = oversample(groups, seed=0)
        assert len(out) == 6 * 102708


class TestAssemblePhase:
    def records_by_task(self, tasks, n_train=6, n_test=3):
        groups = {}
        for task in tasks:
            answers = ["positive", "neutral", "negative"]
            groups[task] = {
                "train": [record(task, i, "train", answers[i % 3])
                          for i in range(n_train)],
                "test": [record(task, 1000 + i, "test", answers[i % 3])
                         for i in range(n_test)],
            }
        return groups

    def test_unknown_phase(self):
        with pytest.raises(UnknownPhase):
            assemble_phase("warmup", {}, seed=0)

    def test_task_specific_passthrough(self):
        groups = self.records_by_task([TaskKind.NER])
        plan, train, eval_records = assemble_phase("task_specific", groups, seed=0,
                                                   task=TaskKind.NER)
        assert train == groups[TaskKind.NER]["train"]
        assert eval_records == groups[TaskKind.NER]["test"]
        assert all(r.task is TaskKind.NER for r in train + eval_records)
        assert plan.per_task_counts_before == {"NER": 6}

    def test_missing_task(self):
        with pytest.raises(MissingTask):
            assemble_phase("multi_task", self.records_by_task([TaskKind.SA]), seed=0)

    def test_multi_task_balances_and_concats_eval(self):
        groups = self.records_by_task(mixer.MULTI_TASK_TASKS)
        groups[TaskKind.HC]["train"] = group(TaskKind.HC, 12)
        plan, train, eval_records = assemble_phase("multi_task", groups, seed=1)
        assert len(train) == 12 * 6
        assert set(plan.per_task_counts_after.values()) == {12}
        assert plan.per_task_counts_before["HC"] == 12
        assert plan.per_task_counts_before["SA"] == 6
        assert len(eval_records) == 3 * 6
        assert plan.eval_tasks == [t.value for t in mixer.MULTI_TASK_TASKS]

    def zero_shot_groups(self):
        groups = self.records_by_task(
            [TaskKind.HC, TaskKind.NER_CLS, TaskKind.RE_CLS])
        groups[TaskKind.SA] = {
            "train": [record(TaskKind.SA, i, "train", dataset="fpb")
                      for i in range(4)],
            "test": [record(TaskKind.SA, 2000 + i, "test",
                            answer=["positive", "neutral", "negative"][i % 3],
                            options=("negative", "neutral", "positive"),
                            dataset="fpb")
                     for i in range(6)],
        }
        return groups

    def test_zero_shot_excludes_neutral_and_keeps_options(self):
        plan, train, eval_records = assemble_phase("zero_shot",
                                                   self.zero_shot_groups(), seed=2)
        assert all(r.answer.casefold() != "neutral" for r in eval_records)
        assert len(eval_records) == 4
        assert all(r.options for r in eval_records)
        assert plan.eval_tasks == ["SA"]

    def test_zero_shot_train_tasks_and_leak_check(self):
        plan, train, eval_records = assemble_phase("zero_shot",
                                                   self.zero_shot_groups(), seed=2)
        assert {r.task for r in train} == set(mixer.ZERO_SHOT_TRAIN_TASKS)
        assert TaskKind.SA not in {r.task for r in train}
        train_sources = {r.source_sample_id for r in train}
        eval_sources = {r.source_sample_id for r in eval_records}
        assert not train_sources & eval_sources

    def test_zero_shot_eval_without_options_rejected(self):
        groups = self.zero_shot_groups()
        groups[TaskKind.SA]["test"] = [record(TaskKind.SA, 1, "test")]
        with pytest.raises(ValueError, match="options"):
            assemble_phase("zero_shot", groups, seed=2)

    def test_determinism(self):
        a = assemble_phase("multi_task",
                           self.records_by_task(mixer.MULTI_TASK_TASKS), seed=3)
        b = assemble_phase("multi_task",
                           self.records_by_task(mixer.MULTI_TASK_TASKS), seed=3)
        assert a[0].to_dict() == b[0].to_dict()
        assert a[1] == b[1] and a[2] == b[2]


class TestWriteMix:
    def test_file_naming_and_plan(self, tmp_path):
        groups = {TaskKind.NER: {"train": group(TaskKind.NER, 2),
                                 "test": group(TaskKind.NER, 1)}}
        plan, train, eval_records = assemble_phase("task_specific", groups, seed=9,
                                                   task=TaskKind.NER)
        paths = write_mix(tmp_path, plan, train, eval_records, task=TaskKind.NER)
        assert paths["train"].name == "task_specific_ner_9.train.jsonl"
        assert paths["eval"].name == "task_specific_ner_9.eval.jsonl"
        saved = json.loads(paths["plan"].read_text(encoding="utf-8"))
        assert saved["phase"] == "task_specific" and saved["seed"] == 9
        assert "algorithm" in saved["record_order"]

    def test_basename_all_token(self):
        assert mix_basename("zero_shot", 7) == "zero_shot_all_7"
        assert mix_basename("task_specific", 7, TaskKind.RE) == "task_specific_re_7"
