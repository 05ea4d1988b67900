"""The six benchmark task kinds and their shapes."""

from __future__ import annotations

from enum import Enum


class TaskKind(str, Enum):
    """Financial NLP tasks covered by the benchmark.

    SA, HC and the two derived CLS tasks are classification-shaped (the
    answer is one label from a finite vocabulary); NER and RE are
    generation-shaped (the answer is a structured serialization).
    """

    SA = "SA"            # sentiment analysis
    HC = "HC"            # headline classification
    NER = "NER"          # named entity recognition
    RE = "RE"            # relation extraction
    NER_CLS = "NER_CLS"  # entity-type classification derived from NER
    RE_CLS = "RE_CLS"    # relation-type classification derived from RE

    def __str__(self) -> str:
        return self.value


CLASSIFICATION_TASKS = frozenset(
    {TaskKind.SA, TaskKind.HC, TaskKind.NER_CLS, TaskKind.RE_CLS}
)
GENERATION_TASKS = frozenset({TaskKind.NER, TaskKind.RE})


def is_classification(task: TaskKind) -> bool:
    return task in CLASSIFICATION_TASKS
