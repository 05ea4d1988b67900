"""Exception types shared across the harness.

Every error the pipeline can surface to a caller is a subclass of
``FinbenchError`` so the CLI can map them to stable exit codes.
"""

from __future__ import annotations


class FinbenchError(Exception):
    """Base class for all harness errors."""


class MissingFile(FinbenchError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"missing file: {path}")


class MalformedRow(FinbenchError):
    def __init__(self, dataset: str, row: int, reason: str):
        self.dataset = dataset
        self.row = row
        self.reason = reason
        super().__init__(f"{dataset}: malformed row {row}: {reason}")


class MissingQuestionAnswer(MalformedRow):
    def __init__(self, dataset: str, row: int, question_index: int):
        self.question_index = question_index
        super().__init__(dataset, row, f"missing answer for question {question_index}")


class CountMismatch(FinbenchError):
    def __init__(self, dataset: str, expected: int, actual: int):
        self.dataset = dataset
        self.expected = expected
        self.actual = actual
        super().__init__(f"{dataset}: expected {expected} samples, loaded {actual}")


class UnknownLabel(FinbenchError):
    def __init__(self, dataset: str, row: int, label: str):
        self.dataset = dataset
        self.row = row
        self.label = label
        super().__init__(f"{dataset}: row {row} has label {label!r} not in vocabulary")


class PoolTaskMismatch(FinbenchError):
    pass


class ZeroShotOnGenerationTask(FinbenchError):
    pass


class EmptyGroup(FinbenchError):
    def __init__(self, task: str):
        self.task = task
        super().__init__(f"cannot oversample empty group for task {task}")


class EmptyRecords(FinbenchError):
    pass


class MissingTask(FinbenchError):
    def __init__(self, phase: str, task: str):
        self.phase = phase
        self.task = task
        super().__init__(f"phase {phase} requires records for task {task}")


class LengthMismatch(FinbenchError):
    def __init__(self, gold: int, pred: int):
        super().__init__(f"gold has {gold} items but predictions have {pred}")


class UnknownPhase(FinbenchError):
    pass


class InvalidOverride(FinbenchError):
    pass


class AdapterNotFound(FinbenchError):
    def __init__(self, adapter: str):
        self.adapter = adapter
        super().__init__(f"adapter executable not found: {adapter!r}")


class AdapterFailed(FinbenchError):
    def __init__(self, command: list[str], exit_status: int, stderr_tail: str = ""):
        self.command = command
        self.exit_status = exit_status
        self.stderr_tail = stderr_tail
        msg = f"adapter exited with status {exit_status}: {' '.join(command)}"
        if stderr_tail:
            msg += f"\n{stderr_tail}"
        super().__init__(msg)


class ProtocolViolation(FinbenchError):
    pass
