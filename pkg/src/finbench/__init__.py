"""finbench: a three-phase instruction-tuning benchmark harness for
financial NLP, with model training/inference delegated to external
adapter processes over a file protocol."""

__version__ = "0.1.0"

from .tasks import TaskKind  # noqa: F401
