from .occurrences import latest_due, next_after, occurrences
from .scheduler import KIND_SCORE, KIND_TRAIN, Scheduler, Task

__all__ = [
    "occurrences",
    "latest_due",
    "next_after",
    "Scheduler",
    "Task",
    "KIND_TRAIN",
    "KIND_SCORE",
]
