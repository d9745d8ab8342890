"""
Trial scheduler for icenav
Runs independent trials in a process pool and collects results in submission order
"""

import logging
from concurrent.futures import Future, ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence

from ..core.config import settings

logger = logging.getLogger(__name__)


@dataclass
class TaskOutcome:
    """Result or exception of one scheduled task"""

    index: int
    label: str
    result: Any = None
    error: Optional[BaseException] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class TrialScheduler:
    """Scheduler for running independent trials, inline when only one worker is available"""

    def __init__(self, parallelism: Optional[int] = None):
        self.max_workers = max(1, min(settings.threads, parallelism or settings.threads))
        self.completed = 0
        self.failed = 0
        self.total = 0

    def run(self, fn: Callable[..., Any], tasks: Sequence[tuple],
            labels: Optional[Sequence[str]] = None) -> List[TaskOutcome]:
        """Call fn(*args) for every task; exceptions are captured per task, never raised"""
        labels = list(labels) if labels is not None else [f"task {i}" for i in range(len(tasks))]
        self.total = len(tasks)
        self.completed = 0
        self.failed = 0
        logger.info(f"Scheduling {self.total} trials on {self.max_workers} worker(s)")

        if self.max_workers == 1 or self.total <= 1:
            outcomes = []
            for i, args in enumerate(tasks):
                try:
                    outcome = TaskOutcome(i, labels[i], result=fn(*args))
                except Exception as e:
                    outcome = TaskOutcome(i, labels[i], error=e)
                self._record(outcome)
                outcomes.append(outcome)
            return outcomes

        with ProcessPoolExecutor(max_workers=self.max_workers) as executor:
            futures: List[Future] = []
            for i, args in enumerate(tasks):
                future = executor.submit(fn, *args)
                future.add_done_callback(self._on_trial_complete(i, labels[i]))
                futures.append(future)
            outcomes = []
            for i, future in enumerate(futures):
                error = future.exception()
                if error is None:
                    outcomes.append(TaskOutcome(i, labels[i], result=future.result()))
                else:
                    outcomes.append(TaskOutcome(i, labels[i], error=error))
        return outcomes

    def _on_trial_complete(self, index: int, label: str) -> Callable[[Future], None]:
        def callback(future: Future):
            error = future.exception()
            self._record(TaskOutcome(index, label, error=error))
        return callback

    def _record(self, outcome: TaskOutcome):
        self.completed += 1
        if outcome.ok:
            logger.info(f"Finished {outcome.label} ({self.completed}/{self.total})")
        else:
            self.failed += 1
            logger.error(f"Failed to run {outcome.label}: {outcome.error}")
