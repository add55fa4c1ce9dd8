"""Fan a sampling job out over independent substreams and gather the partials"""

import asyncio
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import structlog
from structlog.stdlib import BoundLogger

from framework.common import fold_ordered, split_evenly

type Worker[Partial] = Callable[[np.random.Generator, int], Partial]


@dataclass
class DoneHandler:
    index: int
    logger: BoundLogger

    def __call__(self, task: asyncio.Task) -> None:
        if task.cancelled():
            self.logger.warning("Chunk cancelled", chunk=self.index)

        elif (exc := task.exception()) is not None:
            self.logger.error("Chunk failed", chunk=self.index, error=repr(exc))

        else:
            self.logger.debug("Chunk done", chunk=self.index)


@dataclass
class Submission[Partial]:
    index: int
    worker: Worker[Partial]
    generator: np.random.Generator
    count: int
    logger: BoundLogger

    def submit(self, executor: asyncio.TaskGroup) -> asyncio.Task[Partial]:
        task = executor.create_task(
            asyncio.to_thread(self.worker, self.generator, self.count)
        )

        task.add_done_callback(DoneHandler(self.index, self.logger))

        return task


async def gather_chunks[Partial](
    submissions: Sequence[Submission[Partial]],
    logger: BoundLogger,
) -> tuple[Partial, ...]:
    async with asyncio.TaskGroup() as tg:
        tasks = tuple(submission.submit(tg) for submission in submissions)

    await logger.adebug("Gathered chunks", chunks=len(tasks))

    # results come back in submission order, never completion order
    return tuple(task.result() for task in tasks)


def run_chunks[Partial](
    worker: Worker[Partial],
    generators: Sequence[np.random.Generator],
    total: int,
    merge: Callable[[Partial, Partial], Partial],
    logger: BoundLogger | None = None,
) -> Partial:
    logger = logger or structlog.get_logger().bind(module=__name__)

    counts = split_evenly(total, len(generators))

    if len(generators) == 1:
        return worker(generators[0], counts[0])

    logger.debug("Submitting chunks", chunks=len(generators), total=total)

    partials = asyncio.run(
        gather_chunks(
            tuple(
                Submission(index, worker, generator, count, logger)
                for index, (generator, count) in enumerate(zip(generators, counts))
            ),
            logger,
        )
    )

    return fold_ordered(merge, partials)
