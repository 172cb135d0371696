"""
Work queue for protocol cells.

Cells (dataset x algorithm x seed) are independent; they run on a thread
pool driven by asyncio and their results are merged by cell key, so the
output order never depends on completion order.
"""
import asyncio
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Sequence, Tuple

logger = logging.getLogger('pobench.jobs')

CellKey = Tuple[Any, ...]


@dataclass(frozen=True)
class Job:
    key: CellKey
    run: Callable[[], Any]


async def _run_all(jobs: Sequence[Job], workers: int) -> List[Any]:
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        async def run_one(job: Job) -> Any:
            logger.info(f"cell {job.key}: start")
            result = await loop.run_in_executor(pool, job.run)
            logger.info(f"cell {job.key}: done")
            return result

        return await asyncio.gather(*(run_one(job) for job in jobs))


def run_jobs(jobs: Sequence[Job], workers: int = 1) -> Dict[CellKey, Any]:
    """
    Run every job and return {key: result} in sorted key order.

    The first failing job's exception propagates.
    """
    keys = [job.key for job in jobs]
    if len(set(keys)) != len(keys):
        raise ValueError("duplicate cell keys in job list")
    if workers <= 1:
        results = []
        for job in jobs:
            logger.info(f"cell {job.key}: start")
            results.append(job.run())
    else:
        results = asyncio.run(_run_all(jobs, workers))
    merged = dict(zip(keys, results))
    return {key: merged[key] for key in sorted(merged, key=repr)}
