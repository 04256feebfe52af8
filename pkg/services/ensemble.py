"""Ensemble fan-out: seeded member batches on a thread pool, reduced in member order."""

import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Optional, Sequence

import numpy as np
from loguru import logger

from core.config import MAX_WORKERS
from core.exceptions import IncompatibleRunsError
from core.models import StochasticTrajectory

# members per task; a batch is integrated as one array
BATCH_SIZE = 256


def _batches(seeds: Sequence[int], batch_size: int) -> list[list[int]]:
    return [list(seeds[i:i + batch_size]) for i in range(0, len(seeds), batch_size)]


def run_members(
    seeds: Sequence[int],
    member_run: Callable[[list[int]], StochasticTrajectory],
    *,
    max_workers: Optional[int] = None,
    batch_size: int = BATCH_SIZE,
) -> StochasticTrajectory:
    """Run every seed through member_run and stack the rows in seed order.

    Completion order never affects the result: batches are collected by
    index and concatenated afterwards.
    """
    batches = _batches(seeds, batch_size)
    workers = max(1, min(max_workers or MAX_WORKERS, len(batches)))
    logger.info(f"[Ensemble] Launching {len(batches)} batch(es) of up to {batch_size} members on {workers} worker(s)")
    start = time.time()

    results: dict[int, StochasticTrajectory] = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {pool.submit(member_run, batch): i for i, batch in enumerate(batches)}
        for future in as_completed(futures):
            index = futures[future]
            results[index] = future.result()
            logger.debug(f"[Ensemble]   batch {index} done ({len(results)}/{len(batches)})")

    ordered = [results[i] for i in range(len(batches))]
    grid = ordered[0].t
    for part in ordered[1:]:
        if len(part.t) != len(grid) or not np.array_equal(part.t, grid):
            raise IncompatibleRunsError("ensemble batches returned different time grids")

    logger.info(f"[Ensemble] ✓ {len(seeds)} members in {time.time() - start:.2f}s")
    return StochasticTrajectory(
        t=grid,
        x=np.concatenate([part.x for part in ordered], axis=0),
        v=np.concatenate([part.v for part in ordered], axis=0),
        seeds=[s for part in ordered for s in part.seeds],
    )
