"""
Worker pool and long-running jobs.

run_parallel fans independent work items (per-prime density trees,
Monte Carlo batches, iterates of a chat sequence, slices of a point
enumeration) out to a process pool and returns results in input order, so
reports never depend on the worker count.

run_report_job wraps the full report pipeline the way a queued job would:
it owns the run id, the run logger and the progress reporting, and always
returns a status dict instead of raising.
"""
import logging
import os
import uuid
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, Iterable, List, Optional, TypeVar

from config import DEFAULT_CONFIG, RunConfig
from logger import get_run_logger

T = TypeVar('T')
R = TypeVar('R')

logger = logging.getLogger(__name__)


def available_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def new_run_id() -> str:
    return uuid.uuid4().hex[:8]


def run_parallel(
    fn: Callable[[T], R],
    items: Iterable[T],
    threads: int = 1,
    progress_callback: Optional[Callable[[int, int], None]] = None,
) -> List[R]:
    """
    [fn(item) for item in items], on up to `threads` worker processes.

    threads <= 1 runs inline. fn and the items must be picklable when
    threads > 1. progress_callback(done, total) fires after each item.
    """
    items = list(items)
    total = len(items)
    if threads <= 1 or total <= 1:
        results = []
        for i, item in enumerate(items, start=1):
            results.append(fn(item))
            if progress_callback:
                progress_callback(i, total)
        return results

    workers = min(threads, total)
    logger.debug("Dispatching %d items to %d workers", total, workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = []
        for i, result in enumerate(pool.map(fn, items), start=1):
            results.append(result)
            if progress_callback:
                progress_callback(i, total)
    return results


def run_report_job(
    source: str,
    cfg: RunConfig = DEFAULT_CONFIG,
    run_id: Optional[str] = None,
    progress_callback: Optional[Callable[[int, str], None]] = None,
    **options: Any,
) -> Dict[str, Any]:
    """
    Run the full report for one morphism source string (builder or file).

    Returns:
        dict with status ('completed' | 'failed'), run_id and either the
        report or the error with its exit code.
    """
    from heights.errors import HeightsError
    from heights.morphism import parse_builder
    from heights.pipeline import run_report

    run_id = run_id or new_run_id()
    log = get_run_logger(run_id)
    log.info("Report job started for %s", source)

    def update_progress(progress: int, step: str):
        if progress_callback:
            progress_callback(progress, step)
        log.info("Progress: %d%% - %s", progress, step)

    update_progress(0, 'starting')
    try:
        F = parse_builder(source)
    except HeightsError as e:
        log.error("Could not read morphism: %s", e)
        return {'status': 'failed', 'run_id': run_id, 'error': e.to_dict(), 'exit_code': e.exit_code}

    result = run_report(F, cfg, run_id=run_id, progress_callback=update_progress, **options)
    if result['status'] == 'completed':
        log.info("Report job completed")
    else:
        log.error("Report job failed: %s", result.get('error', {}).get('message', 'unknown error'))
    return result
