"""Order-preserving process-pool map for independent seeded work items.

Every work item carries its own derived seed, so results are identical for
any worker count; reductions happen in item order.
"""

import os
from concurrent.futures import ProcessPoolExecutor


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None or jobs <= 0:
        return max(1, os.cpu_count() or 1)
    return jobs


def parallel_map(fn, items, jobs: int = 1) -> list:
    items = list(items)
    jobs = min(resolve_jobs(jobs), len(items)) if items else 1
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
