"""Running the ``4**m`` subnetwork contractions and summing their scalars.

Assignment ids are split into contiguous ``[lo, hi)`` batches. Every batch
is summed in ascending id order and the master adds the per-batch partials
in ascending range order, so for a fixed batch layout the amplitude is
bitwise reproducible whichever backend or worker computed each batch.
"""

from __future__ import annotations

import os
import threading
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from qcut.contraction import ContractionPlan, RankLimitError, execute_plan
from qcut.cutting import DEFAULT_MAX_JOBS, CutSet, JobLimitError, apply_cut, digits_of
from qcut.network import TensorNetwork


class SubnetworkError(RuntimeError):
    """A single subnetwork contraction failed."""

    def __init__(self, index: int, cause: BaseException):
        self.index = index
        super().__init__(f"subnetwork {index} failed: {cause}")


class CoverageError(ValueError):
    pass


@dataclass(frozen=True)
class WorkerResult:
    lo: int
    hi: int
    partial_sum: complex
    wall_time: float = 0.0
    worker: str = ""


@dataclass
class RunReport:
    amplitude: complex
    rounds: int
    workers: int
    jobs: int
    batches: int
    per_worker: dict[str, list[float]] = field(default_factory=dict)
    recomputed_batches: int = 0
    wall_time: float = 0.0
    backend: str = "serial"

    def to_json(self, timings: bool = True) -> dict:
        out = {
            "amplitude": {"re": self.amplitude.real, "im": self.amplitude.imag},
            "backend": self.backend,
            "jobs": self.jobs,
            "batches": self.batches,
            "workers": self.workers,
            "rounds": self.rounds,
            "recomputed_batches": self.recomputed_batches,
        }
        if timings:
            out["wall_time"] = self.wall_time
            out["per_worker"] = self.per_worker
        return out


def rounds_needed(jobs: int, workers: int) -> int:
    """Serial rounds when ``jobs`` equal subnetworks share ``workers`` cores."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return -(-jobs // workers)


def make_batches(jobs: int, workers: int, batch_size: int | None = None) -> list[tuple[int, int]]:
    """Contiguous ranges covering ``[0, jobs)``; default size ``ceil(jobs / workers)``."""
    if batch_size is None:
        batch_size = rounds_needed(jobs, workers)
    if batch_size < 1:
        raise ValueError("batch size must be >= 1")
    return [(lo, min(lo + batch_size, jobs)) for lo in range(0, jobs, batch_size)]


def check_job_limit(cut: CutSet, max_jobs: int = DEFAULT_MAX_JOBS) -> int:
    jobs = 4**cut.m
    if jobs > max_jobs:
        raise JobLimitError(f"4^{cut.m} = {jobs} subnetworks exceeds the job limit {max_jobs}")
    return jobs


def check_guard(plan: ContractionPlan, max_rank: int | None) -> None:
    if max_rank is not None and plan.peak_rank > max_rank:
        raise RankLimitError(plan.peak_rank, max_rank, "planned peak")


def contract_range(
    tn: TensorNetwork,
    cut: CutSet,
    plan: ContractionPlan,
    lo: int,
    hi: int,
    max_rank: int | None = None,
) -> complex:
    """Sum the subnetwork amplitudes for assignment ids ``lo .. hi-1``."""
    total = 0j
    for idx in range(lo, hi):
        try:
            total += execute_plan(apply_cut(tn, cut, digits_of(idx, cut.m)), plan, max_rank)
        except Exception as exc:
            raise SubnetworkError(idx, exc) from exc
    return total


def aggregate(partials: Iterable[WorkerResult], jobs: int | None = None) -> complex:
    """Add partial sums in ascending range order after checking coverage."""
    parts = sorted(partials, key=lambda r: (r.lo, r.hi))
    expect = 0
    for r in parts:
        if r.lo != expect:
            kind = "gap" if r.lo > expect else "overlap"
            raise CoverageError(f"{kind} in assignment coverage at id {min(r.lo, expect)}")
        if r.hi <= r.lo:
            raise CoverageError(f"empty or inverted range [{r.lo}, {r.hi})")
        expect = r.hi
    if jobs is not None and expect != jobs:
        raise CoverageError(f"gap in assignment coverage at id {expect}")
    total = 0j
    for r in parts:
        total += r.partial_sum
    return total


def run_serial(
    tn: TensorNetwork,
    cut: CutSet,
    plan: ContractionPlan,
    max_rank: int | None = None,
    max_jobs: int = DEFAULT_MAX_JOBS,
) -> complex:
    """Reference value: every subnetwork in ascending assignment order."""
    jobs = check_job_limit(cut, max_jobs)
    check_guard(plan, max_rank)
    return contract_range(tn, cut, plan, 0, jobs, max_rank)


# process-pool workers receive the payload once through the initializer
_PAYLOAD: tuple | None = None


def _init_process(payload) -> None:
    global _PAYLOAD
    _PAYLOAD = payload


def _process_batch(lo: int, hi: int) -> WorkerResult:
    assert _PAYLOAD is not None
    t0 = time.perf_counter()
    tn, cut, plan, max_rank = _PAYLOAD
    value = contract_range(tn, cut, plan, lo, hi, max_rank)
    return WorkerResult(lo, hi, value, time.perf_counter() - t0, f"pid{os.getpid()}")


def run_pool(
    tn: TensorNetwork,
    cut: CutSet,
    plan: ContractionPlan,
    workers: int,
    batch_size: int | None = None,
    max_rank: int | None = None,
    max_jobs: int = DEFAULT_MAX_JOBS,
    processes: bool = False,
) -> RunReport:
    """Contract batches on a local pool of threads (or processes)."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    jobs = check_job_limit(cut, max_jobs)
    check_guard(plan, max_rank)
    batches = make_batches(jobs, workers, batch_size)
    t0 = time.perf_counter()

    def thread_batch(lo: int, hi: int) -> WorkerResult:
        start = time.perf_counter()
        value = contract_range(tn, cut, plan, lo, hi, max_rank)
        return WorkerResult(
            lo, hi, value, time.perf_counter() - start, threading.current_thread().name
        )

    if processes:
        pool = ProcessPoolExecutor(
            workers, initializer=_init_process, initargs=((tn, cut, plan, max_rank),)
        )
        submit = lambda lo, hi: pool.submit(_process_batch, lo, hi)  # noqa: E731
    else:
        pool = ThreadPoolExecutor(workers, thread_name_prefix="qcut-worker")
        submit = lambda lo, hi: pool.submit(thread_batch, lo, hi)  # noqa: E731
    with pool:
        futures = [submit(lo, hi) for lo, hi in batches]
        results = [f.result() for f in futures]

    per_worker: dict[str, list[float]] = {}
    for r in results:
        per_worker.setdefault(r.worker, []).append(r.wall_time)
    return RunReport(
        amplitude=aggregate(results, jobs),
        rounds=rounds_needed(jobs, workers),
        workers=workers,
        jobs=jobs,
        batches=len(batches),
        per_worker=per_worker,
        wall_time=time.perf_counter() - t0,
        backend="process" if processes else "pool",
    )


def serial_report(
    tn: TensorNetwork,
    cut: CutSet,
    plan: ContractionPlan,
    max_rank: int | None = None,
    max_jobs: int = DEFAULT_MAX_JOBS,
) -> RunReport:
    t0 = time.perf_counter()
    value = run_serial(tn, cut, plan, max_rank, max_jobs)
    secs = time.perf_counter() - t0
    jobs = 4**cut.m
    return RunReport(value, jobs, 1, jobs, 1, {"main": [secs]}, 0, secs, "serial")


def partition_ok(ranges: Sequence[tuple[int, int]], jobs: int) -> bool:
    try:
        aggregate([WorkerResult(lo, hi, 0j) for lo, hi in ranges], jobs)
    except CoverageError:
        return False
    return True

